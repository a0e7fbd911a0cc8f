"""
Deterministic generators for the dataset-shift scenarios.

Each generator takes a `ScenarioConfig` and returns `(source, target, truth)`.
`truth` carries what the generative process knows exactly: the density ratio
p_target / p_source at any point, selection probabilities, class priors and
closed-form posteriors. All randomness is drawn from sub-streams of the
config seed, so a (config, seed) pair always yields bit-identical datasets.
"""

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import stats
from scipy.special import expit, logit, logsumexp

from ..constants import (
    MIN_EXPECTED_SELECTED,
    OLD_QUANTILE,
    PRIOR_SUM_TOLERANCE,
    SCENARIO_ALIASES,
    SCENARIO_DEFAULTS,
    SCENARIO_KINDS,
    SCENARIO_POPULATIONS,
    YOUNG_QUANTILE,
)
from .dataset import Dataset
from .errors import ShiftLabError
from .rng import RngSeed, as_seed

logger = logging.getLogger(__name__)

AGE = "age"
HERMITE_NODES = 101


class ScenarioError(ShiftLabError):
    """Raised for invalid scenario parameters or empty selections."""

    pass


class PositivityError(ScenarioError):
    """Raised when the target puts mass where the source has none."""

    pass


# --- Configuration ---


def _as_pair(value: Any, label: str) -> Tuple[float, float]:
    pair = tuple(float(v) for v in value)
    if len(pair) != 2:
        raise ScenarioError(f"'{label}' needs two numbers, got {value!r}.")
    return pair


def _check_probability(value: float, label: str):
    if not 0.0 <= value <= 1.0:
        raise ScenarioError(f"'{label}' must lie in [0, 1], got {value}.")


def check_priors(priors: Sequence[float], label: str) -> np.ndarray:
    """Validates a class-prior vector: entries in [0, 1], summing to one."""
    vector = np.asarray(priors, dtype=float).reshape(-1)
    if vector.size < 2:
        raise ScenarioError(f"'{label}' needs at least two classes.")
    if np.any(vector < 0) or np.any(vector > 1):
        raise ScenarioError(f"'{label}' entries must lie in [0, 1], got {vector.tolist()}.")
    if abs(float(np.sum(vector)) - 1.0) > PRIOR_SUM_TOLERANCE:
        raise ScenarioError(f"'{label}' must sum to 1, got {float(np.sum(vector))!r}.")
    return vector


@dataclass(frozen=True)
class ScenarioConfig:
    """
    A generative scenario: its kind, sample sizes, parameters and seed.

    `params` overrides `SCENARIO_DEFAULTS[kind]`; unknown keys are rejected.
    For selection scenarios the source is the selected part of an
    `n_target`-row population, so its size is random and `n_source` is unused.
    """

    kind: str
    n_source: int = 1000
    n_target: int = 1000
    seed: Union[RngSeed, int] = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(
                f"Unknown scenario kind '{self.kind}'. Known: {', '.join(SCENARIO_KINDS)}"
            )
        for label in ("n_source", "n_target"):
            value = getattr(self, label)
            if int(value) != value or value < 1:
                raise ScenarioError(f"'{label}' must be a positive count, got {value}.")
            object.__setattr__(self, label, int(value))
        object.__setattr__(self, "seed", as_seed(self.seed))
        defaults = SCENARIO_DEFAULTS[self.kind]
        unknown = sorted(set(self.params) - set(defaults))
        if unknown:
            raise ScenarioError(
                f"Unknown parameter(s) for scenario '{self.kind}': {', '.join(unknown)}"
            )
        merged = {**defaults, **dict(self.params)}
        object.__setattr__(self, "params", MappingProxyType(merged))
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind == "age_shift":
            if p["age_max"] <= p["age_min"]:
                raise ScenarioError("Degenerate age range: age_max must exceed age_min.")
            if p["offset"] < 0:
                raise ScenarioError(f"'offset' must be >= 0, got {p['offset']}.")
            if p["noise"] <= 0:
                raise ScenarioError(f"'noise' must be > 0, got {p['noise']}.")
            if p["prevalence_slope"] < 0:
                raise ScenarioError("'prevalence_slope' must be >= 0 (prevalence rises with age).")
            for label in ("young_beta", "old_beta"):
                if min(_as_pair(p[label], label)) <= 0:
                    raise ScenarioError(f"'{label}' shape parameters must be > 0.")
            for label in ("old_mix_source", "old_mix_target", "prevalence_center"):
                _check_probability(p[label], label)
        elif self.kind == "selection":
            if p["subkind"] not in ("a", "b", "c"):
                raise ScenarioError(f"Selection sub-kind must be a, b or c, got '{p['subkind']}'.")
            if p["noise_scale"] <= 0:
                raise ScenarioError(f"'noise_scale' must be > 0, got {p['noise_scale']}.")
            _check_probability(p["rate"], "rate")
        elif self.kind == "covariate_shift":
            if p["noise"] <= 0:
                raise ScenarioError(f"'noise' must be > 0, got {p['noise']}.")
            if len(p["coefficients"]) > 5:
                raise ScenarioError("The true function has degree at most 4.")
            _law(p["source_law"], "source_law")
            _law(p["target_law"], "target_law")
        elif self.kind == "label_shift":
            source = check_priors(p["source_priors"], "source_priors")
            target = check_priors(p["target_priors"], "target_priors")
            means = np.asarray(p["means"], dtype=float)
            if means.ndim != 2 or means.shape[0] != source.size or source.size != target.size:
                raise ScenarioError("'means' must hold one mean vector per class of the priors.")
            if p["scale"] <= 0:
                raise ScenarioError(f"'scale' must be > 0, got {p['scale']}.")
        elif self.kind == "age_replica":
            for label in ("young_old_fraction", "old_old_fraction"):
                _check_probability(p[label], label)
            if p["age_max"] <= p["age_min"]:
                raise ScenarioError("Degenerate age range: age_max must exceed age_min.")
            if int(p["n_features"]) < 1 or int(p["pool_size"]) < 10:
                raise ScenarioError("Replica needs >= 1 feature and a pool of >= 10 rows.")

    @property
    def populations(self) -> Tuple[str, str]:
        return SCENARIO_POPULATIONS[self.kind]

    @classmethod
    def from_alias(
        cls,
        alias: str,
        n_source: int = 1000,
        n_target: int = 1000,
        seed: Union[RngSeed, int] = 0,
        **params: Any,
    ) -> "ScenarioConfig":
        """Builds a config from a figure alias ('fig3b') or a kind name."""
        if alias in SCENARIO_ALIASES:
            preset = dict(SCENARIO_ALIASES[alias])
            kind = preset.pop("kind")
            params = {**preset, **params}
        elif alias in SCENARIO_KINDS:
            kind = alias
        else:
            known = ", ".join(list(SCENARIO_ALIASES) + SCENARIO_KINDS)
            raise ScenarioError(f"Unknown scenario '{alias}'. Known: {known}")
        return cls(kind=kind, n_source=n_source, n_target=n_target, seed=seed, params=params)


# --- Ground truth ---


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """
    Exact quantities known to a scenario's generative process.

    Attributes:
        kind: Scenario kind.
        ratio: Evaluates p_target / p_source at the rows of a Dataset drawn
            from either population (covariates and outputs included as needed).
        source_weights: `ratio` at the generated source rows.
        selection_probs: P(S=1 | row) at the selected source rows (selection only).
        overall_rate: P(S=1) in the population (selection only).
        source_priors, target_priors: Class priors (classification scenarios).
        posterior: (dataset, population) -> exact P(Y | x[, age]) matrix.
        regression_function: Exact E[Y | x] for the covariate-shift scenario.
        source_rows: Index of each source row within the target population,
            when the source is a subsample of it (selection only).
        params: The resolved scenario parameters.
    """

    kind: str
    ratio: Callable[[Dataset], np.ndarray]
    source_weights: np.ndarray
    selection_probs: Optional[np.ndarray] = None
    overall_rate: Optional[float] = None
    source_priors: Optional[np.ndarray] = None
    target_priors: Optional[np.ndarray] = None
    posterior: Optional[Callable[[Dataset, str], np.ndarray]] = None
    regression_function: Optional[Callable[[np.ndarray], np.ndarray]] = None
    source_rows: Optional[np.ndarray] = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def columns(self) -> Dict[str, np.ndarray]:
        """Per-source-row truth columns, as written to truth.csv."""
        columns = {"true_weight": self.source_weights}
        if self.selection_probs is not None:
            columns["selection_prob"] = self.selection_probs
        return columns


def _checked_ratio(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise PositivityError(
            "Density ratio undefined: a point has zero source density "
            "(positivity violation, cannot be fixed by importance weighting)."
        )
    return values


# --- Age shift ---


def _age_mixture_pdf(u: np.ndarray, old_mix: float, young_beta, old_beta) -> np.ndarray:
    return (1.0 - old_mix) * stats.beta.pdf(u, *young_beta) + old_mix * stats.beta.pdf(
        u, *old_beta
    )


def _age_curve(u: np.ndarray) -> np.ndarray:
    return np.column_stack([u, u**2])


def gen_age_shift(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """
    Age drives both the label and the features; only the age law shifts.

    Age u (rescaled to [0, 1]) follows a two-Beta mixture whose old-heavy share
    is larger in the target. Healthy points lie on the arc (u, u^2) plus
    isotropic noise; diseased points are shifted by (0, offset). Disease
    prevalence is logistic and nondecreasing in age.
    """
    if config.kind != "age_shift":
        raise ScenarioError(f"gen_age_shift needs an age_shift config, got '{config.kind}'.")
    p = config.params
    young_beta, old_beta = _as_pair(p["young_beta"], "young_beta"), _as_pair(
        p["old_beta"], "old_beta"
    )
    span = p["age_max"] - p["age_min"]
    shift = np.array([0.0, p["offset"]])

    def prevalence(u):
        return expit(p["prevalence_slope"] * (u - p["prevalence_center"]))

    def draw(n: int, old_mix: float, stream: str) -> Dataset:
        rng = config.seed.substream(stream).generator()
        is_old = rng.random(n) < old_mix
        u = np.where(
            is_old,
            rng.beta(old_beta[0], old_beta[1], n),
            rng.beta(young_beta[0], young_beta[1], n),
        )
        labels = (rng.random(n) < prevalence(u)).astype(int)
        features = _age_curve(u) + labels[:, None] * shift + rng.normal(0.0, p["noise"], (n, 2))
        return Dataset(
            features=features,
            outputs=labels,
            covariates={AGE: p["age_min"] + span * u},
            column_names=("x1", "x2"),
            n_classes=2,
        )

    source = draw(config.n_source, p["old_mix_source"], "young")
    target = draw(config.n_target, p["old_mix_target"], "old")

    def unit_age(data: Dataset) -> np.ndarray:
        return (data.covariate(AGE) - p["age_min"]) / span

    def ratio(data: Dataset) -> np.ndarray:
        u = unit_age(data)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = _age_mixture_pdf(u, p["old_mix_target"], young_beta, old_beta) / (
                _age_mixture_pdf(u, p["old_mix_source"], young_beta, old_beta)
            )
        return _checked_ratio(values)

    def posterior(data: Dataset, population: str = "young") -> np.ndarray:
        # Features given age do not depend on the population.
        u = unit_age(data)
        curve = _age_curve(u)
        log_healthy = -np.sum((data.features - curve) ** 2, axis=1) / (2 * p["noise"] ** 2)
        log_sick = -np.sum((data.features - curve - shift) ** 2, axis=1) / (
            2 * p["noise"] ** 2
        )
        prior = prevalence(u)
        logits = np.column_stack(
            [np.log1p(-prior) + log_healthy, np.log(prior) + log_sick]
        )
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    truth = GroundTruth(
        kind=config.kind,
        ratio=ratio,
        source_weights=ratio(source),
        posterior=posterior,
        params=config.params,
    )
    return source, target, truth


def age_mixture_mean(config: ScenarioConfig, population: str) -> float:
    """Exact mean age of a population of an age_shift scenario."""
    p = config.params
    old_mix = p["old_mix_source"] if population == "young" else p["old_mix_target"]
    young_beta, old_beta = _as_pair(p["young_beta"], "young_beta"), _as_pair(
        p["old_beta"], "old_beta"
    )
    unit = (1 - old_mix) * stats.beta.mean(*young_beta) + old_mix * stats.beta.mean(*old_beta)
    return p["age_min"] + (p["age_max"] - p["age_min"]) * unit


# --- Preferential selection ---


def _selection_index(params: Mapping[str, Any], x, m, z) -> np.ndarray:
    """Linear predictor of the selection rule: logit P(S=1 | x, m, z)."""
    kind = params["subkind"]
    if kind == "a":
        rate = params["rate"]
        if rate in (0.0, 1.0):
            base = np.full(np.shape(z), np.inf if rate == 1.0 else -np.inf)
        else:
            base = np.full(np.shape(z), logit(rate))
    elif kind == "b":
        base = params["x_slope"] * np.asarray(x, dtype=float)
    else:
        base = params["m_slope"] * np.asarray(m, dtype=float)
    return base + params["z_strength"] * np.asarray(z, dtype=float)


def selection_probabilities(params: Mapping[str, Any], x, m, z) -> np.ndarray:
    return expit(_selection_index(params, x, m, z))


def overall_selection_rate(params: Mapping[str, Any]) -> float:
    """
    P(S=1) in the population, integrated with Gauss-Hermite quadrature.

    The selection index is Gaussian (Y, M, Z standard normal, noise centred),
    so the rate is E[expit(mu + s * G)] for a standard normal G.
    """
    kind = params["subkind"]
    if kind == "a":
        if params["rate"] in (0.0, 1.0) or params["z_strength"] == 0:
            return float(params["rate"])
        mean, sd = float(logit(params["rate"])), abs(params["z_strength"])
    elif kind == "b":
        x_var = 2.0 + params["noise_scale"] ** 2
        mean = 0.0
        sd = np.sqrt(params["x_slope"] ** 2 * x_var + params["z_strength"] ** 2)
    else:
        mean = 0.0
        sd = np.sqrt(params["m_slope"] ** 2 + params["z_strength"] ** 2)
    nodes, node_weights = hermegauss(HERMITE_NODES)
    return float(node_weights @ expit(mean + sd * nodes) / np.sqrt(2 * np.pi))


def gen_selection_scenario(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """
    Preferential sample selection from a population with X := Y + M + noise.

    Y, M and the auxiliary Z are independent standard normals; the noise has
    standard deviation `noise_scale`. The target is the whole population; the
    source keeps the rows whose selection indicator S is 1, where
    a: P(S=1) is the constant `rate`; b: P(S=1|x) = expit(x_slope * x);
    c: P(S=1|m) = expit(m_slope * m). `z_strength` adds z to the selection
    index; Z never affects X or Y.
    """
    if config.kind != "selection":
        raise ScenarioError(f"gen_selection_scenario needs a selection config, got '{config.kind}'.")
    p = config.params
    n = config.n_target
    overall = overall_selection_rate(p)
    if overall * n < MIN_EXPECTED_SELECTED:
        raise ScenarioError(
            f"Selection rule keeps {overall * n:.3g} rows in expectation, "
            f"below the floor of {MIN_EXPECTED_SELECTED:g}."
        )
    rng = config.seed.substream("population").generator()
    y = rng.standard_normal(n)
    m = rng.standard_normal(n)
    noise = rng.normal(0.0, p["noise_scale"], n)
    z = rng.standard_normal(n)
    x = y + m + noise
    probs = selection_probabilities(p, x, m, z)
    selected = rng.random(n) < probs
    if not selected.any():
        raise ScenarioError("Selection rule selected zero rows.")
    logger.debug("Selected %d of %d rows (expected rate %.4f)", selected.sum(), n, overall)

    population = Dataset(
        features=x.reshape(-1, 1),
        outputs=y,
        covariates={"m": m, "z": z},
        column_names=("x",),
    )
    source_rows = np.flatnonzero(selected)
    source = population.take(source_rows)

    def ratio(data: Dataset) -> np.ndarray:
        row_probs = selection_probabilities(
            p, data.features[:, 0], data.covariate("m"), data.covariate("z")
        )
        with np.errstate(divide="ignore"):
            return _checked_ratio(overall / row_probs)

    truth = GroundTruth(
        kind=config.kind,
        ratio=ratio,
        source_weights=ratio(source),
        selection_probs=probs[selected],
        overall_rate=overall,
        source_rows=source_rows,
        params=config.params,
    )
    return source, population, truth


# --- Covariate shift (1-D) ---


def _law(spec: Sequence[Any], label: str):
    """Frozen scipy distribution for ('gaussian', mean, sd) or ('uniform', low, high)."""
    try:
        family, a, b = spec[0], float(spec[1]), float(spec[2])
    except (TypeError, ValueError, IndexError):
        raise ScenarioError(f"'{label}' must be (family, a, b), got {spec!r}.") from None
    if family == "gaussian":
        if b <= 0:
            raise ScenarioError(f"'{label}' needs a positive standard deviation.")
        return stats.norm(loc=a, scale=b)
    if family == "uniform":
        if b <= a:
            raise ScenarioError(f"'{label}' needs low < high.")
        return stats.uniform(loc=a, scale=b - a)
    raise ScenarioError(f"'{label}' family must be gaussian or uniform, got '{family}'.")


def check_support(source_law, target_law):
    """Raises PositivityError when the target support is not inside the source support."""
    s_low, s_high = source_law.support()
    t_low, t_high = target_law.support()
    if t_low < s_low or t_high > s_high:
        raise PositivityError(
            f"Target support [{t_low:g}, {t_high:g}] is not covered by source support "
            f"[{s_low:g}, {s_high:g}]; importance weighting cannot fix this shift."
        )


def gen_covariate_shift(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """
    1-D covariate shift: y = f(x) + noise with f a fixed polynomial.

    x follows `source_law` in the source and `target_law` in the target, so
    P(Y | X) is identical while the input law moves.
    """
    if config.kind != "covariate_shift":
        raise ScenarioError(f"gen_covariate_shift needs a covariate_shift config, got '{config.kind}'.")
    p = config.params
    source_law = _law(p["source_law"], "source_law")
    target_law = _law(p["target_law"], "target_law")
    check_support(source_law, target_law)
    coefficients = np.asarray(p["coefficients"], dtype=float)

    def regression_function(x: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coefficients)

    def draw(n: int, law, stream: str) -> Dataset:
        rng = config.seed.substream(stream).generator()
        x = law.ppf(rng.random(n))
        y = regression_function(x) + rng.normal(0.0, p["noise"], n)
        return Dataset(features=x.reshape(-1, 1), outputs=y, column_names=("x",))

    source = draw(config.n_source, source_law, "source")
    target = draw(config.n_target, target_law, "target")

    def ratio(data: Dataset) -> np.ndarray:
        x = data.features[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.exp(target_law.logpdf(x) - source_law.logpdf(x))
        return _checked_ratio(np.where(np.isneginf(target_law.logpdf(x)), 0.0, values))

    truth = GroundTruth(
        kind=config.kind,
        ratio=ratio,
        source_weights=ratio(source),
        regression_function=regression_function,
        params=config.params,
    )
    return source, target, truth


# --- Label shift ---


def gen_label_shift(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """
    Prior probability shift between two samples with shared class-conditionals.

    X | Y=k ~ N(means[k], scale^2 I) in both samples; only P(Y) differs.
    """
    if config.kind != "label_shift":
        raise ScenarioError(f"gen_label_shift needs a label_shift config, got '{config.kind}'.")
    p = config.params
    source_priors = check_priors(p["source_priors"], "source_priors")
    target_priors = check_priors(p["target_priors"], "target_priors")
    means = np.asarray(p["means"], dtype=float)
    n_classes, dim = means.shape
    names = tuple(f"x{j + 1}" for j in range(dim))

    def draw(n: int, priors: np.ndarray, stream: str) -> Dataset:
        rng = config.seed.substream(stream).generator()
        labels = rng.choice(n_classes, size=n, p=priors)
        features = means[labels] + rng.normal(0.0, p["scale"], (n, dim))
        return Dataset(features=features, outputs=labels, column_names=names, n_classes=n_classes)

    source = draw(config.n_source, source_priors, "source")
    target = draw(config.n_target, target_priors, "target")

    def ratio(data: Dataset) -> np.ndarray:
        labels = data.require_outputs().astype(int)
        with np.errstate(divide="ignore", invalid="ignore"):
            return _checked_ratio(target_priors[labels] / source_priors[labels])

    def posterior(data: Union[Dataset, np.ndarray], population: str = "target") -> np.ndarray:
        features = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
        priors = target_priors if population == "target" else source_priors
        log_lik = np.column_stack(
            [
                stats.multivariate_normal.logpdf(features, mean=means[k], cov=p["scale"] ** 2)
                for k in range(n_classes)
            ]
        ).reshape(features.shape[0], n_classes)
        with np.errstate(divide="ignore"):
            logits = log_lik + np.log(priors)
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    truth = GroundTruth(
        kind=config.kind,
        ratio=ratio,
        source_weights=ratio(source),
        source_priors=source_priors,
        target_priors=target_priors,
        posterior=posterior,
        params=config.params,
    )
    return source, target, truth


# --- Age-stratified sampling ---


def age_strata(ages: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Young and old strata of a pool: the lowest and highest 20% of rows by age.

    Ties are broken by row order (stable sort).
    """
    order = np.argsort(ages, kind="stable")
    n = ages.shape[0]
    n_young = int(np.floor(YOUNG_QUANTILE * n + 1e-9))
    n_old = int(np.floor((1.0 - OLD_QUANTILE) * n + 1e-9))
    return np.sort(order[:n_young]), np.sort(order[n - n_old:])


def _stratified_indices(
    young: np.ndarray,
    old: np.ndarray,
    old_fraction: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n_old = int(round(old_fraction * n))
    n_young = n - n_old
    if n_young > young.size or n_old > old.size:
        raise ScenarioError(
            f"Strata too small: requested {n_young} young / {n_old} old rows, "
            f"available {young.size} / {old.size}."
        )
    chosen = np.concatenate(
        [rng.choice(young, size=n_young, replace=False), rng.choice(old, size=n_old, replace=False)]
    )
    return np.sort(chosen)


def stratified_age_resample(
    pool: Dataset,
    old_fraction: float,
    n: int,
    seed: Union[RngSeed, int],
    covariate: str = AGE,
) -> Dataset:
    """
    Draws n rows without replacement: round(old_fraction * n) from the old
    stratum and the rest from the young stratum.

    Raises:
        ScenarioError: If a stratum cannot supply its share.
    """
    _check_probability(old_fraction, "old_fraction")
    if int(n) != n or n < 1:
        raise ScenarioError(f"n must be a positive count, got {n}.")
    young, old = age_strata(pool.covariate(covariate))
    rng = as_seed(seed).generator()
    return pool.take(_stratified_indices(young, old, old_fraction, int(n), rng))


def gen_age_stratified_replica(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """
    Synthetic replica of a young/old cohort study.

    A pool of `pool_size` people has age uniform on [age_min, age_max] and
    `n_features` Gaussian features whose means load on age. The label logit
    mixes a feature effect, an age-by-feature interaction (so P(Y | X, age)
    changes with age) and a direct effect of `age_effect` logits per unit of
    an age index running from -1 at `age_min` to 1 at `age_max`. The young
    sample takes a `young_old_fraction` share from the old stratum, the old
    sample a `old_old_fraction` share; the two samples share no rows.
    """
    if config.kind != "age_replica":
        raise ScenarioError(f"gen_age_stratified_replica needs an age_replica config, got '{config.kind}'.")
    p = config.params
    n_pool, d = int(p["pool_size"]), int(p["n_features"])
    structure = config.seed.substream("structure").generator()
    loadings = structure.normal(0.0, 0.7, d)
    effects = structure.normal(0.0, 1.0, d) / np.sqrt(d)
    interactions = structure.normal(0.0, 1.0, d) / np.sqrt(d)
    age_effect = float(p["age_effect"])

    rng = config.seed.substream("pool").generator()
    ages = rng.uniform(p["age_min"], p["age_max"], n_pool)
    s = 2.0 * (ages - p["age_min"]) / (p["age_max"] - p["age_min"]) - 1.0
    features = s[:, None] * loadings + rng.standard_normal((n_pool, d))

    def logits(x: np.ndarray, age_index: np.ndarray) -> np.ndarray:
        return 2.0 * (x @ effects + age_index * (x @ interactions)) + age_effect * age_index

    labels = (rng.random(n_pool) < expit(logits(features, s))).astype(int)
    pool = Dataset(
        features=features,
        outputs=labels,
        covariates={AGE: ages},
        column_names=tuple(f"f{j + 1:02d}" for j in range(d)),
        n_classes=2,
    )

    young_rows, old_rows = age_strata(ages)
    young_cut, old_cut = ages[young_rows].max(), ages[old_rows].min()
    sampler = config.seed.substream("resample").generator()
    young_idx = _stratified_indices(
        young_rows, old_rows, p["young_old_fraction"], config.n_source, sampler
    )
    remaining_young = np.setdiff1d(young_rows, young_idx)
    remaining_old = np.setdiff1d(old_rows, young_idx)
    old_idx = _stratified_indices(
        remaining_young, remaining_old, p["old_old_fraction"], config.n_target, sampler
    )
    young_sample, old_sample = pool.take(young_idx), pool.take(old_idx)

    f_source, f_target = p["young_old_fraction"], p["old_old_fraction"]

    def ratio(data: Dataset) -> np.ndarray:
        age = data.covariate(AGE)
        in_young, in_old = age <= young_cut, age >= old_cut
        if np.any(~(in_young | in_old)):
            raise PositivityError("Rows outside both age strata have zero density.")
        young_ratio = (1.0 - f_target) / (1.0 - f_source) if f_source < 1 else np.inf
        old_ratio = f_target / f_source if f_source > 0 else np.inf
        return _checked_ratio(np.where(in_old, old_ratio, young_ratio).astype(float))

    def posterior(data: Dataset, population: str = "young") -> np.ndarray:
        age = data.covariate(AGE)
        index = 2.0 * (age - p["age_min"]) / (p["age_max"] - p["age_min"]) - 1.0
        p1 = expit(logits(data.features, index))
        return np.column_stack([1.0 - p1, p1])

    truth = GroundTruth(
        kind=config.kind,
        ratio=ratio,
        source_weights=ratio(young_sample),
        posterior=posterior,
        params=config.params,
    )
    return young_sample, old_sample, truth


GENERATORS: Dict[str, Callable[[ScenarioConfig], Tuple[Dataset, Dataset, GroundTruth]]] = {
    "age_shift": gen_age_shift,
    "selection": gen_selection_scenario,
    "covariate_shift": gen_covariate_shift,
    "label_shift": gen_label_shift,
    "age_replica": gen_age_stratified_replica,
}


def generate(config: ScenarioConfig) -> Tuple[Dataset, Dataset, GroundTruth]:
    """Dispatches to the generator for `config.kind`."""
    return GENERATORS[config.kind](config)
