"""
Importance-weight containers and the weight operations that need no estimator:
exact weights from ground truth, inverse-probability weights, flattening,
resampling, overlap diagnostics and CSV import/export.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..constants import MEAN_ONE_TOLERANCE, WEIGHT_COLUMN, WEIGHT_FLOOR
from ..core.dataset import Dataset, DatasetError
from ..core.errors import ShiftLabError
from ..core.rng import RngSeed, as_seed
from ..core.scenarios import GroundTruth, PositivityError

logger = logging.getLogger(__name__)

NORMALIZE_NONE = "none"
NORMALIZE_MEAN_ONE = "mean-one"
NORMALIZATION_MODES = (NORMALIZE_NONE, NORMALIZE_MEAN_ONE)


class WeightError(ShiftLabError):
    """Raised for invalid weights, flattening exponents or misaligned inputs."""

    pass


class ConvergenceError(WeightError):
    """Raised when an iterative weight estimator hits its iteration cap."""

    pass


@dataclass(frozen=True, eq=False)
class WeightVector:
    """
    Per-example importance weights aligned to a source Dataset.

    Attributes:
        values: Strictly positive finite weights.
        method: Provenance tag ('truth', 'ipw', 'discriminative', 'kmm', ...).
        normalization: 'none' or 'mean-one'.
        clipped: How many entries were raised to the positivity floor.
    """

    values: np.ndarray
    method: str
    normalization: str = NORMALIZE_MEAN_ONE
    clipped: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if values.size == 0:
            raise WeightError("Weight vector is empty.")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise WeightError("Weights must be finite and strictly positive.")
        if self.normalization not in NORMALIZATION_MODES:
            raise WeightError(f"Unknown normalization '{self.normalization}'.")
        if self.normalization == NORMALIZE_MEAN_ONE:
            if abs(values.mean() - 1.0) > MEAN_ONE_TOLERANCE:
                raise WeightError(f"Mean-one weights have mean {values.mean()!r}.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def build(
        cls,
        raw: np.ndarray,
        method: str,
        normalization: str = NORMALIZE_MEAN_ONE,
        clipped: int = 0,
    ) -> "WeightVector":
        """
        Turns nonnegative raw values into a valid WeightVector.

        Entries below WEIGHT_FLOOR times the mean are raised to that floor and
        counted in `clipped`; the result is then normalized per `normalization`.
        """
        raw = np.asarray(raw, dtype=float).reshape(-1)
        if raw.size == 0 or not np.all(np.isfinite(raw)) or np.any(raw < 0):
            raise WeightError("Raw weights must be finite and nonnegative.")
        if not np.any(raw > 0):
            raise WeightError("Raw weights are all zero.")
        floor = WEIGHT_FLOOR * raw.mean()
        low = raw < floor
        if low.any():
            logger.info("Raised %d weight(s) to the positivity floor %.3g", low.sum(), floor)
        values = np.where(low, floor, raw)
        return cls(
            values=_normalize(values, normalization),
            method=method,
            normalization=normalization,
            clipped=clipped + int(low.sum()),
        )

    @classmethod
    def uniform(cls, n: int, method: str = "uniform") -> "WeightVector":
        return cls(values=np.ones(n), method=method)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def effective_sample_size(self) -> float:
        """(sum w)^2 / sum w^2, in (0, n]."""
        return float(self.values.sum() ** 2 / np.sum(self.values**2))

    def normalized(self, normalization: str = NORMALIZE_MEAN_ONE) -> "WeightVector":
        return WeightVector(
            values=_normalize(self.values, normalization),
            method=self.method,
            normalization=normalization,
            clipped=self.clipped,
        )


def _normalize(values: np.ndarray, normalization: str) -> np.ndarray:
    if normalization == NORMALIZE_MEAN_ONE:
        return values / values.mean()
    return values


def check_alignment(data: Dataset, weights: WeightVector):
    if weights.n != data.n_rows:
        raise WeightError(f"Got {weights.n} weights for {data.n_rows} rows.")


# --- Exact and inverse-probability weights ---


def true_weights(truth: GroundTruth, data: Dataset) -> WeightVector:
    """
    Exact density ratio p_target / p_source at every row of `data`.

    Raises:
        PositivityError: If a row has zero source density.
    """
    try:
        ratio = truth.ratio(data)
    except DatasetError as e:
        raise WeightError(f"Ground truth cannot be evaluated on this dataset: {e}") from None
    if not np.any(ratio > 0):
        raise PositivityError("Target density is zero at every row.")
    return WeightVector.build(ratio, method="truth", normalization=NORMALIZE_NONE)


def ipw_from_selection(
    selection_probs: np.ndarray, overall_rate: float
) -> WeightVector:
    """
    Inverse-probability weights overall_rate / P(S=1 | row).

    Raises:
        WeightError: If a probability is not in (0, 1] or the rate is not in (0, 1].
    """
    probs = np.asarray(selection_probs, dtype=float).reshape(-1)
    if probs.size == 0:
        raise WeightError("No selection probabilities given.")
    if np.any(~np.isfinite(probs)) or np.any(probs <= 0) or np.any(probs > 1):
        bad = int(np.argmax(~((probs > 0) & (probs <= 1))))
        raise WeightError(
            f"Selection probability at row {bad} is {probs[bad]!r}; every individual "
            "needs a nonzero probability of being selected."
        )
    if not 0 < overall_rate <= 1:
        raise WeightError(f"Overall selection rate must lie in (0, 1], got {overall_rate}.")
    return WeightVector(values=overall_rate / probs, method="ipw", normalization=NORMALIZE_NONE)


# --- Regularization and resampling ---


def flatten_weights(
    weights: WeightVector, lam: float, normalization: Optional[str] = None
) -> WeightVector:
    """
    Raises every weight to the power `lam` in [0, 1], then renormalizes.

    lam = 1 leaves the weights unchanged and lam = 0 makes them uniform;
    smaller exponents never decrease the effective sample size.
    """
    if not 0.0 <= lam <= 1.0:
        raise WeightError(f"Flattening exponent must lie in [0, 1], got {lam}.")
    mode = normalization or weights.normalization
    if lam == 1.0:
        return weights.normalized(mode) if mode != weights.normalization else weights
    return WeightVector(
        values=_normalize(weights.values**lam, mode),
        method=weights.method,
        normalization=mode,
        clipped=weights.clipped,
    )


def resample_by_weights(
    data: Dataset, weights: WeightVector, n_out: int, seed: Union[RngSeed, int]
) -> Dataset:
    """Draws `n_out` rows with replacement, with probabilities proportional to the weights."""
    check_alignment(data, weights)
    if int(n_out) != n_out or n_out < 1:
        raise WeightError(f"n_out must be a positive count, got {n_out}.")
    probs = weights.values / weights.values.sum()
    rows = as_seed(seed).generator().choice(data.n_rows, size=int(n_out), replace=True, p=probs)
    return data.take(rows).with_weights(None)


# --- Diagnostics ---


def overlap_diagnostics(weights: WeightVector) -> Dict[str, Any]:
    """Summary statistics that reveal poor overlap: ESS, largest share, clip count."""
    values = weights.values
    ess = weights.effective_sample_size
    return {
        "method": weights.method,
        "n": weights.n,
        "ess": ess,
        "ess_fraction": ess / weights.n,
        "max_weight_share": float(values.max() / values.sum()),
        "min_weight": float(values.min()),
        "max_weight": float(values.max()),
        "weight_variance": float(values.var()),
        "clipped": weights.clipped,
    }


# --- Ratio models ---


@dataclass(frozen=True)
class RatioView:
    """
    Which columns a density ratio is defined on.

    `use_features` and `use_outputs` select X and Y; `covariates` appends
    named covariate columns (for example age, or an auxiliary Z).
    """

    use_features: bool = True
    use_outputs: bool = False
    covariates: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not (self.use_features or self.use_outputs or self.covariates):
            raise WeightError("Ratio view selects no columns.")

    @classmethod
    def parse(cls, text: str) -> "RatioView":
        """Parses '+'-joined parts: 'x', 'y', 'xy', 'covariate:<name>'."""
        use_x = use_y = False
        covariates = []
        for part in filter(None, (p.strip() for p in text.split("+"))):
            if part == "x":
                use_x = True
            elif part == "y":
                use_y = True
            elif part == "xy":
                use_x = use_y = True
            elif part.startswith("covariate:") and len(part) > len("covariate:"):
                covariates.append(part[len("covariate:"):])
            else:
                raise WeightError(f"Unknown ratio view part '{part}'.")
        return cls(use_features=use_x, use_outputs=use_y, covariates=tuple(covariates))

    def to_text(self) -> str:
        parts = ["x"] if self.use_features else []
        if self.use_outputs:
            parts.append("y")
        parts.extend(f"covariate:{name}" for name in self.covariates)
        return "+".join(parts)

    def matrix(self, data: Dataset) -> np.ndarray:
        """Stacks the selected columns of `data` into a real matrix."""
        blocks = []
        if self.use_features:
            blocks.append(data.features)
        if self.use_outputs:
            if not data.has_outputs:
                raise WeightError("Ratio view uses outputs but the dataset has none.")
            if data.is_classification:
                codes = np.zeros((data.n_rows, data.n_classes - 1))
                labels = data.outputs.astype(int)
                rows = np.flatnonzero(labels > 0)
                codes[rows, labels[rows] - 1] = 1.0
                blocks.append(codes)
            else:
                blocks.append(data.outputs.reshape(-1, 1))
        try:
            blocks.extend(data.covariate(name).reshape(-1, 1) for name in self.covariates)
        except DatasetError as e:
            raise WeightError(str(e)) from None
        return np.hstack(blocks)


@dataclass(frozen=True, eq=False)
class RatioModel:
    """A fitted density-ratio model evaluable at arbitrary rows of its view."""

    method: str
    view: RatioView
    components: Dict[str, Any] = field(default_factory=dict)
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def evaluate_matrix(self, points: np.ndarray) -> np.ndarray:
        if self.evaluator is None:
            raise WeightError(f"Ratio model '{self.method}' has no evaluator.")
        return self.evaluator(np.asarray(points, dtype=float))

    def evaluate(self, data: Dataset) -> np.ndarray:
        """Estimated p_target / p_source at the rows of `data`."""
        return self.evaluate_matrix(self.view.matrix(data))


# --- CSV import / export ---


def write_weights_csv(weights: WeightVector, path: Union[str, Path]):
    """Writes a single-column CSV aligned to the source row order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({WEIGHT_COLUMN: weights.values}).to_csv(
        path, index=False, lineterminator="\n", encoding="utf-8"
    )


def load_weights_csv(
    path: Union[str, Path], n_rows: Optional[int] = None, method: str = "file"
) -> WeightVector:
    """
    Reads a weights CSV written by `write_weights_csv`.

    Raises:
        WeightError: Missing file or column, non-numeric cells, a row-count
            mismatch, or values that are not strictly positive.
    """
    path = Path(path)
    if not path.is_file():
        raise WeightError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise WeightError(f"Could not parse {path}: {e}") from None
    if WEIGHT_COLUMN not in frame.columns:
        raise WeightError(f"{path} has no '{WEIGHT_COLUMN}' column.")
    values = pd.to_numeric(frame[WEIGHT_COLUMN], errors="coerce").to_numpy(dtype=float)
    if np.isnan(values).any():
        row = int(np.argmax(np.isnan(values)))
        raise WeightError(f"Non-numeric weight at data row {row + 1} of {path}.")
    if n_rows is not None and values.shape[0] != n_rows:
        raise WeightError(f"{path} has {values.shape[0]} weights, expected {n_rows}.")
    normalization = (
        NORMALIZE_MEAN_ONE
        if values.size and abs(values.mean() - 1.0) <= MEAN_ONE_TOLERANCE
        else NORMALIZE_NONE
    )
    return WeightVector(values=values, method=method, normalization=normalization)
