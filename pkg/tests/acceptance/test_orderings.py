"""
Monte-Carlo orderings on the synthetic scenarios. Slow: run with `pytest -m slow`.
"""

import numpy as np
import pytest
from scipy.stats import binomtest, spearmanr

from shiftlab.core.corrections import PriorPair, label_shift_correct
from shiftlab.core.dataset import Dataset
from shiftlab.core.evaluation import cross_validate, importance_weighted_cv, risk, shift_detector
from shiftlab.core.experiment import run_experiment
from shiftlab.core.scenarios import ScenarioConfig, generate
from shiftlab.learners import ModelSpec, fit
from shiftlab.utils.config_manager import ConfigManager
from shiftlab.weights import (
    RatioView,
    estimate_weights_discriminative,
    estimate_weights_kmm,
    estimate_weights_ulsif,
    kmm_objective,
)

pytestmark = pytest.mark.slow

# Accuracy margins, fixed before any run.
REGRESS_OUT_GAP = 0.02
ACCURACY_TOLERANCE = 0.01
# Mean |w - 1| ceilings on identical samples, per estimator.
NO_SHIFT_WEIGHT_BOUNDS = {"discriminative": 0.25, "ulsif": 0.5, "kmm": 1.0}
SIGN_TEST_LEVEL = 0.05


def _strategy_means(preset, **overrides):
    config = ConfigManager(preset=preset).build(overrides)
    report = run_experiment(config, n_jobs=-1)
    return {
        (r.learner, r.strategy, r.train_pop, r.test_pop): r.value
        for r in report.select(scope="strategy")
    }


def test_covariate_shift_story():
    means = _strategy_means("fig4", repetitions=10)
    linear = means[("ridge", "baseline", "source", "target")]
    assert means[("poly4", "baseline", "source", "target")] < linear
    assert means[("ridge", "reweighting", "source", "target")] < linear


def test_prior_correction_lowers_target_log_loss():
    means = _strategy_means("fig5", repetitions=10)
    assert (
        means[("linear", "prior-correction", "source", "target")]
        < means[("linear", "baseline", "source", "target")]
    )


@pytest.fixture(scope="module")
def age_shift_means():
    return _strategy_means("fig1")


@pytest.mark.parametrize("learner", ["linear", "rbf"])
@pytest.mark.parametrize("test_pop", ["young", "old"])
def test_regressing_out_age_costs_accuracy(age_shift_means, learner, test_pop):
    assert (
        age_shift_means[(learner, "regress-out", "young", test_pop)]
        < age_shift_means[(learner, "baseline", "young", test_pop)] - REGRESS_OUT_GAP
    )


def test_reweighting_helps_the_linear_learner_on_the_old(age_shift_means):
    assert (
        age_shift_means[("linear", "reweighting", "young", "old")]
        > age_shift_means[("linear", "baseline", "young", "old")]
    )


def test_flexible_learner_is_at_least_as_accurate_on_the_old(age_shift_means):
    assert (
        age_shift_means[("rbf", "baseline", "young", "old")]
        >= age_shift_means[("linear", "baseline", "young", "old")] - ACCURACY_TOLERANCE
    )


def test_reweighting_does_not_help_the_flexible_learner(age_shift_means):
    assert (
        age_shift_means[("rbf", "reweighting", "young", "old")]
        <= age_shift_means[("rbf", "baseline", "young", "old")] + ACCURACY_TOLERANCE
    )


@pytest.fixture(scope="module")
def replica_means():
    return _strategy_means("appB-replica")


@pytest.mark.parametrize("learner", ["linear", "boosting"])
@pytest.mark.parametrize("test_pop, other", [("young", "old"), ("old", "young")])
def test_training_on_the_matching_population_wins(replica_means, learner, test_pop, other):
    assert (
        replica_means[(learner, "baseline", test_pop, test_pop)]
        > replica_means[(learner, "baseline", other, test_pop)]
    )


@pytest.mark.parametrize("learner", ["linear", "boosting"])
@pytest.mark.parametrize("train_pop", ["young", "old"])
@pytest.mark.parametrize("test_pop", ["young", "old"])
def test_regressing_out_age_is_always_worse(replica_means, learner, train_pop, test_pop):
    assert (
        replica_means[(learner, "regress-out", train_pop, test_pop)]
        < replica_means[(learner, "baseline", train_pop, test_pop)]
    )


def test_label_shift_correction_is_exact_on_the_gaussian_toy():
    source, _, truth = generate(ScenarioConfig(kind="label_shift", n_source=2000, n_target=10, seed=1))
    pair = PriorPair(source_priors=truth.source_priors, target_priors=truth.target_priors)
    corrected = label_shift_correct(truth.posterior(source, "source"), pair)
    assert np.max(np.abs(corrected - truth.posterior(source, "target"))) < 1e-12


def test_importance_weighted_cv_tracks_target_risk():
    spec = ModelSpec.from_name("ridge")
    wins = 0
    seeds = range(50)
    for seed in seeds:
        source, target, truth = generate(
            ScenarioConfig(kind="covariate_shift", n_source=500, n_target=5000, seed=seed)
        )
        true_risk = risk(fit(spec, source), target)
        plain = cross_validate(spec, source, 5, seed).mean()
        weighted = importance_weighted_cv(spec, source, truth.source_weights, 5, seed).mean()
        wins += abs(weighted - true_risk) < abs(plain - true_risk)
    assert wins >= 0.8 * len(seeds)


def test_detector_on_identical_distributions():
    rng = np.random.default_rng(0)
    source = Dataset(features=rng.normal(size=(2000, 3)))
    target = Dataset(features=rng.normal(size=(2000, 3)))
    auc, _ = shift_detector(source, target, seed=0)
    assert 0.45 <= auc <= 0.55


def test_discriminative_log_weights_match_the_closed_form():
    rng = np.random.default_rng(1)
    shift = np.array([0.8, -0.4])
    source = Dataset(features=rng.normal(size=(5000, 2)))
    target = Dataset(features=rng.normal(size=(5000, 2)) + shift)
    weights, _, _ = estimate_weights_discriminative(source, target, seed=2)
    # Equal covariances: log ratio = x . shift - |shift|^2 / 2.
    exact = source.features @ shift - shift @ shift / 2.0
    estimated = np.log(weights.values)
    r_squared = np.corrcoef(estimated, exact)[0, 1] ** 2
    assert r_squared > 0.9


def test_ulsif_ranks_like_the_true_ratio():
    rng = np.random.default_rng(3)
    source_x = rng.normal(0.0, 1.0, (500, 1))
    target_x = rng.normal(0.5, 1.0, (500, 1))
    weights, _ = estimate_weights_ulsif(source_x, target_x, ridge=0.01, seed=0)
    exact = np.exp(0.5 * source_x[:, 0] - 0.125)
    assert spearmanr(weights.values, exact).correlation > 0.9


def test_kmm_matches_brute_force_on_a_tiny_instance():
    from sklearn.metrics.pairwise import rbf_kernel

    source_x = np.array([[0.0], [1.0]])
    target_x = np.array([[0.8], [1.1], [1.4]])
    bandwidth, bound, eps = 1.0, 3.0, 0.5
    weights = estimate_weights_kmm(
        source_x, target_x, bandwidth=bandwidth, upper_bound=bound, eps=eps, normalization="none"
    )
    gamma = 1.0 / (2.0 * bandwidth**2)
    gram = rbf_kernel(source_x, source_x, gamma=gamma)
    cross_mean = rbf_kernel(source_x, target_x, gamma=gamma).mean(axis=1)
    target_mean = float(rbf_kernel(target_x, target_x, gamma=gamma).mean())
    grid = np.linspace(0.0, bound, 301)
    best = np.inf
    for a in grid:
        for b in grid:
            if abs((a + b) / 2.0 - 1.0) <= eps:
                best = min(best, kmm_objective(np.array([a, b]), gram, cross_mean, target_mean))
    found = kmm_objective(weights.values, gram, cross_mean, target_mean)
    assert found <= best + 1e-3


def test_kmm_ranks_like_the_true_ratio():
    rng = np.random.default_rng(3)
    source_x = rng.normal(0.0, 1.0, (500, 1))
    target_x = rng.normal(0.5, 1.0, (500, 1))
    weights = estimate_weights_kmm(source_x, target_x, seed=0)
    exact = np.exp(0.5 * source_x[:, 0] - 0.125)
    assert spearmanr(weights.values, exact).correlation > 0.9


def test_estimators_stay_near_one_without_shift():
    rng = np.random.default_rng(4)
    source_x = rng.normal(size=(500, 2))
    target_x = rng.normal(size=(500, 2))
    weights = {
        "discriminative": estimate_weights_discriminative(
            Dataset(features=source_x), Dataset(features=target_x), seed=0
        )[0],
        "ulsif": estimate_weights_ulsif(source_x, target_x, seed=0)[0],
        "kmm": estimate_weights_kmm(source_x, target_x, seed=0),
    }
    for method, bound in NO_SHIFT_WEIGHT_BOUNDS.items():
        assert np.mean(np.abs(weights[method].values - 1.0)) < bound, method


def test_selection_only_covariate_adds_variance_not_accuracy():
    # Z drives selection but is independent of (X, Y): weighting on X alone is enough.
    spec = ModelSpec.from_name("ridge")
    views = {"x": RatioView.parse("x"), "x+z": RatioView.parse("x+covariate:z")}
    seeds = range(30)
    variance_up = error_down = 0
    for seed in seeds:
        config = ScenarioConfig(
            kind="selection", n_target=2000, seed=seed, params={"subkind": "b", "z_strength": 1.5}
        )
        source, target, _ = generate(config)
        model = fit(spec, source)
        target_risk = risk(model, target, "mse")
        variance, error = {}, {}
        for name, view in views.items():
            weights, _, _ = estimate_weights_discriminative(source, target, view=view, seed=seed)
            variance[name] = np.var(weights.values)
            error[name] = abs(risk(model, source, "mse", weights.values) - target_risk)
        variance_up += variance["x+z"] > variance["x"]
        error_down += error["x+z"] < error["x"]
    n = len(seeds)
    assert binomtest(variance_up, n, alternative="greater").pvalue < SIGN_TEST_LEVEL
    assert binomtest(error_down, n, alternative="greater").pvalue >= SIGN_TEST_LEVEL
