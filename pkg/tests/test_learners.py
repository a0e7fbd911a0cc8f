import numpy as np
import pytest

from shiftlab.core.dataset import Dataset
from shiftlab.learners import (
    CalibrationError,
    LearnerError,
    ModelSpec,
    calibrate_platt,
    decision_function,
    fit,
    linear_coefficients,
    load_model,
    predict,
    predict_proba,
    save_model,
)
from shiftlab.learners.calibration import apply_platt, fit_platt
from shiftlab.learners.base import PlattMap


def test_ridge_recovers_coefficients_in_original_units(rng):
    features = rng.normal(3.0, 2.0, size=(100, 2))
    outputs = 1.0 + 2.0 * features[:, 0] - 3.0 * features[:, 1]
    model = fit(ModelSpec.from_name("ridge"), Dataset(features=features, outputs=outputs))
    intercept, coefficients = linear_coefficients(model)
    assert intercept == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(coefficients, [2.0, -3.0], atol=1e-8)


@pytest.mark.parametrize("learner", ["ridge", "poly4", "rbf"])
def test_weight_scaling_leaves_regressors_unchanged(regression_data, rng, learner):
    spec = ModelSpec.from_name(learner)
    weights = rng.uniform(0.2, 3.0, regression_data.n_rows)
    a = predict(fit(spec, regression_data, weights), regression_data)
    b = predict(fit(spec, regression_data, 250.0 * weights), regression_data)
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-8)


def test_weight_scaling_leaves_logistic_unchanged(binary_data, rng):
    spec = ModelSpec.from_name("linear")
    weights = rng.uniform(0.2, 3.0, binary_data.n_rows)
    a = predict_proba(fit(spec, binary_data, weights), binary_data)
    b = predict_proba(fit(spec, binary_data, 0.01 * weights), binary_data)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_integer_weights_equal_replicated_rows(regression_data, rng):
    counts = rng.integers(1, 4, regression_data.n_rows)
    replicated = regression_data.take(np.repeat(np.arange(regression_data.n_rows), counts))
    spec = ModelSpec.from_name("ridge")
    weighted = linear_coefficients(fit(spec, regression_data, counts.astype(float)))
    copied = linear_coefficients(fit(spec, replicated))
    assert weighted[0] == pytest.approx(copied[0], abs=1e-8)
    np.testing.assert_allclose(weighted[1], copied[1], atol=1e-8)


def test_integer_weights_equal_replicated_rows_for_logistic(binary_data, rng):
    counts = rng.integers(1, 4, binary_data.n_rows)
    replicated = binary_data.take(np.repeat(np.arange(binary_data.n_rows), counts))
    spec = ModelSpec.from_name("linear")
    weighted = predict_proba(fit(spec, binary_data, counts.astype(float)), binary_data)
    copied = predict_proba(fit(spec, replicated), binary_data)
    np.testing.assert_allclose(weighted, copied, atol=1e-6)


def test_zero_weights_drop_rows(regression_data):
    weights = np.ones(regression_data.n_rows)
    weights[::3] = 0.0
    spec = ModelSpec.from_name("ridge")
    masked = linear_coefficients(fit(spec, regression_data, weights))
    subset = linear_coefficients(fit(spec, regression_data.take(np.flatnonzero(weights))))
    np.testing.assert_allclose(masked[1], subset[1], atol=1e-8)


def test_dataset_weight_column_is_used_by_default(regression_data, rng):
    weights = rng.uniform(0.5, 2.0, regression_data.n_rows)
    spec = ModelSpec.from_name("ridge")
    explicit = linear_coefficients(fit(spec, regression_data, weights))
    implicit = linear_coefficients(fit(spec, regression_data.with_weights(weights)))
    np.testing.assert_allclose(explicit[1], implicit[1])


def test_polynomial_fits_a_cubic(rng):
    x = rng.uniform(-2.0, 2.0, 150)
    data = Dataset(features=x, outputs=x**3 - x)
    model = fit(ModelSpec.from_name("poly4"), data)
    np.testing.assert_allclose(predict(model, data), x**3 - x, atol=1e-6)


def test_rbf_regression_tracks_a_smooth_function(rng):
    x = rng.uniform(-3.0, 3.0, 200)
    data = Dataset(features=x, outputs=np.sin(x))
    model = fit(ModelSpec.from_name("rbf"), data)
    grid = np.linspace(-2.5, 2.5, 11)
    assert np.max(np.abs(predict(model, grid.reshape(-1, 1)) - np.sin(grid))) < 0.2


def test_logistic_probabilities_are_distributions(binary_data):
    probs = predict_proba(fit(ModelSpec.from_name("linear"), binary_data), binary_data)
    assert probs.shape == (binary_data.n_rows, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert np.all((probs >= 0) & (probs <= 1))


def test_logistic_separates_the_classes(binary_data):
    model = fit(ModelSpec.from_name("linear"), binary_data)
    assert np.mean(predict(model, binary_data) == binary_data.outputs) > 0.75
    assert model.solver_info["solver"] == "trust-exact"


def test_multiclass_logistic(rng):
    labels = rng.integers(0, 3, 300)
    centres = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    data = Dataset(
        features=centres[labels] + rng.normal(size=(300, 2)), outputs=labels, n_classes=3
    )
    model = fit(ModelSpec.from_name("linear"), data)
    probs = predict_proba(model, data)
    assert probs.shape == (300, 3)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert decision_function(model, data).shape == (300, 3)
    assert np.mean(predict(model, data) == labels) > 0.8


@pytest.mark.parametrize("learner", ["rbf", "boosting"])
def test_flexible_classifiers(binary_data, learner):
    model = fit(ModelSpec.from_name(learner), binary_data)
    probs = predict_proba(model, binary_data)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert np.mean(predict(model, binary_data) == binary_data.outputs) > 0.75


def test_boosting_training_risk_never_increases(binary_data):
    model = fit(ModelSpec.from_name("boosting"), binary_data)
    path = model.params["train_risk"]
    assert np.all(np.diff(path) <= 1e-12)


def test_boosting_regression_needs_squared_loss(regression_data):
    with pytest.raises(LearnerError, match="squared loss"):
        fit(ModelSpec.from_name("boosting"), regression_data)
    model = fit(ModelSpec(family="boosted_stumps", loss="squared", rounds=30), regression_data)
    assert model.solver_info["solver"] == "boosting"


def test_single_class_rejected(binary_data):
    only_zeros = binary_data.take(np.flatnonzero(binary_data.outputs == 0))
    with pytest.raises(LearnerError, match="single class"):
        fit(ModelSpec.from_name("linear"), only_zeros)


def test_single_class_after_zero_weights_rejected(binary_data):
    weights = (binary_data.outputs == 1).astype(float)
    with pytest.raises(LearnerError, match="single class"):
        fit(ModelSpec.from_name("linear"), binary_data, weights)


@pytest.mark.parametrize(
    "weights",
    [np.ones(5), -np.ones(200), np.zeros(200), np.full(200, np.inf)],
)
def test_invalid_weights_rejected(regression_data, weights):
    with pytest.raises(LearnerError):
        fit(ModelSpec.from_name("ridge"), regression_data, weights)


def test_prediction_input_is_validated(regression_data):
    model = fit(ModelSpec.from_name("ridge"), regression_data)
    with pytest.raises(LearnerError, match="feature columns"):
        predict(model, np.zeros((3, 5)))
    with pytest.raises(LearnerError, match="non-finite"):
        predict(model, np.array([[np.nan, 0.0]]))
    with pytest.raises(LearnerError, match="classifier"):
        predict_proba(model, regression_data)


def test_collinear_unregularized_fit_is_singular(rng):
    x = rng.normal(size=50)
    data = Dataset(features=np.column_stack([x, 2.0 * x]), outputs=x)
    with pytest.raises(LearnerError, match="Singular"):
        fit(ModelSpec.from_name("ridge"), data)


def test_model_names():
    assert ModelSpec.from_name("poly:3").degree == 3
    assert ModelSpec.from_name("linear").family == "logistic"
    with pytest.raises(LearnerError):
        ModelSpec.from_name("forest")
    with pytest.raises(LearnerError):
        ModelSpec.from_name("poly:x")


def test_saved_model_predicts_identically(tmp_path, binary_data):
    model = fit(ModelSpec.from_name("boosting"), binary_data)
    path = tmp_path / "model.json"
    save_model(model, path)
    restored = load_model(path)
    np.testing.assert_array_equal(
        predict_proba(restored, binary_data), predict_proba(model, binary_data)
    )


# --- Platt calibration ---


def test_platt_recovers_a_known_sigmoid(rng):
    scores = rng.normal(0.0, 2.0, 20000)
    labels = (rng.random(20000) < 1.0 / (1.0 + np.exp(-(1.5 * scores - 0.5)))).astype(float)
    calibration = fit_platt(scores, labels)
    assert calibration.slope == pytest.approx(1.5, abs=0.1)
    assert calibration.intercept == pytest.approx(-0.5, abs=0.1)


def test_platt_map_is_monotone():
    scores = np.linspace(-5.0, 5.0, 50)
    p1 = apply_platt(PlattMap(slope=0.8, intercept=0.2), scores)[:, 1]
    assert np.all(np.diff(p1) > 0)


def test_platt_needs_both_classes():
    with pytest.raises(CalibrationError):
        fit_platt(np.array([0.1, 0.2, 0.3]), np.array([1.0, 1.0, 1.0]))


def test_calibrated_model_uses_the_map(binary_data):
    model = fit(ModelSpec.from_name("rbf"), binary_data)
    calibrated = calibrate_platt(model, binary_data)
    assert calibrated.calibration is not None
    expected = apply_platt(calibrated.calibration, decision_function(model, binary_data))
    np.testing.assert_allclose(predict_proba(calibrated, binary_data), expected)


def test_calibration_needs_a_binary_model(rng):
    labels = np.arange(30) % 3
    data = Dataset(features=rng.normal(size=(30, 1)) + labels[:, None], outputs=labels, n_classes=3)
    model = fit(ModelSpec.from_name("linear"), data)
    with pytest.raises(CalibrationError):
        calibrate_platt(model, data)


@pytest.mark.parametrize(
    "family, loss",
    [
        ("linear_ridge", "squared"),
        ("logistic", "logistic"),
        ("polynomial", "squared"),
        ("rbf_kernel", "squared"),
        ("boosted_stumps", "logistic"),
    ],
)
def test_family_default_loss(family, loss):
    assert ModelSpec(family=family).loss == loss
