"""
Weighted empirical-risk-minimization learners.

`fit` standardizes features with the (weighted) training statistics, then hands
the problem to the family implementation registered in `LEARNERS`. Every
prediction entry point validates its input before touching the parameters.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..core.dataset import Dataset
from .base import (
    LOSS_LOGISTIC,
    LOSS_SQUARED,
    BaseLearner,
    CalibrationError,
    LearnerError,
    Model,
    ModelSpec,
    PlattMap,
    Standardizer,
)
from .boosting import BoostedTreesLearner
from .calibration import apply_platt, fit_platt
from .kernel import RbfKernelLearner
from .linear import LinearLearner, linear_coefficients

logger = logging.getLogger(__name__)

_linear = LinearLearner()

# Family name -> implementation. Polynomial(1) and linear ridge share one code path.
LEARNERS: Dict[str, BaseLearner] = {
    "linear_ridge": _linear,
    "logistic": _linear,
    "polynomial": _linear,
    "rbf_kernel": RbfKernelLearner(),
    "boosted_stumps": BoostedTreesLearner(),
}

WeightsLike = Union[None, np.ndarray, Any]


def resolve_weights(data: Dataset, weights: WeightsLike = None) -> np.ndarray:
    """
    Returns the per-row weights to use for `data`.

    Accepts a WeightVector (anything with `.values`), a plain array, or None,
    in which case the dataset's own weight column (or all ones) is used.

    Raises:
        LearnerError: If the weights are misaligned, negative, non-finite or all zero.
    """
    if weights is None:
        values = data.weights if data.weights is not None else np.ones(data.n_rows)
    else:
        values = getattr(weights, "values", weights)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != data.n_rows:
        raise LearnerError(f"Got {values.shape[0]} weights for {data.n_rows} rows.")
    if not np.all(np.isfinite(values)):
        raise LearnerError("Weights must be finite.")
    if np.any(values < 0):
        raise LearnerError("Weights must be nonnegative.")
    if not np.any(values > 0):
        raise LearnerError("Weights are all zero.")
    return values


def fit(spec: ModelSpec, data: Dataset, weights: WeightsLike = None) -> Model:
    """
    Fits `spec` on `data` by minimizing the weighted empirical risk.

    Args:
        spec: Learner family and hyperparameters.
        data: Training data; outputs must be present.
        weights: Optional WeightVector or array aligned to the rows of `data`.

    Returns:
        The fitted Model.

    Raises:
        LearnerError: Missing outputs, non-finite features, invalid weights,
            single-class data, or a singular problem.
    """
    if not data.has_outputs:
        raise LearnerError("Training data has no outputs.")
    features = data.features
    if not np.all(np.isfinite(features)):
        raise LearnerError("Training features contain non-finite values.")
    values = resolve_weights(data, weights)
    targets = data.outputs
    n_classes = data.n_classes
    if n_classes is not None:
        present = np.unique(targets[values > 0])
        if present.size < 2:
            raise LearnerError(
                f"Classification data contains a single class ({present.tolist()})."
            )
    elif spec.loss == LOSS_LOGISTIC and spec.family == "logistic":
        raise LearnerError("The logistic family needs classification outputs.")

    standardizer = Standardizer.fit(features, values)
    learner = LEARNERS[spec.family]
    params, info = learner.fit(
        spec, standardizer.transform(features), targets, values, n_classes
    )
    for key, value in params.items():
        if isinstance(value, np.ndarray) and not np.all(np.isfinite(value)):
            raise LearnerError(f"Fitted parameter '{key}' is not finite.")
    logger.debug("Fitted %s on %d rows: %s", spec.family, data.n_rows, info)
    return Model(
        spec=spec,
        params=params,
        standardizer=standardizer,
        n_features=data.n_features,
        n_classes=n_classes,
        solver_info=info,
    )


def _check_input(model: Model, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features.reshape(-1, model.n_features)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise LearnerError(
            f"Expected {model.n_features} feature columns, got {features.shape[-1]}."
        )
    if not np.all(np.isfinite(features)):
        raise LearnerError("Input features contain non-finite values.")
    return model.standardizer.transform(features)


def _as_matrix(features: Union[Dataset, np.ndarray]) -> np.ndarray:
    return features.features if isinstance(features, Dataset) else features


def decision_function(model: Model, features: Union[Dataset, np.ndarray]) -> np.ndarray:
    """Raw decision values: (n,) for regression and binary tasks, (n, K) otherwise."""
    standardized = _check_input(model, _as_matrix(features))
    return LEARNERS[model.spec.family].decision(
        model.spec, model.params, standardized, model.n_classes
    )


def predict_proba(model: Model, features: Union[Dataset, np.ndarray]) -> np.ndarray:
    """
    Class probabilities, each row in [0, 1] and summing to one.

    Uses the calibration map when the model carries one.
    """
    if not model.is_classifier:
        raise LearnerError("predict_proba needs a classifier.")
    if model.calibration is not None:
        return apply_platt(model.calibration, decision_function(model, features))
    standardized = _check_input(model, _as_matrix(features))
    probs = LEARNERS[model.spec.family].probabilities(
        model.spec, model.params, standardized, model.n_classes
    )
    if probs.shape[1] != model.n_classes or not np.all(np.isfinite(probs)):
        raise LearnerError("Learner returned a malformed probability matrix.")
    probs = np.clip(probs, 0.0, 1.0)
    return probs / probs.sum(axis=1, keepdims=True)


def predict(model: Model, features: Union[Dataset, np.ndarray]) -> np.ndarray:
    """Class ids (argmax probability) for classifiers, fitted values for regressors."""
    if model.is_classifier:
        return np.argmax(predict_proba(model, features), axis=1)
    return decision_function(model, features)


def calibrate_platt(model: Model, holdout: Dataset) -> Model:
    """
    Attaches a Platt map fitted by weighted maximum likelihood on `holdout`.

    Raises:
        CalibrationError: If the task is not binary or the holdout has one class.
    """
    if model.n_classes != 2:
        raise CalibrationError("Platt calibration needs a binary classifier.")
    labels = holdout.require_outputs()
    weights = holdout.weights if holdout.weights is not None else np.ones(holdout.n_rows)
    scores = decision_function(replace(model, calibration=None), holdout)
    return replace(model, calibration=fit_platt(scores, labels, weights))


def save_model(model: Model, path: Union[str, Path]):
    """Writes the model as a JSON document."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.to_json(), encoding="utf-8")
    except OSError as e:
        raise LearnerError(f"Could not write model to {path}: {e}") from None


def load_model(path: Union[str, Path]) -> Model:
    """Reads a model written by `save_model`."""
    path = Path(path)
    if not path.is_file():
        raise LearnerError(f"Model file not found: {path}")
    return Model.from_json(path.read_text(encoding="utf-8"))


__all__ = [
    "LEARNERS",
    "LOSS_LOGISTIC",
    "LOSS_SQUARED",
    "CalibrationError",
    "LearnerError",
    "Model",
    "ModelSpec",
    "PlattMap",
    "calibrate_platt",
    "decision_function",
    "fit",
    "linear_coefficients",
    "load_model",
    "predict",
    "predict_proba",
    "resolve_weights",
    "save_model",
]
