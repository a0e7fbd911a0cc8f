"""
Platt scaling: a monotone sigmoid map from decision values to P(class 1).
"""

import logging
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..constants import SOLVER_GRADIENT_TOL, SOLVER_MAX_ITER
from .base import CalibrationError, PlattMap

logger = logging.getLogger(__name__)


def platt_negative_log_likelihood(
    slope: float,
    intercept: float,
    scores: np.ndarray,
    labels: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> float:
    """Weighted mean negative log-likelihood of a sigmoid map on (scores, labels)."""
    weights = np.ones_like(scores, dtype=float) if weights is None else weights
    eta = slope * scores + intercept
    losses = np.logaddexp(0.0, eta) - labels * eta
    return float(weights @ losses / weights.sum())


def fit_platt(
    scores: np.ndarray, labels: np.ndarray, weights: Optional[np.ndarray] = None
) -> PlattMap:
    """
    Fits p = expit(a * score + b) by weighted maximum likelihood.

    Args:
        scores: Decision values, shape (n,).
        labels: Binary labels in {0, 1}, shape (n,).
        weights: Optional nonnegative weights, shape (n,).

    Returns:
        The fitted PlattMap.

    Raises:
        CalibrationError: If only one class carries positive weight.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    weights = np.ones_like(scores) if weights is None else np.asarray(weights, dtype=float)
    present = np.unique(labels[weights > 0])
    if present.size < 2:
        raise CalibrationError(
            "Calibration holdout must contain both classes; "
            f"found only class {present.tolist()}."
        )
    scaled = weights / weights.sum()
    design = np.column_stack([scores, np.ones_like(scores)])

    def objective(params):
        eta = design @ params
        value = scaled @ (np.logaddexp(0.0, eta) - labels * eta)
        grad = design.T @ (scaled * (expit(eta) - labels))
        return value, grad

    def hessian(params):
        p = expit(design @ params)
        return design.T @ (design * (scaled * p * (1 - p))[:, None])

    result = minimize(
        objective,
        np.array([1.0, 0.0]),
        jac=True,
        hess=hessian,
        method="trust-exact",
        options={"gtol": SOLVER_GRADIENT_TOL, "maxiter": SOLVER_MAX_ITER},
    )
    slope, intercept = result.x
    if not np.all(np.isfinite(result.x)):
        raise CalibrationError("Platt fit produced non-finite parameters.")
    logger.debug(
        "Platt map slope=%.6g intercept=%.6g after %d iterations", slope, intercept, result.nit
    )
    return PlattMap(slope=float(slope), intercept=float(intercept))


def apply_platt(calibration: PlattMap, scores: np.ndarray) -> np.ndarray:
    """Returns the (n, 2) calibrated probability matrix."""
    p1 = expit(calibration.slope * np.asarray(scores, dtype=float) + calibration.intercept)
    return np.column_stack([1.0 - p1, p1])
