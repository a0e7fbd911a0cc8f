"""
Linear-in-parameters learners: linear ridge, polynomial ridge and
(multinomial) logistic regression, all with per-example weights.

The empirical risk is normalized by the total weight, so multiplying every
weight by a constant leaves the minimizer unchanged, and integer weights are
equivalent to replicating rows. The intercept is never penalized.
"""

import logging
from typing import Any, Dict, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize
from scipy.special import logsumexp
from sklearn.preprocessing import PolynomialFeatures

from ..constants import (
    PROBABILITY_CLIP,
    SINGULAR_CONDITION,
    SOLVER_GRADIENT_TOL,
    SOLVER_MAX_ITER,
)
from .base import LOSS_SQUARED, BaseLearner, LearnerError, Model, ModelSpec, Standardizer

logger = logging.getLogger(__name__)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    encoded = np.zeros((labels.shape[0], n_classes))
    encoded[np.arange(labels.shape[0]), labels.astype(int)] = 1.0
    return encoded


def clip_normalize(scores: np.ndarray, floor: float) -> np.ndarray:
    """Clips indicator-regression outputs into [floor, 1] and renormalizes rows."""
    clipped = np.clip(scores, floor, 1.0)
    return clipped / clipped.sum(axis=1, keepdims=True)


def _design(basis: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((basis.shape[0], 1)), basis])


def _expand(spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    return PolynomialFeatures(degree=spec.degree, include_bias=False).fit_transform(features)


def weighted_ridge(
    basis: np.ndarray, targets: np.ndarray, weights: np.ndarray, strength: float
) -> np.ndarray:
    """
    Solves the weighted normal equations with an unpenalized intercept.

    Returns:
        Stacked (intercept, coefficients), shape (p + 1,) or (p + 1, K).
    """
    design = _design(basis)
    total = weights.sum()
    gram = design.T @ (design * weights[:, None]) / total
    rhs = design.T @ (weights[:, None] * targets.reshape(targets.shape[0], -1)) / total
    penalty = np.full(design.shape[1], strength)
    penalty[0] = 0.0
    system = gram + np.diag(penalty)
    condition = np.linalg.cond(system)
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise LearnerError(
            f"Singular normal equations (condition number {condition:.3g}); "
            "add regularization or remove collinear features."
        )
    solution = scipy.linalg.solve(system, rhs, assume_a="sym")
    return solution[:, 0] if targets.ndim == 1 else solution


def _logistic_terms(
    theta: np.ndarray, design: np.ndarray, indicators: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (linear predictors, log-normalizers, non-reference probabilities)."""
    eta = design @ theta
    padded = np.hstack([np.zeros((eta.shape[0], 1)), eta])
    normalizer = logsumexp(padded, axis=1)
    probs = np.exp(eta - normalizer[:, None])
    return eta, normalizer, probs


def fit_logistic(
    basis: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    strength: float,
    n_classes: int,
) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    Weighted multinomial logistic regression, class 0 as reference.

    Minimizes sum_i w_i * nll_i / sum_i w_i + strength/2 * ||coef||^2 with a
    trust-region Newton method.

    Returns:
        Parameters of shape (p + 1, K - 1) and solver diagnostics.
    """
    design = _design(basis)
    n_params, n_free = design.shape[1], n_classes - 1
    indicators = one_hot(labels, n_classes)[:, 1:]
    scaled = weights / weights.sum()
    mask = np.ones((n_params, n_free))
    mask[0] = 0.0

    def objective(flat):
        theta = flat.reshape(n_params, n_free)
        eta, normalizer, probs = _logistic_terms(theta, design, indicators)
        value = scaled @ (normalizer - (indicators * eta).sum(axis=1))
        value += 0.5 * strength * np.sum((theta * mask) ** 2)
        grad = design.T @ (scaled[:, None] * (probs - indicators)) + strength * theta * mask
        return value, grad.ravel()

    def hessian(flat):
        theta = flat.reshape(n_params, n_free)
        _, _, probs = _logistic_terms(theta, design, indicators)
        curvature = np.einsum("na,ab->nab", probs, np.eye(n_free)) - np.einsum(
            "na,nb->nab", probs, probs
        )
        hess = np.einsum(
            "n,ni,nj,nab->iajb", scaled, design, design, curvature, optimize=True
        ).reshape(n_params * n_free, n_params * n_free)
        return hess + np.diag(strength * mask.ravel())

    result = minimize(
        objective,
        np.zeros(n_params * n_free),
        jac=True,
        hess=hessian,
        method="trust-exact",
        options={"gtol": SOLVER_GRADIENT_TOL, "maxiter": SOLVER_MAX_ITER},
    )
    theta = result.x.reshape(n_params, n_free)
    if not np.all(np.isfinite(theta)):
        raise LearnerError("Logistic solver produced non-finite parameters.")
    gradient_norm = float(np.linalg.norm(result.jac))
    if gradient_norm > SOLVER_GRADIENT_TOL:
        logger.info(
            "Logistic solver stopped after %d iterations with gradient norm %.3g",
            result.nit,
            gradient_norm,
        )
    info = {
        "iterations": int(result.nit),
        "gradient_norm": gradient_norm,
        "gradient_tol": SOLVER_GRADIENT_TOL,
        "max_iter": SOLVER_MAX_ITER,
        "converged": gradient_norm <= SOLVER_GRADIENT_TOL,
    }
    return theta, info


class LinearLearner(BaseLearner):
    """Linear ridge, polynomial ridge and logistic families."""

    def _basis(self, spec: ModelSpec, params: Dict[str, Any], features: np.ndarray):
        expanded = _expand(spec, features)
        return (expanded - params["basis_mean"]) / params["basis_scale"]

    def fit(self, spec, features, targets, weights, n_classes):
        expanded = _expand(spec, features)
        basis_stats = Standardizer.fit(expanded, weights)
        basis = basis_stats.transform(expanded)
        params: Dict[str, Any] = {
            "basis_mean": basis_stats.mean,
            "basis_scale": basis_stats.scale,
        }
        if spec.loss == LOSS_SQUARED:
            fit_targets = targets if n_classes is None else one_hot(targets, n_classes)
            params["theta"] = weighted_ridge(basis, fit_targets, weights, spec.regularization)
            return params, {"solver": "normal-equations"}
        if n_classes is None:
            raise LearnerError("The logistic loss needs classification outputs.")
        theta, info = fit_logistic(basis, targets, weights, spec.regularization, n_classes)
        params["theta"] = theta
        return params, {"solver": "trust-exact", **info}

    def _scores(self, spec, params, features):
        return _design(self._basis(spec, params, features)) @ params["theta"]

    def decision(self, spec, params, features, n_classes):
        scores = self._scores(spec, params, features)
        if n_classes is None:
            return scores
        if spec.loss == LOSS_SQUARED:
            return scores[:, 1] - scores[:, 0] if n_classes == 2 else scores
        if n_classes == 2:
            return scores[:, 0]
        return np.hstack([np.zeros((scores.shape[0], 1)), scores])

    def probabilities(self, spec, params, features, n_classes):
        scores = self._scores(spec, params, features)
        if spec.loss == LOSS_SQUARED:
            return clip_normalize(scores, PROBABILITY_CLIP)
        padded = np.hstack([np.zeros((scores.shape[0], 1)), scores])
        return np.exp(padded - logsumexp(padded, axis=1, keepdims=True))


def linear_coefficients(model: Model) -> Tuple[float, np.ndarray]:
    """
    Expresses a degree-1 squared-loss regressor in original feature units.

    Returns:
        (intercept, coefficients) such that prediction = intercept + x @ coefficients.
    """
    if model.spec.degree != 1 or model.spec.loss != LOSS_SQUARED or model.is_classifier:
        raise LearnerError("Original-unit coefficients exist only for linear regressors.")
    theta = model.params["theta"]
    unit = model.standardizer.scale * model.params["basis_scale"]
    coefficients = theta[1:] / unit
    shift = model.standardizer.mean / model.standardizer.scale + model.params["basis_mean"]
    intercept = theta[0] - float(np.sum(theta[1:] * shift / model.params["basis_scale"]))
    return float(intercept), coefficients
