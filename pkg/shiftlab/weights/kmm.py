"""
Kernel mean matching.

Chooses source weights so the weighted source kernel mean embedding is as
close as possible to the target embedding:

    min_w  || (1/n) sum_i w_i phi(x_i) - (1/m) sum_j phi(x'_j) ||^2
    s.t.   0 <= w_i <= B,   |mean(w) - 1| <= eps.

The objective is a convex quadratic; it is minimized by accelerated projected
gradient with the fixed step 1/L, L the largest Hessian eigenvalue. The
projection onto the box intersected with the mean slab is exact: it is a
clip of w - tau for the tau found by a 1-D root search.
"""

import logging
from typing import Optional, Union

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from sklearn.metrics.pairwise import euclidean_distances, linear_kernel, rbf_kernel

from ..constants import KMM_DEFAULT_BOUND, KMM_MAX_ITER, KMM_OBJECTIVE_TOL
from ..core.rng import RngSeed, as_seed
from .base import NORMALIZE_MEAN_ONE, ConvergenceError, WeightError, WeightVector

logger = logging.getLogger(__name__)

KERNELS = ("rbf", "linear")
MEDIAN_SAMPLE = 1000


def median_bandwidth(
    points: np.ndarray, seed: Union[RngSeed, int] = 0, max_points: int = MEDIAN_SAMPLE
) -> float:
    """Median pairwise Euclidean distance over (a seeded subsample of) `points`."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] > max_points:
        rows = as_seed(seed).generator().choice(points.shape[0], max_points, replace=False)
        points = points[np.sort(rows)]
    distances = euclidean_distances(points, points)
    upper = distances[np.triu_indices_from(distances, k=1)]
    median = float(np.median(upper)) if upper.size else 0.0
    return median if median > 0 else 1.0


def project_box_mean(
    v: np.ndarray, upper: float, low_mean: float, high_mean: float
) -> np.ndarray:
    """
    Euclidean projection of v onto {0 <= w <= upper, low_mean <= mean(w) <= high_mean}.
    """
    clipped = np.clip(v, 0.0, upper)
    mean = clipped.mean()
    if low_mean <= mean <= high_mean:
        return clipped
    goal = high_mean if mean > high_mean else low_mean

    def gap(tau: float) -> float:
        return np.clip(v - tau, 0.0, upper).mean() - goal

    tau = brentq(gap, v.min() - upper, v.max(), xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return np.clip(v - tau, 0.0, upper)


def kmm_objective(
    weights: np.ndarray, gram: np.ndarray, cross_mean: np.ndarray, target_mean: float
) -> float:
    """Squared embedding discrepancy for the given weights."""
    n = weights.shape[0]
    return float(weights @ gram @ weights / n**2 - 2.0 * weights @ cross_mean / n + target_mean)


def _kernel(kind: str, a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    if kind == "linear":
        return linear_kernel(a, b)
    return rbf_kernel(a, b, gamma=1.0 / (2.0 * bandwidth**2))


def estimate_weights_kmm(
    source_x: np.ndarray,
    target_x: np.ndarray,
    bandwidth: Optional[float] = None,
    upper_bound: float = KMM_DEFAULT_BOUND,
    eps: Optional[float] = None,
    kernel: str = "rbf",
    max_iter: int = KMM_MAX_ITER,
    tol: float = KMM_OBJECTIVE_TOL,
    normalization: str = NORMALIZE_MEAN_ONE,
    seed: Union[RngSeed, int] = 0,
) -> WeightVector:
    """
    Kernel mean matching weights for the rows of `source_x`.

    Args:
        source_x, target_x: Feature matrices (rows are points).
        bandwidth: RBF bandwidth; median pairwise distance when None.
        upper_bound: Box bound B > 1.
        eps: Mean slack; (sqrt(n) - 1) / sqrt(n) when None.
        kernel: 'rbf' or 'linear'.
        max_iter: Iteration cap.
        tol: Stop when one iteration changes the objective by less than this.
        normalization: Applied to the optimum ('none' returns it as solved).

    Raises:
        WeightError: Empty inputs or invalid bound, slack or kernel.
        ConvergenceError: Iteration cap reached before the tolerance.
    """
    source_x = np.atleast_2d(np.asarray(source_x, dtype=float))
    target_x = np.atleast_2d(np.asarray(target_x, dtype=float))
    n, m = source_x.shape[0], target_x.shape[0]
    if n == 0 or m == 0:
        raise WeightError("KMM needs nonempty source and target samples.")
    if source_x.shape[1] != target_x.shape[1]:
        raise WeightError("Source and target feature widths differ.")
    if upper_bound <= 1:
        raise WeightError(f"KMM upper bound must exceed 1, got {upper_bound}.")
    if kernel not in KERNELS:
        raise WeightError(f"Unknown kernel '{kernel}'. Known: {', '.join(KERNELS)}")
    eps = (np.sqrt(n) - 1.0) / np.sqrt(n) if eps is None else float(eps)
    if eps < 0:
        raise WeightError(f"KMM slack must be >= 0, got {eps}.")
    if kernel == "rbf" and bandwidth is None:
        bandwidth = median_bandwidth(np.vstack([source_x, target_x]), seed)
    if bandwidth is not None and bandwidth <= 0:
        raise WeightError(f"Bandwidth must be > 0, got {bandwidth}.")

    gram = _kernel(kernel, source_x, source_x, bandwidth)
    cross_mean = _kernel(kernel, source_x, target_x, bandwidth).mean(axis=1)
    target_mean = float(_kernel(kernel, target_x, target_x, bandwidth).mean())
    # Rank-deficient kernels (duplicates, linear kernel) get a tiny ridge.
    jitter = 1e-10 * max(float(np.mean(np.diag(gram))), 1.0)
    gram = gram + jitter * np.eye(n)
    top = scipy.linalg.eigvalsh(gram, subset_by_index=[n - 1, n - 1])[0]
    lipschitz = 2.0 * top / n**2
    low_mean, high_mean = max(1.0 - eps, 0.0), min(1.0 + eps, upper_bound)

    def gradient(w):
        return 2.0 * (gram @ w) / n**2 - 2.0 * cross_mean / n

    w = project_box_mean(np.ones(n), upper_bound, low_mean, high_mean)
    momentum, t = w.copy(), 1.0
    value = kmm_objective(w, gram, cross_mean, target_mean)
    for iteration in range(1, max_iter + 1):
        candidate = project_box_mean(
            momentum - gradient(momentum) / lipschitz, upper_bound, low_mean, high_mean
        )
        new_value = kmm_objective(candidate, gram, cross_mean, target_mean)
        if new_value > value and t > 1.0:
            # Restart the momentum; the next step is a plain projected gradient step.
            momentum, t = w.copy(), 1.0
            continue
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t**2)) / 2.0
        momentum = candidate + ((t - 1.0) / t_next) * (candidate - w)
        w, t = candidate, t_next
        converged = value - new_value <= tol
        value = new_value
        if converged:
            logger.debug("KMM converged after %d iterations, objective %.3g", iteration, value)
            break
    else:
        raise ConvergenceError(
            f"KMM did not reach objective tolerance {tol:g} within {max_iter} iterations."
        )
    return WeightVector.build(w, method="kmm", normalization=normalization)
