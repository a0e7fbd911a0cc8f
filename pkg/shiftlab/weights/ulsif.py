"""
Unconstrained least-squares importance fitting (uLSIF).

The ratio is modelled as r(x) = sum_l alpha_l k(x, c_l) with Gaussian basis
functions centred on target points. Minimizing the squared error to the true
ratio under the source law, plus a ridge penalty, gives

    (H + ridge * I) alpha = h,   H = mean_source k k^T,   h = mean_target k,

after which negative coefficients are clamped to zero.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
from sklearn.metrics.pairwise import rbf_kernel

from ..constants import ULSIF_DEFAULT_RIDGE, ULSIF_MAX_CENTERS
from ..core.rng import RngSeed, as_seed
from .base import (
    NORMALIZE_MEAN_ONE,
    RatioModel,
    RatioView,
    WeightError,
    WeightVector,
)
from .kmm import median_bandwidth

logger = logging.getLogger(__name__)


def ulsif_coefficients(h_matrix: np.ndarray, h_vector: np.ndarray, ridge: float) -> np.ndarray:
    """Solves (H + ridge I) alpha = h and clamps negative coefficients to zero."""
    if ridge <= 0:
        raise WeightError(f"uLSIF ridge must be > 0, got {ridge}.")
    system = h_matrix + ridge * np.eye(h_matrix.shape[0])
    alpha = scipy.linalg.solve(system, h_vector, assume_a="pos")
    return np.maximum(alpha, 0.0)


def estimate_weights_ulsif(
    source_x: np.ndarray,
    target_x: np.ndarray,
    basis_centers: Optional[int] = None,
    ridge: float = ULSIF_DEFAULT_RIDGE,
    bandwidth: Optional[float] = None,
    seed: Union[RngSeed, int] = 0,
    normalization: str = NORMALIZE_MEAN_ONE,
    view: Optional[RatioView] = None,
) -> Tuple[WeightVector, RatioModel]:
    """
    Fits the uLSIF ratio model and evaluates it at the source rows.

    Args:
        source_x, target_x: Feature matrices (rows are points).
        basis_centers: Number of target points used as centres; min(100, m) when None.
        ridge: Positive ridge strength.
        bandwidth: Gaussian basis width; median pairwise distance when None.
        seed: Picks the centres and the median-heuristic subsample.
        view: Recorded on the returned RatioModel.

    Raises:
        WeightError: Empty inputs, more centres than target points, a
            nonpositive ridge, or a ratio that is zero at every source row.
    """
    source_x = np.atleast_2d(np.asarray(source_x, dtype=float))
    target_x = np.atleast_2d(np.asarray(target_x, dtype=float))
    n, m = source_x.shape[0], target_x.shape[0]
    if n == 0 or m == 0:
        raise WeightError("uLSIF needs nonempty source and target samples.")
    if source_x.shape[1] != target_x.shape[1]:
        raise WeightError("Source and target feature widths differ.")
    n_centers = min(ULSIF_MAX_CENTERS, m) if basis_centers is None else int(basis_centers)
    if not 1 <= n_centers <= m:
        raise WeightError(f"basis_centers must lie in [1, {m}], got {basis_centers}.")
    seed = as_seed(seed)
    if bandwidth is None:
        bandwidth = median_bandwidth(np.vstack([source_x, target_x]), seed.substream("bandwidth"))
    if bandwidth <= 0:
        raise WeightError(f"Bandwidth must be > 0, got {bandwidth}.")

    rows = seed.substream("centers").generator().choice(m, size=n_centers, replace=False)
    centers = target_x[np.sort(rows)]
    gamma = 1.0 / (2.0 * bandwidth**2)
    phi_source = rbf_kernel(source_x, centers, gamma=gamma)
    phi_target = rbf_kernel(target_x, centers, gamma=gamma)
    h_matrix = phi_source.T @ phi_source / n
    h_vector = phi_target.mean(axis=0)
    alpha = ulsif_coefficients(h_matrix, h_vector, ridge)
    logger.debug("uLSIF kept %d of %d basis functions", np.count_nonzero(alpha), n_centers)

    def evaluate(points: np.ndarray) -> np.ndarray:
        return rbf_kernel(np.atleast_2d(points), centers, gamma=gamma) @ alpha

    raw = phi_source @ alpha
    if not np.any(raw > 0):
        raise WeightError("uLSIF ratio is zero at every source row; increase bandwidth or centres.")
    weights = WeightVector.build(raw, method="ulsif", normalization=normalization)
    ratio_model = RatioModel(
        method="ulsif",
        view=view or RatioView(),
        components={"centers": centers, "alpha": alpha, "bandwidth": bandwidth},
        evaluator=evaluate,
    )
    return weights, ratio_model
