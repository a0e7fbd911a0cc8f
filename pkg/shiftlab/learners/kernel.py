"""
Weighted RBF kernel ridge regression, the flexible learner.

For classification the class-indicator columns are regressed, so the fitted
values estimate P(Y = k | x) directly.
"""

import logging

import numpy as np
import scipy.linalg
from sklearn.metrics.pairwise import rbf_kernel

from ..constants import PROBABILITY_CLIP
from .base import BaseLearner, LearnerError
from .linear import clip_normalize, one_hot

logger = logging.getLogger(__name__)


def _gamma(bandwidth: float) -> float:
    return 1.0 / (2.0 * bandwidth**2)


class RbfKernelLearner(BaseLearner):
    """
    Minimizes sum_i w_i (t_i - f(x_i))^2 / sum_i w_i + ridge * ||f||^2 over the
    RKHS plus a weighted-mean offset.

    With W = diag(w) restricted to positive weights, the representer
    coefficients solve (K + ridge * sum(w) * W^-1) alpha = t - offset, which is
    invariant to rescaling all weights.
    """

    def fit(self, spec, features, targets, weights, n_classes):
        keep = weights > 0
        support, w = features[keep], weights[keep]
        fit_targets = targets if n_classes is None else one_hot(targets, n_classes)
        fit_targets = fit_targets[keep]
        offset = w @ fit_targets / w.sum()
        centered = fit_targets - offset

        gram = rbf_kernel(support, support, gamma=_gamma(spec.bandwidth))
        system = gram + np.diag(spec.ridge * w.sum() / w)
        jitter = 0.0
        try:
            alpha = scipy.linalg.solve(system, centered, assume_a="pos")
        except (scipy.linalg.LinAlgError, ValueError):
            # Duplicate points with ridge 0 make the gram matrix singular.
            jitter = 1e-10 * float(np.mean(np.diag(system)))
            logger.info("Kernel system not positive definite; adding jitter %.3g", jitter)
            try:
                alpha = scipy.linalg.solve(
                    system + jitter * np.eye(system.shape[0]), centered, assume_a="pos"
                )
            except (scipy.linalg.LinAlgError, ValueError) as e:
                raise LearnerError(f"Kernel ridge system is singular: {e}") from None
        if not np.all(np.isfinite(alpha)):
            raise LearnerError("Kernel ridge produced non-finite coefficients.")
        params = {"support": support, "alpha": alpha, "offset": np.asarray(offset)}
        return params, {"solver": "cholesky", "jitter": jitter, "n_support": int(keep.sum())}

    def _scores(self, spec, params, features):
        cross = rbf_kernel(features, params["support"], gamma=_gamma(spec.bandwidth))
        return cross @ params["alpha"] + params["offset"]

    def decision(self, spec, params, features, n_classes):
        scores = self._scores(spec, params, features)
        if n_classes == 2:
            return scores[:, 1] - scores[:, 0]
        return scores

    def probabilities(self, spec, params, features, n_classes):
        return clip_normalize(self._scores(spec, params, features), PROBABILITY_CLIP)
