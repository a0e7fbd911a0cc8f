"""
Closed-form shift corrections: Bayes-rule prior correction, empirical class
priors, and the regress-out (deconfounding) transform kept as a baseline.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..constants import PRIOR_SUM_TOLERANCE
from .dataset import Dataset
from .errors import DegeneratePriorWarning, ShiftLabError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-8


class CorrectionError(ShiftLabError):
    """Raised when a correction is undefined for its inputs."""

    pass


def _check_prior_vector(priors: Sequence[float], label: str) -> np.ndarray:
    vector = np.asarray(priors, dtype=float).reshape(-1)
    if vector.size < 2 or np.any(~np.isfinite(vector)) or np.any(vector < 0):
        raise CorrectionError(f"{label} must be a nonnegative vector over >= 2 classes.")
    if abs(float(vector.sum()) - 1.0) > PRIOR_SUM_TOLERANCE:
        raise CorrectionError(f"{label} must sum to 1, got {float(vector.sum())!r}.")
    return vector


@dataclass(frozen=True)
class PriorPair:
    """Class priors of the source and target populations."""

    source_priors: np.ndarray
    target_priors: np.ndarray

    def __post_init__(self):
        source = _check_prior_vector(self.source_priors, "source_priors")
        target = _check_prior_vector(self.target_priors, "target_priors")
        if source.size != target.size:
            raise CorrectionError(
                f"Prior vectors have {source.size} and {target.size} classes."
            )
        object.__setattr__(self, "source_priors", source)
        object.__setattr__(self, "target_priors", target)

    def reversed(self) -> "PriorPair":
        return PriorPair(source_priors=self.target_priors, target_priors=self.source_priors)


def label_shift_correct(probs: np.ndarray, priors: PriorPair) -> np.ndarray:
    """
    Re-targets posteriors with Bayes' rule: p'_k is proportional to
    p_k * target_k / source_k, renormalized per row.

    Raises:
        CorrectionError: Rows not summing to one, a width mismatch, or a class
            with zero source prior but nonzero predicted probability.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    if probs.shape[1] != priors.source_priors.size:
        raise CorrectionError(
            f"Probability matrix has {probs.shape[1]} columns, priors have "
            f"{priors.source_priors.size} classes."
        )
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
        raise CorrectionError("Probability rows must be nonnegative and sum to 1.")
    absent = priors.source_priors == 0
    if np.any(probs[:, absent] > 0):
        k = int(np.flatnonzero(absent & np.any(probs > 0, axis=0))[0])
        raise CorrectionError(
            f"Class {k} has zero source prior but nonzero predicted probability; "
            "the correction is undefined."
        )
    ratio = np.zeros_like(priors.source_priors)
    ratio[~absent] = priors.target_priors[~absent] / priors.source_priors[~absent]
    corrected = probs * ratio
    totals = corrected.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise CorrectionError("A row has zero mass under the target priors.")
    return corrected / totals


def estimate_priors(labels: Sequence[int], n_classes: Optional[int] = None) -> np.ndarray:
    """
    Empirical class frequencies.

    Emits DegeneratePriorWarning when only one class is present.
    """
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        raise CorrectionError("Cannot estimate priors from an empty label vector.")
    if np.any(labels < 0) or np.any(labels != np.round(labels)):
        raise CorrectionError("Labels must be nonnegative class ids.")
    labels = labels.astype(int)
    width = max(int(n_classes or 0), int(labels.max()) + 1, 2)
    priors = np.bincount(labels, minlength=width) / labels.size
    if np.count_nonzero(priors) < 2:
        warnings.warn(
            f"Only class {int(labels[0])} is present; priors are degenerate.",
            DegeneratePriorWarning,
            stacklevel=2,
        )
    return priors


@dataclass(frozen=True)
class RegressOut:
    """
    Per-feature OLS fit on (intercept, covariate); `apply` replaces each
    feature by its residual using these fixed coefficients.
    """

    covariate: str
    intercepts: np.ndarray
    slopes: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        if data.n_features != self.slopes.size:
            raise CorrectionError(
                f"Transform fitted on {self.slopes.size} features, dataset has {data.n_features}."
            )
        covariate = data.covariate(self.covariate)
        residuals = data.features - self.intercepts - np.outer(covariate, self.slopes)
        return data.with_features(residuals, data.column_names)


def fit_regress_out(data: Dataset, covariate_name: str) -> RegressOut:
    """Fits the per-feature regressions on `data`."""
    covariate = data.covariate(covariate_name)
    centred = covariate - covariate.mean()
    spread = float(centred @ centred)
    if data.n_rows < 2 or spread <= 0 or np.ptp(covariate) == 0:
        raise CorrectionError(
            f"Covariate '{covariate_name}' is constant; the regression is singular."
        )
    feature_means = data.features.mean(axis=0)
    slopes = centred @ (data.features - feature_means) / spread
    intercepts = feature_means - slopes * covariate.mean()
    return RegressOut(covariate=covariate_name, intercepts=intercepts, slopes=slopes)


def regress_out(data: Dataset, covariate_name: str) -> Tuple[Dataset, RegressOut]:
    """
    Replaces every feature column by its residual on (intercept, covariate).

    Returns:
        The residualized dataset and the fitted transform, so the identical
        transform can be applied to test data.

    Raises:
        CorrectionError: If the covariate is constant.
        DatasetError: If the covariate is absent.
    """
    transform = fit_regress_out(data, covariate_name)
    return transform.apply(data), transform
