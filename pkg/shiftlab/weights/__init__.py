"""
Importance-weight construction: exact and inverse-probability weights,
discriminative / kernel-mean-matching / least-squares estimators, and the
flattening, resampling and diagnostic helpers.
"""

from .base import (
    NORMALIZE_MEAN_ONE,
    NORMALIZE_NONE,
    ConvergenceError,
    RatioModel,
    RatioView,
    WeightError,
    WeightVector,
    flatten_weights,
    ipw_from_selection,
    load_weights_csv,
    overlap_diagnostics,
    resample_by_weights,
    true_weights,
    write_weights_csv,
)
from .discriminative import (
    ProvenanceClassifier,
    discriminative_weights,
    estimate_weights_discriminative,
    fit_provenance_classifier,
)
from .kmm import estimate_weights_kmm, kmm_objective, median_bandwidth, project_box_mean
from .ulsif import estimate_weights_ulsif, ulsif_coefficients

__all__ = [
    "NORMALIZE_MEAN_ONE",
    "NORMALIZE_NONE",
    "ConvergenceError",
    "ProvenanceClassifier",
    "RatioModel",
    "RatioView",
    "WeightError",
    "WeightVector",
    "discriminative_weights",
    "estimate_weights_discriminative",
    "estimate_weights_kmm",
    "estimate_weights_ulsif",
    "fit_provenance_classifier",
    "flatten_weights",
    "ipw_from_selection",
    "kmm_objective",
    "load_weights_csv",
    "median_bandwidth",
    "overlap_diagnostics",
    "project_box_mean",
    "resample_by_weights",
    "true_weights",
    "ulsif_coefficients",
    "write_weights_csv",
]
