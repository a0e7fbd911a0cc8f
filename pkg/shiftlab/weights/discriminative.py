"""
Discriminative density-ratio estimation.

A probabilistic classifier learns to tell target rows (T=1) from source rows
(T=0). With calibrated probabilities, Bayes' rule gives

    w(z) = P(T=1 | z) P(T=0) / (P(T=0 | z) P(T=1)).

Its held-out AUC doubles as a shift and overlap diagnostic: near 0.5 the two
samples are exchangeable, near 1 they barely overlap.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from sklearn.metrics import roc_auc_score

from ..constants import (
    CALIBRATION_HOLDOUT_FRACTION,
    DETECTOR_LOW_OVERLAP_AUC,
    PROBABILITY_CLIP,
)
from ..core.dataset import Dataset
from ..core.errors import LowOverlapWarning
from ..core.rng import RngSeed, as_seed
from ..learners import (
    CalibrationError,
    LearnerError,
    Model,
    ModelSpec,
    calibrate_platt,
    decision_function,
    fit,
    predict_proba,
)
from .base import NORMALIZE_MEAN_ONE, RatioModel, RatioView, WeightError, WeightVector

logger = logging.getLogger(__name__)

DEFAULT_CLASSIFIER = "linear"


@dataclass(frozen=True, eq=False)
class ProvenanceClassifier:
    """A calibrated source-vs-target classifier and its held-out AUC."""

    model: Model
    view: RatioView
    auc: float
    n_source: int
    n_target: int

    def target_probability(self, points: np.ndarray, clip: float = PROBABILITY_CLIP):
        """Calibrated P(T=1 | z), clamped to [clip, 1 - clip]."""
        return np.clip(predict_proba(self.model, points)[:, 1], clip, 1.0 - clip)

    def ratio(self, points: np.ndarray, clip: float = PROBABILITY_CLIP) -> np.ndarray:
        p = self.target_probability(points, clip)
        return p / (1.0 - p) * (self.n_source / self.n_target)


def _holdout_split(
    n: int, fraction: float, seed: RngSeed
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (fit, holdout) split with at least one row on each side."""
    n_holdout = min(max(int(round(fraction * n)), 1), n - 1)
    permutation = seed.generator().permutation(n)
    return np.sort(permutation[n_holdout:]), np.sort(permutation[:n_holdout])


def fit_provenance_classifier(
    source: Dataset,
    target: Dataset,
    view: Optional[RatioView] = None,
    classifier_spec: Optional[ModelSpec] = None,
    seed: Union[RngSeed, int] = 0,
    holdout_fraction: float = CALIBRATION_HOLDOUT_FRACTION,
) -> ProvenanceClassifier:
    """
    Fits the T-classifier on a stratified 80% slice of the pooled rows and
    Platt-calibrates it on the remaining slice, where the AUC is also measured.

    Raises:
        WeightError: Fewer than two rows on a side, or the classifier or
            its calibration cannot be fitted.
    """
    view = view or RatioView()
    spec = classifier_spec or ModelSpec.from_name(DEFAULT_CLASSIFIER)
    if source.n_rows < 2 or target.n_rows < 2:
        raise WeightError(
            f"Need at least two source and two target rows, got {source.n_rows} and {target.n_rows}."
        )
    seed = as_seed(seed)
    z_source, z_target = view.matrix(source), view.matrix(target)
    if z_source.shape[1] != z_target.shape[1]:
        raise WeightError(
            f"Source and target views have {z_source.shape[1]} and {z_target.shape[1]} columns."
        )
    fit_s, hold_s = _holdout_split(source.n_rows, holdout_fraction, seed.substream("holdout", "source"))
    fit_t, hold_t = _holdout_split(target.n_rows, holdout_fraction, seed.substream("holdout", "target"))

    def pooled(rows_s, rows_t) -> Dataset:
        return Dataset(
            features=np.vstack([z_source[rows_s], z_target[rows_t]]),
            outputs=np.concatenate([np.zeros(rows_s.size), np.ones(rows_t.size)]),
            n_classes=2,
        )

    train, holdout = pooled(fit_s, fit_t), pooled(hold_s, hold_t)
    try:
        model = fit(spec, train)
        scores = decision_function(model, holdout)
        auc = float(roc_auc_score(holdout.outputs, scores))
        model = calibrate_platt(model, holdout)
    except CalibrationError as e:
        raise WeightError(f"Provenance classifier calibration failed: {e}") from None
    except LearnerError as e:
        raise WeightError(f"Provenance classifier fit failed: {e}") from None
    logger.debug("Provenance classifier held-out AUC %.4f", auc)
    return ProvenanceClassifier(
        model=model, view=view, auc=auc, n_source=source.n_rows, n_target=target.n_rows
    )


def discriminative_weights(
    classifier: ProvenanceClassifier,
    source: Dataset,
    clip: float = PROBABILITY_CLIP,
    normalization: str = NORMALIZE_MEAN_ONE,
) -> Tuple[WeightVector, RatioModel]:
    """
    Turns a fitted provenance classifier into weights at the source rows.

    Raises:
        WeightError: Every source probability pinned at the clipping bounds.
    """
    raw = predict_proba(classifier.model, classifier.view.matrix(source))[:, 1]
    at_bounds = (raw <= clip) | (raw >= 1.0 - clip)
    if at_bounds.all():
        raise WeightError(
            "All provenance probabilities sit at the clipping floor; "
            "source and target do not overlap."
        )
    if at_bounds.any():
        logger.info("Clipped %d provenance probabilities to [%g, %g]", at_bounds.sum(), clip, 1 - clip)
    if classifier.auc > DETECTOR_LOW_OVERLAP_AUC:
        warnings.warn(
            f"Provenance classifier AUC {classifier.auc:.3f} exceeds "
            f"{DETECTOR_LOW_OVERLAP_AUC}: little overlap, weights will be unstable.",
            LowOverlapWarning,
            stacklevel=3,
        )
    weights = WeightVector.build(
        classifier.ratio(classifier.view.matrix(source), clip),
        method="discriminative",
        normalization=normalization,
        clipped=int(at_bounds.sum()),
    )
    ratio_model = RatioModel(
        method="discriminative",
        view=classifier.view,
        components={"classifier": classifier.model, "auc": classifier.auc},
        evaluator=lambda points: classifier.ratio(points, clip),
    )
    return weights, ratio_model


def estimate_weights_discriminative(
    source: Dataset,
    target: Dataset,
    view: Optional[RatioView] = None,
    classifier_spec: Optional[ModelSpec] = None,
    seed: Union[RngSeed, int] = 0,
    clip: float = PROBABILITY_CLIP,
    normalization: str = NORMALIZE_MEAN_ONE,
) -> Tuple[WeightVector, RatioModel, float]:
    """
    Estimates importance weights at the source rows with a provenance classifier.

    Under the default 'x' view the target may be unlabeled.

    Returns:
        (weights, ratio model, held-out detector AUC).

    Raises:
        WeightError: Classifier failure, or every source probability pinned
            at the clipping bounds (no overlap).
    """
    classifier = fit_provenance_classifier(source, target, view, classifier_spec, seed)
    weights, ratio_model = discriminative_weights(classifier, source, clip, normalization)
    return weights, ratio_model, classifier.auc
