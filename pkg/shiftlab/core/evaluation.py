"""
Risk computation, (importance-weighted and group-held-out) cross-validation,
subgroup reporting and two-sample shift detection.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import LeaveOneGroupOut

from ..constants import DETECTOR_LOW_OVERLAP_AUC, DETECTOR_SHIFT_AUC, METRIC_CHOICES
from ..learners import Model, ModelSpec, fit, predict, predict_proba
from ..weights import ProvenanceClassifier, RatioView, WeightError, fit_provenance_classifier
from .dataset import Dataset
from .report import (
    SCOPE_DETECTOR,
    SCOPE_FOLD,
    SCOPE_GROUP,
    SCOPE_SUBGROUP,
    SCOPE_SUMMARY,
    EvalReport,
    EvaluationError,
)
from .rng import RngSeed, as_seed

logger = logging.getLogger(__name__)

VERDICT_NO_SHIFT = "NoEvidenceOfShift"
VERDICT_SHIFTED = "Shifted"
VERDICT_LOW_OVERLAP = "LowOverlap"

LOG_LOSS_EPS = 1e-15
# Metrics where larger is better; their risk is 1 - score.
SCORE_METRICS = ("accuracy",)

Folds = List[Tuple[np.ndarray, np.ndarray]]


def default_metric(data: Dataset) -> str:
    return "accuracy" if data.is_classification else "mse"


def _check_metric(metric: str, classification: bool):
    if metric not in METRIC_CHOICES:
        raise EvaluationError(f"Unknown metric '{metric}'. Known: {', '.join(METRIC_CHOICES)}")
    if classification and metric == "mse":
        raise EvaluationError("Use 'brier' for the squared loss of a classifier.")
    if not classification and metric != "mse":
        raise EvaluationError(f"Metric '{metric}' needs classification outputs.")


def loss_from_probabilities(probs: np.ndarray, labels: np.ndarray, metric: str) -> np.ndarray:
    """Per-row metric values for a classifier's probability matrix."""
    _check_metric(metric, classification=True)
    labels = labels.astype(int)
    rows = np.arange(labels.shape[0])
    if metric == "accuracy":
        return (np.argmax(probs, axis=1) == labels).astype(float)
    if metric == "log_loss":
        return -np.log(np.clip(probs[rows, labels], LOG_LOSS_EPS, 1.0))
    indicators = np.zeros_like(probs)
    indicators[rows, labels] = 1.0
    return np.sum((probs - indicators) ** 2, axis=1)


def pointwise_loss(model: Model, data: Dataset, metric: Optional[str] = None) -> np.ndarray:
    """
    Per-row metric values of `model` on `data`.

    'mse' is the squared error of a regressor; 'accuracy' is 1 for a correct
    class and 0 otherwise; 'log_loss' and 'brier' use predicted probabilities.
    """
    if not data.has_outputs:
        raise EvaluationError("Evaluation data has no outputs.")
    metric = metric or default_metric(data)
    if model.is_classifier:
        return loss_from_probabilities(predict_proba(model, data), data.outputs, metric)
    _check_metric(metric, classification=False)
    return (data.outputs - predict(model, data)) ** 2


def _weight_values(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    values = np.asarray(getattr(weights, "values", weights), dtype=float).reshape(-1)
    if values.shape[0] != n:
        raise EvaluationError(f"Got {values.shape[0]} weights for {n} rows.")
    if not np.all(np.isfinite(values)) or np.any(values < 0) or not np.any(values > 0):
        raise EvaluationError("Weights must be finite, nonnegative and not all zero.")
    return values


def aggregate(losses: np.ndarray, weights=None) -> float:
    """Weighted average of per-row losses; uniform weights give the plain mean."""
    return float(np.average(losses, weights=_weight_values(losses.shape[0], weights)))


def risk(model: Model, data: Dataset, metric: Optional[str] = None, weights=None) -> float:
    """(Weight-)averaged metric of `model` over the rows of `data`."""
    return aggregate(pointwise_loss(model, data, metric), weights)


# --- Cross-validation ---


def kfold_indices(n: int, k: int, seed: Union[RngSeed, int]) -> Folds:
    """
    Seeded k-fold partition: permute 0..n-1, cut into k contiguous blocks
    (numpy.array_split sizes), block f is fold f's test set.
    """
    if int(k) != k or k < 2:
        raise EvaluationError(f"k must be an integer >= 2, got {k}.")
    if k > n:
        raise EvaluationError(f"k = {k} exceeds the {n} available rows.")
    permutation = as_seed(seed).generator().permutation(n)
    folds = []
    for block in np.array_split(permutation, int(k)):
        test = np.sort(block)
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        folds.append((train, test))
    return folds


def _fold_score(
    spec: ModelSpec,
    data: Dataset,
    train: np.ndarray,
    test: np.ndarray,
    train_weights: Optional[np.ndarray],
    test_weights: Optional[np.ndarray],
    metric: str,
) -> float:
    model = fit(spec, data.take(train), None if train_weights is None else train_weights[train])
    losses = pointwise_loss(model, data.take(test), metric)
    return aggregate(losses, None if test_weights is None else test_weights[test])


def _run_folds(
    spec: ModelSpec,
    data: Dataset,
    folds: Folds,
    train_weights: Optional[np.ndarray],
    test_weights: Optional[np.ndarray],
    metric: Optional[str],
    n_jobs: int,
) -> np.ndarray:
    metric = metric or default_metric(data)
    scores = Parallel(n_jobs=n_jobs)(
        delayed(_fold_score)(spec, data, train, test, train_weights, test_weights, metric)
        for train, test in folds
    )
    return np.asarray(scores, dtype=float)


def cross_validate(
    spec: ModelSpec,
    data: Dataset,
    k: int,
    seed: Union[RngSeed, int],
    weights=None,
    metric: Optional[str] = None,
    n_jobs: int = 1,
) -> np.ndarray:
    """
    Per-fold scores of `spec` refitted on each fold's complement.

    `weights`, when given, weight the training fits only; fold scores are
    plain averages.
    """
    folds = kfold_indices(data.n_rows, k, seed)
    train_weights = None if weights is None else _weight_values(data.n_rows, weights)
    return _run_folds(spec, data, folds, train_weights, None, metric, n_jobs)


def importance_weighted_cv(
    spec: ModelSpec,
    data: Dataset,
    weights,
    k: int,
    seed: Union[RngSeed, int],
    metric: Optional[str] = None,
    n_jobs: int = 1,
) -> np.ndarray:
    """
    Cross-validation in which both the training fits and the held-out losses
    are importance-weighted, so fold scores estimate the target risk.
    """
    folds = kfold_indices(data.n_rows, k, seed)
    values = _weight_values(data.n_rows, weights)
    return _run_folds(spec, data, folds, values, values, metric, n_jobs)


def _group_labels(data: Dataset, by: Optional[str]) -> np.ndarray:
    if by is None:
        if data.groups is None:
            raise EvaluationError("Dataset has no group column.")
        return data.groups
    return data.covariate(by).astype(str)


def group_kfold(data: Dataset, by: Optional[str] = None) -> Folds:
    """
    One split per distinct group: that group's rows are the test set.

    `by` names a covariate to group on; the dataset's group column by default.
    """
    labels = _group_labels(data, by)
    if np.unique(labels).size < 2:
        raise EvaluationError("Group-held-out splitting needs at least two groups.")
    splitter = LeaveOneGroupOut()
    return [
        (np.sort(train), np.sort(test))
        for train, test in splitter.split(data.features, groups=labels)
    ]


def group_cross_validate(
    spec: ModelSpec,
    data: Dataset,
    metric: Optional[str] = None,
    by: Optional[str] = None,
    weights=None,
    n_jobs: int = 1,
) -> EvalReport:
    """
    Leave-one-group-out scores, one 'group' record per held-out group, plus
    the worst-group risk and across-group risk variance.
    """
    metric = metric or default_metric(data)
    labels = _group_labels(data, by)
    folds = group_kfold(data, by)
    train_weights = None if weights is None else _weight_values(data.n_rows, weights)
    scores = _run_folds(spec, data, folds, train_weights, None, metric, n_jobs)
    report = EvalReport()
    for (_, test), score in zip(folds, scores):
        report.add(SCOPE_GROUP, metric, score, key=str(labels[test[0]]), count=int(test.size))
    _add_group_summary(report, metric, scores, np.array([t.size for _, t in folds]))
    return report


# --- Subgroups ---


def _as_risk(metric: str, values: np.ndarray) -> np.ndarray:
    return 1.0 - values if metric in SCORE_METRICS else values


def _add_group_summary(report: EvalReport, metric: str, scores: np.ndarray, counts: np.ndarray):
    risks = _as_risk(metric, np.asarray(scores, dtype=float))
    report.add(SCOPE_SUMMARY, "worst_group_risk", float(np.max(risks)), key=metric)
    report.add(SCOPE_SUMMARY, "group_risk_variance", float(np.var(risks)), key=metric)
    report.add(
        SCOPE_SUMMARY,
        "mean_group_risk",
        float(np.average(risks, weights=counts)),
        key=metric,
        count=int(np.sum(counts)),
    )


def bin_edges(values: np.ndarray, bins: Union[int, Sequence[float]]) -> np.ndarray:
    """Equal-width edges over the range of `values`, or the explicit edges given."""
    if np.isscalar(bins):
        if int(bins) != bins or bins < 1:
            raise EvaluationError(f"Bin count must be a positive integer, got {bins}.")
        low, high = float(values.min()), float(values.max())
        if high == low:
            high = low + 1.0
        return np.linspace(low, high, int(bins) + 1)
    edges = np.asarray(bins, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise EvaluationError("Explicit bin edges must be strictly increasing (>= 2 edges).")
    return edges


def subgroup_report(
    model: Model,
    data: Dataset,
    demographic: str,
    bins: Union[int, Sequence[float]] = 4,
    metric: Optional[str] = None,
) -> EvalReport:
    """
    Metric per demographic bin, with bin populations, the worst-group risk
    and the variance of the per-bin risks.

    Bins are half-open [lo, hi) except the last, which includes its upper
    edge; rows outside explicit edges are left out. Empty bins are skipped.
    """
    if data.n_rows == 0:
        raise EvaluationError("Cannot report on empty data.")
    metric = metric or default_metric(data)
    values = data.covariate(demographic)
    edges = bin_edges(values, bins)
    losses = pointwise_loss(model, data, metric)
    index = np.searchsorted(edges, values, side="right") - 1
    index[values == edges[-1]] = edges.size - 2
    report = EvalReport()
    scores, counts = [], []
    for b in range(edges.size - 1):
        rows = index == b
        if not rows.any():
            continue
        score = float(np.mean(losses[rows]))
        label = f"[{edges[b]:g}, {edges[b + 1]:g}{']' if b == edges.size - 2 else ')'}"
        report.add(SCOPE_SUBGROUP, metric, score, key=label, count=int(rows.sum()))
        scores.append(score)
        counts.append(int(rows.sum()))
    if not scores:
        raise EvaluationError(f"No rows fall inside the bins of '{demographic}'.")
    _add_group_summary(report, metric, np.array(scores), np.array(counts))
    return report


# --- Shift detection ---


def verdict_for(
    auc: float,
    shift_auc: float = DETECTOR_SHIFT_AUC,
    low_overlap_auc: float = DETECTOR_LOW_OVERLAP_AUC,
) -> str:
    if auc > low_overlap_auc:
        return VERDICT_LOW_OVERLAP
    if auc >= shift_auc:
        return VERDICT_SHIFTED
    return VERDICT_NO_SHIFT


def fit_shift_detector(
    source: Dataset,
    target: Dataset,
    view: Optional[RatioView] = None,
    seed: Union[RngSeed, int] = 0,
    classifier_spec: Optional[ModelSpec] = None,
) -> ProvenanceClassifier:
    """Fits the source-vs-target classifier behind the shift detector."""
    try:
        return fit_provenance_classifier(source, target, view, classifier_spec, seed)
    except WeightError as e:
        raise EvaluationError(f"Shift detector failed: {e}") from None


def shift_detector(
    source: Dataset,
    target: Dataset,
    view: Optional[RatioView] = None,
    seed: Union[RngSeed, int] = 0,
    classifier_spec: Optional[ModelSpec] = None,
    shift_auc: float = DETECTOR_SHIFT_AUC,
    low_overlap_auc: float = DETECTOR_LOW_OVERLAP_AUC,
) -> Tuple[float, str]:
    """
    Classifier two-sample test: held-out AUC of a source-vs-target classifier
    and its verdict band.

    Raises:
        EvaluationError: Fewer than two rows on either side, or a classifier failure.
    """
    classifier = fit_shift_detector(source, target, view, seed, classifier_spec)
    return classifier.auc, verdict_for(classifier.auc, shift_auc, low_overlap_auc)


def detector_report(auc: float, verdict: str) -> EvalReport:
    report = EvalReport()
    report.add(SCOPE_DETECTOR, "auc", auc, key=verdict)
    return report


def fold_report(scores: np.ndarray, metric: str, **labels) -> EvalReport:
    """One 'fold' record per fold score."""
    report = EvalReport()
    for f, score in enumerate(scores):
        report.add(SCOPE_FOLD, metric, score, key=str(f), **labels)
    return report
