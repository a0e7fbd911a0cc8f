"""
Strategy-comparison experiments.

An experiment crosses learners x strategies x train populations x test
populations over repeated scenario draws. In repetition r, every population
is cut into k folds with its own seeded permutation; fold f trains on the
training population's fold-f complement and scores on the test population's
fold-f block, so same-population cells reduce to ordinary cross-validation.
A source subsampled from its target (selection) inherits the target's folds.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..learners import ModelSpec, fit, predict_proba
from ..weights import (
    RatioView,
    WeightVector,
    estimate_weights_discriminative,
    estimate_weights_kmm,
    estimate_weights_ulsif,
    flatten_weights,
    true_weights,
)
from ..utils.config_manager import ExperimentConfig
from .corrections import PriorPair, estimate_priors, fit_regress_out, label_shift_correct
from .dataset import Dataset
from .errors import ShiftLabError
from .evaluation import aggregate, kfold_indices, loss_from_probabilities, pointwise_loss
from .report import SCOPE_FOLD, SCOPE_STRATEGY, EvalReport, EvaluationError
from .rng import RngSeed
from .scenarios import GroundTruth, generate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RepetitionData:
    """One scenario draw with its per-population folds."""

    populations: Mapping[str, Dataset]
    truth: GroundTruth
    folds: Mapping[str, List[Tuple[np.ndarray, np.ndarray]]]
    seed: RngSeed


def repetition_seed(seed: int, repetition: int) -> RngSeed:
    return RngSeed(seed).substream("repetition", repetition)


def fold_seed(rep_seed: RngSeed, population: str) -> RngSeed:
    return rep_seed.substream("folds", population)


def subsample_folds(
    parent_folds: List[Tuple[np.ndarray, np.ndarray]], rows: np.ndarray
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Folds of a subsample that follow its parent population's folds: a
    subsample row is held out in fold f exactly when its parent row is, so
    no row is trained on in one population and scored in the other.

    Raises:
        EvaluationError: When a fold holds none of the subsample's rows.
    """
    folds = []
    for f, (_, parent_test) in enumerate(parent_folds):
        held_out = np.isin(rows, parent_test)
        if not held_out.any():
            raise EvaluationError(
                f"Fold {f} holds none of the {rows.size} subsampled rows; lower k."
            )
        folds.append((np.flatnonzero(~held_out), np.flatnonzero(held_out)))
    return folds


def prepare_repetition(config: ExperimentConfig, repetition: int) -> RepetitionData:
    """Generates the scenario draw and folds of one repetition."""
    rep_seed = repetition_seed(config.seed, repetition)
    scenario = replace(config.scenario, seed=rep_seed.substream("scenario"))
    source, target, truth = generate(scenario)
    names = scenario.populations
    populations = {names[0]: source, names[1]: target}
    folds = {
        name: kfold_indices(data.n_rows, config.k, fold_seed(rep_seed, name))
        for name, data in populations.items()
    }
    if truth.source_rows is not None:
        folds[names[0]] = subsample_folds(folds[names[1]], truth.source_rows)
    return RepetitionData(populations=populations, truth=truth, folds=folds, seed=rep_seed)


def _training_weights(
    config: ExperimentConfig,
    rep: RepetitionData,
    train: Dataset,
    train_pop: str,
    test_pop: str,
    reference: Dataset,
    fold: int,
) -> Optional[WeightVector]:
    """Importance weights moving the training population towards the test population."""
    if train_pop == test_pop:
        return None
    method = config.reweighting_method
    if method == "truth":
        ratio = true_weights(rep.truth, train).values
        source_name = config.scenario.populations[0]
        values = ratio if train_pop == source_name else 1.0 / ratio
        weights = WeightVector.build(values, method="truth")
    else:
        view = RatioView.parse(config.reweighting_view)
        seed = rep.seed.substream("weights", train_pop, fold)
        if method == "discriminative":
            weights, _, _ = estimate_weights_discriminative(train, reference, view=view, seed=seed)
        elif method == "kmm":
            weights = estimate_weights_kmm(view.matrix(train), view.matrix(reference), seed=seed)
        else:
            weights, _ = estimate_weights_ulsif(
                view.matrix(train), view.matrix(reference), seed=seed, view=view
            )
    return flatten_weights(weights, config.flatten_lambda)


def _fold_score(
    config: ExperimentConfig,
    rep: RepetitionData,
    spec: ModelSpec,
    strategy: str,
    train_pop: str,
    test_pop: str,
    fold: int,
) -> float:
    train_rows, _ = rep.folds[train_pop][fold]
    reference_rows, test_rows = rep.folds[test_pop][fold]
    train = rep.populations[train_pop].take(train_rows)
    test = rep.populations[test_pop].take(test_rows)

    if strategy == "baseline":
        return aggregate(pointwise_loss(fit(spec, train), test, config.metric))
    if strategy == "reweighting":
        reference = rep.populations[test_pop].take(reference_rows)
        weights = _training_weights(config, rep, train, train_pop, test_pop, reference, fold)
        return aggregate(pointwise_loss(fit(spec, train, weights), test, config.metric))
    if strategy == "regress-out":
        transform = fit_regress_out(train, config.regress_out_covariate)
        model = fit(spec, transform.apply(train))
        return aggregate(pointwise_loss(model, transform.apply(test), config.metric))
    # prior-correction: source priors from the training fold, target priors
    # from the labelled training fold of the test population.
    model = fit(spec, train)
    n_classes = train.n_classes
    reference = rep.populations[test_pop].take(reference_rows)
    priors = PriorPair(
        source_priors=estimate_priors(train.outputs, n_classes),
        target_priors=estimate_priors(reference.outputs, n_classes),
    )
    corrected = label_shift_correct(predict_proba(model, test), priors)
    return aggregate(loss_from_probabilities(corrected, test.outputs, config.metric))


def run_repetition(config: ExperimentConfig, repetition: int) -> Dict[Tuple[str, ...], np.ndarray]:
    """
    Fold scores of every cell for one repetition.

    Raises:
        EvaluationError: Naming the failing cell, when any cell fails.
    """
    rep = prepare_repetition(config, repetition)
    specs = config.specs
    results: Dict[Tuple[str, ...], np.ndarray] = {}
    for cell in config.cells:
        learner, strategy, train_pop, test_pop = cell
        try:
            results[cell] = np.array(
                [
                    _fold_score(config, rep, specs[learner], strategy, train_pop, test_pop, f)
                    for f in range(config.k)
                ]
            )
        except ShiftLabError as e:
            raise EvaluationError(
                f"Cell learner={learner} strategy={strategy} train={train_pop} "
                f"test={test_pop} repetition={repetition} failed: {e}"
            ) from e
    logger.debug("Finished repetition %d", repetition)
    return results


def run_experiment(config: ExperimentConfig, n_jobs: int = 1) -> EvalReport:
    """
    Runs every cell over all repetitions and aggregates them.

    Each cell's repetition value is the mean of its fold scores; the strategy
    record holds the mean over repetitions and its standard error. Records
    are ordered by cell and repetition, never by completion order.
    """
    per_repetition = Parallel(n_jobs=n_jobs)(
        delayed(run_repetition)(config, r) for r in range(config.repetitions)
    )
    report = EvalReport(
        metadata={"scenario": config.scenario.kind, "repetitions": config.repetitions, "k": config.k}
    )
    for cell in config.cells:
        learner, strategy, train_pop, test_pop = cell
        labels = dict(learner=learner, strategy=strategy, train_pop=train_pop, test_pop=test_pop)
        rep_values = []
        for r, results in enumerate(per_repetition):
            for f, score in enumerate(results[cell]):
                report.add(SCOPE_FOLD, config.metric, score, key=f"{r}/{f}", **labels)
            rep_values.append(float(np.mean(results[cell])))
        values = np.asarray(rep_values)
        stderr = (
            float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else None
        )
        report.add(
            SCOPE_STRATEGY,
            config.metric,
            float(np.mean(values)),
            stderr=stderr,
            repetitions=int(values.size),
            **labels,
        )
    return report
