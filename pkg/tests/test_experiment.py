import numpy as np
import pytest

from shiftlab.core.experiment import (
    prepare_repetition,
    run_experiment,
    run_repetition,
    subsample_folds,
)
from shiftlab.core.report import EvaluationError
from shiftlab.core.scenarios import ScenarioConfig
from shiftlab.utils.config_manager import ExperimentConfig


def _label_shift_config(**overrides):
    settings = dict(
        scenario=ScenarioConfig(kind="label_shift", n_source=200, n_target=200),
        learners=("linear",),
        strategies=("baseline", "prior-correction"),
        train_pops=("source",),
        test_pops=("source", "target"),
        k=3,
        repetitions=2,
        metric="log_loss",
        seed=4,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def _covariate_shift_config(**overrides):
    settings = dict(
        scenario=ScenarioConfig(kind="covariate_shift", n_source=150, n_target=150),
        learners=("ridge",),
        strategies=("baseline", "reweighting"),
        train_pops=("source",),
        test_pops=("target",),
        k=3,
        repetitions=2,
        metric="mse",
        seed=1,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_report_has_one_strategy_record_per_cell():
    config = _label_shift_config()
    report = run_experiment(config)
    strategy_records = report.select(scope="strategy")
    assert [(r.strategy, r.test_pop) for r in strategy_records] == [
        ("baseline", "source"),
        ("baseline", "target"),
        ("prior-correction", "source"),
        ("prior-correction", "target"),
    ]
    assert all(r.repetitions == 2 and r.stderr is not None for r in strategy_records)
    assert len(report.select(scope="fold")) == 4 * 2 * 3
    assert report.metadata == {"scenario": "label_shift", "repetitions": 2, "k": 3}


def test_strategy_value_is_mean_of_repetition_means():
    config = _label_shift_config()
    report = run_experiment(config)
    cell = dict(learner="linear", strategy="baseline", train_pop="source", test_pop="target")
    folds = report.select(scope="fold", **cell)
    rep_means = [np.mean([r.value for r in folds if r.key.startswith(f"{rep}/")]) for rep in (0, 1)]
    assert report.value(scope="strategy", **cell) == pytest.approx(np.mean(rep_means))


def test_experiment_is_deterministic():
    config = _label_shift_config()
    assert run_experiment(config).to_jsonl() == run_experiment(config).to_jsonl()


def test_worker_count_does_not_change_the_report():
    config = _covariate_shift_config()
    assert run_experiment(config, n_jobs=1).to_jsonl() == run_experiment(config, n_jobs=2).to_jsonl()


def test_repetitions_draw_different_data():
    config = _label_shift_config()
    first = prepare_repetition(config, 0)
    second = prepare_repetition(config, 1)
    assert not first.populations["source"].equals(second.populations["source"])
    assert len(first.folds["target"]) == config.k


def test_single_repetition_has_no_standard_error():
    report = run_experiment(_label_shift_config(repetitions=1))
    assert all(r.stderr is None for r in report.select(scope="strategy"))


@pytest.mark.parametrize("method", ["discriminative", "kmm", "ulsif"])
def test_estimated_reweighting_methods_run(method):
    config = _covariate_shift_config(repetitions=1, reweighting_method=method)
    results = run_repetition(config, 0)
    scores = results[("ridge", "reweighting", "source", "target")]
    assert scores.shape == (3,)
    assert np.all(np.isfinite(scores))


def test_flattening_to_zero_matches_baseline():
    config = _covariate_shift_config(repetitions=1, flatten_lambda=0.0)
    results = run_repetition(config, 0)
    np.testing.assert_allclose(
        results[("ridge", "reweighting", "source", "target")],
        results[("ridge", "baseline", "source", "target")],
    )


def test_same_population_cells_ignore_weights():
    config = _covariate_shift_config(repetitions=1, test_pops=("source",))
    results = run_repetition(config, 0)
    np.testing.assert_array_equal(
        results[("ridge", "reweighting", "source", "source")],
        results[("ridge", "baseline", "source", "source")],
    )


def test_failing_cell_is_named():
    config = _covariate_shift_config(strategies=("regress-out",))
    with pytest.raises(EvaluationError, match="strategy=regress-out"):
        run_experiment(config)


def _selection_config(**overrides):
    settings = dict(
        scenario=ScenarioConfig(kind="selection", n_source=400, n_target=400, params={"subkind": "b"}),
        learners=("ridge",),
        strategies=("baseline", "reweighting"),
        train_pops=("source", "target"),
        test_pops=("source", "target"),
        k=4,
        repetitions=1,
        metric="mse",
        seed=2,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_selected_rows_are_never_scored_on_themselves():
    rep = prepare_repetition(_selection_config(), 0)
    source_rows = rep.truth.source_rows
    population = rep.populations["target"]
    np.testing.assert_array_equal(
        rep.populations["source"].features, population.take(source_rows).features
    )
    for (source_train, source_test), (target_train, target_test) in zip(
        rep.folds["source"], rep.folds["target"]
    ):
        assert np.intersect1d(source_rows[source_train], target_test).size == 0
        assert np.intersect1d(target_train, source_rows[source_test]).size == 0
    held_out = np.sort(np.concatenate([test for _, test in rep.folds["source"]]))
    np.testing.assert_array_equal(held_out, np.arange(source_rows.size))


def test_selection_experiment_runs_every_cell():
    results = run_repetition(_selection_config(), 0)
    assert len(results) == 8
    assert all(np.all(np.isfinite(scores)) for scores in results.values())


def test_subsample_folds_need_rows_in_every_fold():
    parent = [(np.array([2, 3]), np.array([0, 1])), (np.array([0, 1]), np.array([2, 3]))]
    folds = subsample_folds(parent, np.array([1, 3]))
    np.testing.assert_array_equal(folds[0][1], [0])
    np.testing.assert_array_equal(folds[1][0], [0])
    with pytest.raises(EvaluationError, match="Fold 1 holds none"):
        subsample_folds(parent, np.array([0, 1]))
