import json

import numpy as np
import pandas as pd
import pytest

from shiftlab.core.report import EvalReport
from shiftlab.main import app


def _simulate(runner, out, *extra):
    result = runner.invoke(app, ["simulate", "--scenario", "fig5", "--n", "300", "--out", str(out), *extra])
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def simulated(runner, tmp_path):
    return _simulate(runner, tmp_path / "sim", "--seed", "3")


def test_version(runner):
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert result.stdout.strip() == "name: shiftlab version: 0.1.0"


def test_simulate_writes_every_table(simulated):
    names = sorted(p.name for p in simulated.iterdir())
    assert names == ["schema.txt", "source.csv", "target.csv", "truth.csv"]
    source = pd.read_csv(simulated / "source.csv")
    truth = pd.read_csv(simulated / "truth.csv")
    assert len(source) == len(truth) == 300
    assert list(truth.columns) == ["true_weight"]
    assert "y:output" in (simulated / "schema.txt").read_text(encoding="utf-8")


def test_simulate_is_byte_identical_for_the_same_seed(runner, tmp_path):
    first = _simulate(runner, tmp_path / "a", "--seed", "11")
    second = _simulate(runner, tmp_path / "b", "--seed", "11")
    for name in ("source.csv", "target.csv", "truth.csv", "schema.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_priors_flag(runner, tmp_path):
    out = _simulate(runner, tmp_path / "p", "--target-priors", "0.5,0.5", "--n-target", "2000")
    target = pd.read_csv(out / "target.csv")
    assert len(target) == 2000
    assert target["y"].mean() == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize(
    "args",
    [
        ["--scenario", "fig9"],
        ["--scenario", "fig4", "--target-priors", "0.5,0.5"],
        ["--scenario", "fig5", "--target-priors", "0.5,abc"],
        ["--scenario", "fig5", "--target-priors", "0.7,0.7"],
        ["--scenario", "fig5", "--param", "temperature=2"],
        ["--scenario", "fig5", "--param", "noequals"],
        ["--scenario", "fig5", "--n", "0"],
    ],
)
def test_simulate_usage_errors_exit_2(runner, tmp_path, args):
    result = runner.invoke(app, ["simulate", *args, "--out", str(tmp_path / "x")])
    assert result.exit_code == 2
    assert result.stdout == ""
    assert not (tmp_path / "x" / "source.csv").exists()


def test_simulate_runtime_error_exits_1_without_outputs(runner, tmp_path):
    out = tmp_path / "sel"
    result = runner.invoke(
        app, ["simulate", "--scenario", "fig3a", "--n", "15", "--param", "rate=0.1", "--out", str(out)]
    )
    assert result.exit_code == 1
    assert "Scenario Error" in result.stderr
    assert not any(p.suffix == ".csv" for p in out.glob("*"))


def test_estimate_weights_writes_aligned_file(runner, simulated, tmp_path):
    out = tmp_path / "weights"
    result = runner.invoke(
        app,
        [
            "estimate-weights",
            "--source", str(simulated / "source.csv"),
            "--target", str(simulated / "target.csv"),
            "--method", "discriminative",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert result.stdout.strip() == str(out / "weights.csv")
    weights = pd.read_csv(out / "weights.csv")["weight"].to_numpy()
    assert weights.shape == (300,)
    assert weights.mean() == pytest.approx(1.0)
    assert np.all(weights > 0)


@pytest.mark.parametrize("method", ["kmm", "ulsif"])
def test_kernel_estimators_from_the_command_line(runner, simulated, tmp_path, method):
    out = tmp_path / method
    result = runner.invoke(
        app,
        [
            "estimate-weights",
            "--source", str(simulated / "source.csv"),
            "--target", str(simulated / "target.csv"),
            "--method", method,
            "--flatten-lambda", "0.5",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(out / "weights.csv")) == 300


def test_estimate_weights_rejects_unknown_method_and_view(runner, simulated, tmp_path):
    base = [
        "estimate-weights",
        "--source", str(simulated / "source.csv"),
        "--target", str(simulated / "target.csv"),
        "--out", str(tmp_path / "w"),
    ]
    assert runner.invoke(app, base + ["--method", "oracle"]).exit_code == 2
    assert runner.invoke(app, base + ["--view", "z"]).exit_code == 2
    assert runner.invoke(app, base + ["--flatten-lambda", "2"]).exit_code == 2


def test_mismatched_feature_schemas_fail(runner, simulated, write_frame, tmp_path):
    other = write_frame("other/target.csv", pd.DataFrame({"a": [1.0, 2.0, 3.0], "y": [0, 1, 0]}))
    result = runner.invoke(
        app,
        [
            "estimate-weights",
            "--source", str(simulated / "source.csv"),
            "--target", str(other),
            "--out", str(tmp_path / "w"),
        ],
    )
    assert result.exit_code == 1
    assert "Dataset Error" in result.stderr


def test_detect_shift_on_exchangeable_samples(runner, tmp_path):
    out = _simulate(runner, tmp_path / "same", "--n", "600", "--target-priors", "0.5,0.5")
    result = runner.invoke(
        app,
        ["detect-shift", "--source", str(out / "source.csv"), "--target", str(out / "target.csv")],
    )
    assert result.exit_code == 0, result.output
    verdict, auc, ess, n_source = result.stdout.strip().split()
    assert verdict == "NoEvidenceOfShift"
    assert float(auc.split("=")[1]) < 0.6
    assert n_source == "n_source=600"
    assert float(ess.split("=")[1]) > 300


def test_detect_shift_sees_label_shift_through_outputs(runner, simulated):
    result = runner.invoke(
        app,
        [
            "detect-shift",
            "--source", str(simulated / "source.csv"),
            "--target", str(simulated / "target.csv"),
            "--view", "x+y",
        ],
    )
    assert result.exit_code == 0, result.output
    assert result.stdout.split()[0] in ("Shifted", "LowOverlap")


def test_detect_shift_fits_one_classifier(runner, simulated, monkeypatch):
    import shiftlab.core.evaluation as evaluation
    import shiftlab.weights.discriminative as discriminative

    calls = []
    original = discriminative.fit_provenance_classifier

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    monkeypatch.setattr(evaluation, "fit_provenance_classifier", counting)
    monkeypatch.setattr(discriminative, "fit_provenance_classifier", counting)
    result = runner.invoke(
        app,
        [
            "detect-shift",
            "--source", str(simulated / "source.csv"),
            "--target", str(simulated / "target.csv"),
        ],
    )
    assert result.exit_code == 0, result.output
    assert len(calls) == 1


def test_missing_input_file_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(
        app,
        ["detect-shift", "--source", str(tmp_path / "nope.csv"), "--target", str(tmp_path / "nope.csv")],
    )
    assert result.exit_code == 2


def test_evaluate_prints_a_jsonl_report(runner, simulated):
    result = runner.invoke(
        app,
        [
            "evaluate",
            "--train", str(simulated / "source.csv"),
            "--test", str(simulated / "target.csv"),
            "--learner", "linear",
            "--k", "3",
            "--metric", "log_loss",
        ],
    )
    assert result.exit_code == 0, result.output
    report = EvalReport.from_jsonl(result.stdout)
    assert report.metadata["metric"] == "log_loss"
    assert report.value(scope="overall", key="test") > 0
    assert len(report.select(scope="fold")) == 3
    assert report.value(scope="overall", key="cv") == pytest.approx(
        np.mean([r.value for r in report.select(scope="fold")])
    )


def test_evaluate_with_weights_and_saved_model(runner, simulated, tmp_path):
    weights_dir = tmp_path / "w"
    runner.invoke(
        app,
        [
            "estimate-weights",
            "--source", str(simulated / "source.csv"),
            "--target", str(simulated / "target.csv"),
            "--view", "x+y",
            "--out", str(weights_dir),
        ],
    )
    model_dir = tmp_path / "model"
    result = runner.invoke(
        app,
        [
            "evaluate",
            "--train", str(simulated / "source.csv"),
            "--test", str(simulated / "target.csv"),
            "--weights", str(weights_dir / "weights.csv"),
            "--k", "3",
            "--save-model", str(model_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    assert json.loads((model_dir / "model.json").read_text(encoding="utf-8"))
    assert EvalReport.from_jsonl(result.stdout).metadata["learner"] == "linear"


def test_evaluate_rejects_misaligned_weights(runner, simulated, tmp_path):
    path = tmp_path / "weights.csv"
    path.write_text("weight\n1.0\n1.0\n", encoding="utf-8")
    result = runner.invoke(
        app,
        [
            "evaluate",
            "--train", str(simulated / "source.csv"),
            "--test", str(simulated / "target.csv"),
            "--weights", str(path),
        ],
    )
    assert result.exit_code == 1
    assert "Weight Error" in result.stderr


def test_evaluate_subgroup_rows(runner, tmp_path):
    out = tmp_path / "age"
    result = runner.invoke(app, ["simulate", "--scenario", "fig1", "--n", "300", "--out", str(out)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        app,
        [
            "evaluate",
            "--train", str(out / "source.csv"),
            "--test", str(out / "target.csv"),
            "--subgroup", "age",
            "--bins", "3",
        ],
    )
    assert result.exit_code == 0, result.output
    report = EvalReport.from_jsonl(result.stdout)
    assert 1 <= len(report.select(scope="subgroup")) <= 3
    assert report.select(scope="summary", metric="worst_group_risk")


def test_evaluate_usage_errors(runner, simulated):
    base = ["evaluate", "--train", str(simulated / "source.csv"), "--test", str(simulated / "target.csv")]
    assert runner.invoke(app, base + ["--learner", "forest"]).exit_code == 2
    assert runner.invoke(app, base + ["--task", "ranking"]).exit_code == 2


# --- correct-priors ---


@pytest.fixture
def probs_csv(write_frame):
    return write_frame("probs.csv", pd.DataFrame({"p0": [0.5, 0.2], "p1": [0.5, 0.8]}))


def test_correct_priors_with_explicit_priors(runner, probs_csv, tmp_path):
    out = tmp_path / "corr"
    result = runner.invoke(
        app,
        [
            "correct-priors",
            "--probs", str(probs_csv),
            "--source-priors", "0.5,0.5",
            "--target-priors", "0.9,0.1",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert result.stdout.strip() == str(out / "corrected_probs.csv")
    corrected = pd.read_csv(out / "corrected_probs.csv")
    assert list(corrected.columns) == ["p0", "p1"]
    np.testing.assert_allclose(corrected.to_numpy()[0], [0.9, 0.1])


def test_correct_priors_from_source_labels(runner, probs_csv, write_frame, tmp_path):
    labels = write_frame("labels.csv", pd.DataFrame({"x": [0.0, 1.0, 2.0, 3.0], "y": [0, 0, 0, 1]}))
    out = tmp_path / "corr"
    result = runner.invoke(
        app,
        [
            "correct-priors",
            "--probs", str(probs_csv),
            "--source-labels", str(labels),
            "--target-priors", "0.75,0.25",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    # Source priors 0.75 / 0.25 equal the target priors: the identity.
    np.testing.assert_allclose(
        pd.read_csv(out / "corrected_probs.csv").to_numpy(), [[0.5, 0.5], [0.2, 0.8]]
    )


@pytest.mark.parametrize(
    "extra",
    [
        ["--target-priors", "0.9,abc", "--source-priors", "0.5,0.5"],
        ["--target-priors", "0.9,0.1"],
        ["--target-priors", "0.9,0.1", "--source-priors", "0.5,0.5", "--source-labels", "PROBS"],
    ],
)
def test_correct_priors_usage_errors(runner, probs_csv, tmp_path, extra):
    extra = [str(probs_csv) if item == "PROBS" else item for item in extra]
    result = runner.invoke(
        app, ["correct-priors", "--probs", str(probs_csv), "--out", str(tmp_path / "c"), *extra]
    )
    assert result.exit_code == 2


@pytest.mark.parametrize(
    "source, target, flag",
    [
        ("0.5,0.5", "0.8,0.3", "--target-priors"),
        ("0.5,0.5", "0.7,0.7", "--target-priors"),
        ("1.2,-0.2", "0.5,0.5", "--source-priors"),
        ("0.5,0.5", "0.5,0.25,0.25", "--target-priors"),
    ],
)
def test_correct_priors_invalid_prior_vectors_exit_2(
    runner, probs_csv, tmp_path, source, target, flag
):
    out = tmp_path / "c"
    result = runner.invoke(
        app,
        [
            "correct-priors",
            "--probs", str(probs_csv),
            "--source-priors", source,
            "--target-priors", target,
            "--out", str(out),
        ],
    )
    assert result.exit_code == 2
    assert flag in result.stderr
    assert result.stdout == ""
    assert not (out / "corrected_probs.csv").exists()


def test_correct_priors_undefined_correction_is_a_runtime_error(runner, probs_csv, tmp_path):
    out = tmp_path / "c"
    result = runner.invoke(
        app,
        [
            "correct-priors",
            "--probs", str(probs_csv),
            "--source-priors", "1,0",
            "--target-priors", "0.5,0.5",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 1
    assert "Correction Error" in result.stderr
    assert not (out / "corrected_probs.csv").exists()


# --- experiment ---


def test_experiment_writes_reports(runner, tmp_path):
    out = tmp_path / "exp"
    result = runner.invoke(
        app,
        [
            "experiment",
            "--preset", "fig5",
            "--n-source", "150",
            "--n-target", "150",
            "--repetitions", "2",
            "--k", "3",
            "--seed", "5",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert result.stdout.strip() == str(out / "report.csv")
    assert sorted(p.name for p in out.iterdir()) == [
        "config.json",
        "report.csv",
        "report.jsonl",
        "report.txt",
    ]
    frame = pd.read_csv(out / "report.csv")
    assert list(frame["strategy"]) == ["baseline", "prior-correction"]
    assert set(frame["repetitions"]) == {2}
    snapshot = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert snapshot["seed"] == 5
    assert snapshot["k"] == 3


def test_experiment_replays_from_its_snapshot(runner, tmp_path):
    first = tmp_path / "first"
    args = ["experiment", "--preset", "fig4", "--n-source", "100", "--n-target", "100", "-r", "2", "-k", "3"]
    assert runner.invoke(app, args + ["--out", str(first)]).exit_code == 0
    second = tmp_path / "second"
    result = runner.invoke(
        app, ["experiment", "--config", str(first / "config.json"), "--out", str(second)]
    )
    assert result.exit_code == 0, result.output
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()


def test_experiment_errors(runner, tmp_path):
    assert runner.invoke(app, ["experiment", "--preset", "fig9"]).exit_code == 2
    assert runner.invoke(app, ["experiment", "--preset", "fig4", "--param", "oops"]).exit_code == 2
    out = tmp_path / "bad"
    result = runner.invoke(
        app, ["experiment", "--preset", "fig4", "--strategies", "bagging", "--out", str(out)]
    )
    assert result.exit_code == 1
    assert "Configuration Error" in result.stderr
    assert not out.exists() or not any(out.iterdir())
