# commands/evaluate_cmd.py
"""
Handles the 'evaluate' and 'correct-priors' commands.
"""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import typer
from rich.markup import escape
from rich.table import Table

from ..constants import CORRECTED_CSV_NAME, DEFAULT_OUTPUT_DIR, MODEL_JSON_NAME
from ..core.corrections import PriorPair, estimate_priors, label_shift_correct
from ..core.dataset import DatasetError
from ..core.errors import ShiftLabError
from ..core.evaluation import (
    cross_validate,
    default_metric,
    fold_report,
    importance_weighted_cv,
    risk,
    subgroup_report,
)
from ..core.report import SCOPE_OVERALL, EvalReport
from ..core.rng import RngSeed
from ..learners import LearnerError, ModelSpec, fit, save_model
from ..utils.output_manager import OutputManager
from ..weights import load_weights_csv
from .common import (
    TASK_AUTO,
    TASK_CHOICES,
    check_same_features,
    console_stderr,
    fail,
    fail_unexpected,
    load_dataset,
    parse_prior_flag,
)


def report_table(report: EvalReport, title: str) -> Table:
    table = Table(title=title)
    for column in ("scope", "metric", "key", "value", "count"):
        justify = "right" if column in ("value", "count") else "left"
        table.add_column(column, justify=justify)
    for record in report.records:
        table.add_row(
            record.scope,
            record.metric,
            escape(record.key),
            f"{record.value:.4f}",
            str(record.count) if record.count else "",
        )
    return table


def evaluate(
    train: Path = typer.Option(
        ..., "--train", exists=True, dir_okay=False, readable=True, help="Training CSV."
    ),
    test: Path = typer.Option(
        ..., "--test", exists=True, dir_okay=False, readable=True, help="Test CSV."
    ),
    learner: str = typer.Option("linear", "--learner", "-l", help="Learner name."),
    weights: Optional[Path] = typer.Option(
        None,
        "--weights",
        "-w",
        exists=True,
        dir_okay=False,
        readable=True,
        help="weights.csv aligned to the training rows.",
    ),
    metric: Optional[str] = typer.Option(None, "--metric", help="Metric (task default)."),
    subgroup: Optional[str] = typer.Option(
        None, "--subgroup", help="Covariate whose bins get their own rows."
    ),
    bins: int = typer.Option(4, "--bins", min=1, help="Equal-width bins for --subgroup."),
    k: Optional[int] = typer.Option(
        None, "--k", "-k", help="Also cross-validate on the training data (weighted: IWCV)."
    ),
    schema: Optional[str] = typer.Option(
        None, "--schema", help="Column roles 'col:role,...' or a file holding them."
    ),
    covariates: Optional[str] = typer.Option(
        None, "--covariates", help="Comma-separated covariate columns."
    ),
    output: str = typer.Option("y", "--output", help="Output column name."),
    task: str = typer.Option(TASK_AUTO, "--task", help=f"Task ({', '.join(TASK_CHOICES)})."),
    seed: int = typer.Option(0, "--seed", min=0, help="Root seed."),
    save: Optional[Path] = typer.Option(
        None, "--save-model", file_okay=False, help="Directory receiving model.json."
    ),
):
    """
    Fits a learner on the training CSV (optionally importance-weighted) and
    reports its risk on the test CSV.

    The report is printed to stdout as JSON lines; a readable table goes to stderr.
    """
    if task not in TASK_CHOICES:
        raise typer.BadParameter(
            f"unknown task '{task}'; known: {', '.join(TASK_CHOICES)}", param_hint="--task"
        )
    try:
        spec = ModelSpec.from_name(learner)
    except LearnerError as e:
        raise typer.BadParameter(str(e), param_hint="--learner")
    names = [item.strip() for item in (covariates or "").split(",") if item.strip()]
    if subgroup and subgroup not in names and not schema:
        names.append(subgroup)
    try:
        train_data = load_dataset(train, schema, output, names, task)
        test_data = load_dataset(test, schema, output, names, task)
        check_same_features(train_data, test_data)
        if not train_data.has_outputs or not test_data.has_outputs:
            raise DatasetError(f"Both files need the output column '{output}'.")
        weight_vector = (
            None if weights is None else load_weights_csv(weights, n_rows=train_data.n_rows)
        )
        chosen = metric or default_metric(test_data)
        model = fit(spec, train_data, weight_vector)

        report = EvalReport(metadata={"learner": learner, "metric": chosen, "seed": seed})
        report.add(
            SCOPE_OVERALL,
            chosen,
            risk(model, test_data, chosen),
            learner=learner,
            key="test",
            count=test_data.n_rows,
        )
        if k is not None:
            stream = RngSeed(seed).substream("folds")
            if weight_vector is None:
                scores = cross_validate(spec, train_data, k, stream, metric=chosen)
            else:
                scores = importance_weighted_cv(
                    spec, train_data, weight_vector, k, stream, metric=chosen
                )
            report.extend(fold_report(scores, chosen, learner=learner))
            report.add(
                SCOPE_OVERALL,
                chosen,
                float(np.mean(scores)),
                learner=learner,
                key="cv",
                count=train_data.n_rows,
            )
        if subgroup:
            report.extend(subgroup_report(model, test_data, subgroup, bins, chosen))
        if save is not None:
            with OutputManager(save) as outputs:
                outputs.stage(MODEL_JSON_NAME, lambda path: save_model(model, path))
        console_stderr.print(report_table(report, escape(f"{learner} on {test.name}")))
        typer.echo(report.to_jsonl(), nl=False)
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)


def _read_probabilities(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetError(f"Could not parse {path}: {e}") from None
    if frame.empty:
        raise DatasetError(f"File has zero data rows: {path}")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        column = numeric.columns[numeric.isna().any()][0]
        raise DatasetError(f"Non-numeric or empty cell in probability column '{column}'.")
    return numeric


def _priors_from_labels(path: Path, output: str, n_classes: int) -> np.ndarray:
    try:
        labels = pd.read_csv(path, usecols=[output])[output].to_numpy()
    except (ValueError, pd.errors.ParserError) as e:
        raise DatasetError(f"Could not read column '{output}' from {path}: {e}") from None
    return estimate_priors(labels, n_classes=n_classes)


def correct_priors(
    probs: Path = typer.Option(
        ...,
        "--probs",
        exists=True,
        dir_okay=False,
        readable=True,
        help="CSV of source-calibrated class probabilities, one column per class.",
    ),
    target_priors: str = typer.Option(
        ..., "--target-priors", help="Target priors, e.g. 0.9,0.1."
    ),
    source_priors: Optional[str] = typer.Option(
        None, "--source-priors", help="Source priors; estimated from --source-labels otherwise."
    ),
    source_labels: Optional[Path] = typer.Option(
        None,
        "--source-labels",
        exists=True,
        dir_okay=False,
        readable=True,
        help="Source CSV whose output column gives the source priors.",
    ),
    output: str = typer.Option("y", "--output", help="Output column of --source-labels."),
    out: Path = typer.Option(
        DEFAULT_OUTPUT_DIR, "--out", "-o", file_okay=False, help="Output directory."
    ),
):
    """
    Re-targets probabilities to new class priors with Bayes' rule.

    Writes corrected_probs.csv with the input's columns and prints its path.
    """
    if (source_priors is None) == (source_labels is None):
        raise typer.BadParameter(
            "give exactly one of --source-priors and --source-labels",
            param_hint="--source-priors",
        )
    try:
        frame = _read_probabilities(probs)
    except ShiftLabError as e:
        fail(e)
    n_classes = frame.shape[1]
    target = parse_prior_flag(target_priors, "--target-priors", n_classes)
    source = (
        None
        if source_priors is None
        else parse_prior_flag(source_priors, "--source-priors", n_classes)
    )
    try:
        if source is None:
            source = _priors_from_labels(source_labels, output, n_classes)
        pair = PriorPair(source_priors=np.asarray(source), target_priors=np.asarray(target))
        corrected = label_shift_correct(frame.to_numpy(dtype=float), pair)
        result = pd.DataFrame(corrected, columns=frame.columns)
        with OutputManager(out) as outputs:
            path = outputs.stage(
                CORRECTED_CSV_NAME,
                lambda staged: result.to_csv(
                    staged, index=False, lineterminator="\n", encoding="utf-8"
                ),
            )
        typer.echo(str(path))
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)
