# commands/weights_cmd.py
"""
Handles the 'estimate-weights' and 'detect-shift' commands.

Both read a source and a target CSV with matching feature schemas. Results
(the weights file path, the verdict line) go to stdout; overlap diagnostics
go to stderr.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional

import typer
from rich.markup import escape
from rich.table import Table

from ..constants import (
    DEFAULT_OUTPUT_DIR,
    KMM_DEFAULT_BOUND,
    ULSIF_DEFAULT_RIDGE,
    WEIGHTS_CSV_NAME,
)
from ..core.errors import ShiftLabError
from ..core.evaluation import fit_shift_detector, verdict_for
from ..core.rng import RngSeed
from ..learners import LearnerError, ModelSpec
from ..utils.output_manager import OutputManager
from ..weights import (
    RatioView,
    WeightError,
    WeightVector,
    discriminative_weights,
    estimate_weights_discriminative,
    estimate_weights_kmm,
    estimate_weights_ulsif,
    flatten_weights,
    overlap_diagnostics,
    write_weights_csv,
)
from .common import (
    TASK_AUTO,
    check_same_features,
    console_stderr,
    fail,
    fail_unexpected,
    load_dataset,
)

logger = logging.getLogger(__name__)

ESTIMATOR_CHOICES = ("discriminative", "kmm", "ulsif")

SOURCE_OPTION = typer.Option(
    ..., "--source", exists=True, dir_okay=False, readable=True, help="Source CSV."
)
TARGET_OPTION = typer.Option(
    ..., "--target", exists=True, dir_okay=False, readable=True, help="Target CSV."
)


def _parse_view(view: str) -> RatioView:
    try:
        return RatioView.parse(view)
    except WeightError as e:
        raise typer.BadParameter(str(e), param_hint="--view")


def _covariates(values: Optional[str]) -> List[str]:
    return [item.strip() for item in (values or "").split(",") if item.strip()]


def diagnostics_table(weights: WeightVector, auc: Optional[float] = None) -> Table:
    """ESS, extreme weights and clip count of a weight vector."""
    table = Table(title=f"Weights ({escape(weights.method)})")
    table.add_column("diagnostic")
    table.add_column("value", justify="right")
    for name, value in overlap_diagnostics(weights).items():
        if name == "method":
            continue
        table.add_row(name, f"{value:.4g}" if isinstance(value, float) else str(value))
    if auc is not None:
        table.add_row("detector_auc", f"{auc:.4f}")
    return table


def estimate_weights(
    source: Path = SOURCE_OPTION,
    target: Path = TARGET_OPTION,
    method: str = typer.Option(
        "discriminative", "--method", "-m", help=f"Estimator ({', '.join(ESTIMATOR_CHOICES)})."
    ),
    view: str = typer.Option("x", "--view", help="Ratio view, e.g. x, x+y, covariate:age."),
    schema: Optional[str] = typer.Option(
        None, "--schema", help="Column roles 'col:role,...' or a file holding them."
    ),
    covariates: Optional[str] = typer.Option(
        None, "--covariates", help="Comma-separated covariate columns."
    ),
    output: str = typer.Option("y", "--output", help="Output column name."),
    bandwidth: Optional[float] = typer.Option(
        None, "--bandwidth", help="Kernel bandwidth (median heuristic when omitted)."
    ),
    upper_bound: float = typer.Option(
        KMM_DEFAULT_BOUND, "--upper-bound", help="KMM box bound on each weight."
    ),
    eps: Optional[float] = typer.Option(None, "--eps", help="KMM mean-constraint slack."),
    ridge: float = typer.Option(ULSIF_DEFAULT_RIDGE, "--ridge", help="uLSIF ridge."),
    centers: Optional[int] = typer.Option(None, "--centers", help="uLSIF basis centres."),
    flatten_lambda: float = typer.Option(
        1.0, "--flatten-lambda", min=0.0, max=1.0, help="Flattening exponent."
    ),
    seed: int = typer.Option(0, "--seed", min=0, help="Root seed."),
    out: Path = typer.Option(
        DEFAULT_OUTPUT_DIR, "--out", "-o", file_okay=False, help="Output directory."
    ),
):
    """
    Estimates importance weights p_target / p_source at the source rows.

    Writes weights.csv (one 'weight' column aligned to the source rows) and
    prints its path.
    """
    if method not in ESTIMATOR_CHOICES:
        raise typer.BadParameter(
            f"unknown method '{method}'; known: {', '.join(ESTIMATOR_CHOICES)}",
            param_hint="--method",
        )
    ratio_view = _parse_view(view)
    names = _covariates(covariates)
    try:
        source_data = load_dataset(source, schema, output, names, TASK_AUTO)
        target_data = load_dataset(target, schema, output, names, TASK_AUTO)
        check_same_features(source_data, target_data)
        stream = RngSeed(seed).substream("weights")
        auc = None
        if method == "discriminative":
            weights, _, auc = estimate_weights_discriminative(
                source_data, target_data, view=ratio_view, seed=stream
            )
        elif method == "kmm":
            weights = estimate_weights_kmm(
                ratio_view.matrix(source_data),
                ratio_view.matrix(target_data),
                bandwidth=bandwidth,
                upper_bound=upper_bound,
                eps=eps,
                seed=stream,
            )
        else:
            weights, _ = estimate_weights_ulsif(
                ratio_view.matrix(source_data),
                ratio_view.matrix(target_data),
                basis_centers=centers,
                ridge=ridge,
                bandwidth=bandwidth,
                seed=stream,
                view=ratio_view,
            )
        weights = flatten_weights(weights, flatten_lambda)
        with OutputManager(out) as outputs:
            path = outputs.stage(
                WEIGHTS_CSV_NAME, lambda staged: write_weights_csv(weights, staged)
            )
        console_stderr.print(diagnostics_table(weights, auc))
        typer.echo(str(path))
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)


def detect_shift(
    source: Path = SOURCE_OPTION,
    target: Path = TARGET_OPTION,
    view: str = typer.Option("x", "--view", help="Ratio view, e.g. x, x+y, covariate:age."),
    schema: Optional[str] = typer.Option(
        None, "--schema", help="Column roles 'col:role,...' or a file holding them."
    ),
    covariates: Optional[str] = typer.Option(
        None, "--covariates", help="Comma-separated covariate columns."
    ),
    output: str = typer.Option("y", "--output", help="Output column name."),
    classifier: str = typer.Option("linear", "--classifier", help="Provenance classifier."),
    seed: int = typer.Option(0, "--seed", min=0, help="Root seed."),
):
    """
    Classifier two-sample test between source and target.

    Prints one line: the verdict (NoEvidenceOfShift, Shifted, LowOverlap), the
    held-out AUC and the effective sample size of the implied weights.
    """
    ratio_view = _parse_view(view)
    names = _covariates(covariates)
    try:
        spec = ModelSpec.from_name(classifier)
    except LearnerError as e:
        raise typer.BadParameter(str(e), param_hint="--classifier")
    try:
        source_data = load_dataset(source, schema, output, names, TASK_AUTO)
        target_data = load_dataset(target, schema, output, names, TASK_AUTO)
        check_same_features(source_data, target_data)
        stream = RngSeed(seed).substream("detector")
        classifier = fit_shift_detector(
            source_data, target_data, view=ratio_view, seed=stream, classifier_spec=spec
        )
        auc, verdict = classifier.auc, verdict_for(classifier.auc)
        try:
            weights, _ = discriminative_weights(classifier, source_data)
            ess = weights.effective_sample_size
            console_stderr.print(diagnostics_table(weights, auc))
        except WeightError as e:
            logger.warning("No weights for the ESS: %s", e)
            ess = math.nan
        typer.echo(f"{verdict} auc={auc:.4f} ess={ess:.1f} n_source={source_data.n_rows}")
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)
