# commands/common.py
"""
Helpers shared by the command modules: the diagnostic console, CSV schema
resolution and the mapping from library errors to exit statuses.
"""

import sys
import traceback
from pathlib import Path
from typing import List, NoReturn, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.markup import escape

from ..constants import EXIT_RUNTIME_FAILURE, SCHEMA_TEXT_NAME
from ..core.corrections import CorrectionError
from ..core.dataset import (
    COVARIATE_PREFIX,
    ROLE_FEATURE,
    ROLE_GROUP,
    ROLE_OUTPUT,
    ROLE_WEIGHT,
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    Dataset,
    DatasetError,
    Schema,
    load_csv,
)
from ..core.report import EvaluationError
from ..core.scenarios import PositivityError, ScenarioError, check_priors
from ..learners import CalibrationError, LearnerError
from ..utils.config_manager import ConfigError
from ..utils.output_manager import OutputError
from ..weights import ConvergenceError, WeightError

# Diagnostics only; results go to stdout through typer.echo
console_stderr = Console(stderr=True, style="dim")  # For status, errors, tables

TASK_AUTO = "auto"
TASK_CHOICES = (TASK_AUTO, TASK_REGRESSION, TASK_CLASSIFICATION)
# Columns the simulator writes next to the data that are never features.
RESERVED_COLUMNS = ("true_weight", "selection_prob")

# Most specific first.
ERROR_AREAS: List[Tuple[type, str]] = [
    (DatasetError, "Dataset"),
    (PositivityError, "Positivity"),
    (ScenarioError, "Scenario"),
    (CalibrationError, "Calibration"),
    (LearnerError, "Learner"),
    (ConvergenceError, "Convergence"),
    (WeightError, "Weight"),
    (CorrectionError, "Correction"),
    (EvaluationError, "Evaluation"),
    (ConfigError, "Configuration"),
    (OutputError, "Output"),
]


def fail(e: Exception) -> NoReturn:
    """Prints a library error to stderr and exits with the runtime-failure status."""
    area = next((label for kind, label in ERROR_AREAS if isinstance(e, kind)), "Runtime")
    console_stderr.print(f"[bold red]❌ {area} Error: {escape(str(e))}[/bold red]")
    raise typer.Exit(code=EXIT_RUNTIME_FAILURE)


def fail_unexpected(e: Exception) -> NoReturn:
    """Prints an unexpected exception with its traceback and exits."""
    console_stderr.print(
        f"[bold red]❌ An unexpected error occurred: {escape(str(e))}[/bold red]"
    )
    traceback.print_exc(file=sys.stderr)
    raise typer.Exit(code=EXIT_RUNTIME_FAILURE)


def parse_float_list(value: str, flag: str) -> List[float]:
    """
    Parses '0.9,0.1' into floats.

    Raises:
        typer.BadParameter: Naming `flag` when an item is not a number.
    """
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise typer.BadParameter(
            f"expected comma-separated numbers, got '{value}'", param_hint=flag
        )


def parse_prior_flag(value: str, flag: str, n_classes: Optional[int] = None) -> np.ndarray:
    """
    Parses and validates a class-prior vector given on the command line.

    Raises:
        typer.BadParameter: Naming `flag` when the vector is negative, does not
            sum to one, or has a length other than `n_classes`.
    """
    try:
        vector = check_priors(parse_float_list(value, flag), flag)
    except ScenarioError as e:
        raise typer.BadParameter(str(e), param_hint=flag)
    if n_classes is not None and vector.size != n_classes:
        raise typer.BadParameter(
            f"expected {n_classes} priors, one per probability column, got {vector.size}",
            param_hint=flag,
        )
    return vector


def _infer_task(path: Path, output: str) -> str:
    frame = pd.read_csv(path, usecols=[output], dtype=str, keep_default_na=False)
    values = pd.to_numeric(frame[output], errors="coerce").to_numpy(dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        return TASK_REGRESSION
    if np.all(values == np.round(values)) and np.all(values >= 0):
        return TASK_CLASSIFICATION
    return TASK_REGRESSION


def resolve_schema(
    path: Path,
    schema_text: Optional[str],
    output: Optional[str] = "y",
    covariates: Sequence[str] = (),
    task: str = TASK_AUTO,
) -> Schema:
    """
    Determines the column roles for `path`.

    An explicit schema wins: either 'col:role,...' text, or the path of a file
    holding that text (the simulator writes one next to its CSVs). Otherwise
    the output column, the listed covariates, 'group' and 'weight' get their
    roles and every other column becomes a feature. With task 'auto', an
    output of nonnegative integers is read as class labels.

    Raises:
        DatasetError: If the file cannot be read or a named column is absent.
    """
    if not path.is_file():
        raise DatasetError(f"File not found: {path}")
    if schema_text:
        candidate = Path(schema_text)
        if candidate.is_file():
            schema_text = candidate.read_text(encoding="utf-8").strip()
    else:
        sidecar = path.parent / SCHEMA_TEXT_NAME
        if sidecar.is_file() and not covariates:
            schema_text = sidecar.read_text(encoding="utf-8").strip()
    try:
        header = list(pd.read_csv(path, nrows=0).columns)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetError(f"Could not parse {path}: {e}") from None

    if schema_text:
        schema = Schema.parse(schema_text)
        roles = {c: r for c, r in schema.roles.items() if c in header or r != ROLE_OUTPUT}
    else:
        roles = {}
        for column in header:
            if column in RESERVED_COLUMNS:
                continue
            if column == output:
                roles[column] = ROLE_OUTPUT
            elif column in covariates:
                roles[column] = f"{COVARIATE_PREFIX}{column}"
            elif column == "group":
                roles[column] = ROLE_GROUP
            elif column == "weight":
                roles[column] = ROLE_WEIGHT
            else:
                roles[column] = ROLE_FEATURE
        missing = [c for c in covariates if c not in header]
        if missing:
            raise DatasetError(f"Covariate column(s) absent from {path}: {', '.join(missing)}")

    output_columns = [c for c, r in roles.items() if r == ROLE_OUTPUT]
    if task == TASK_AUTO:
        task = _infer_task(path, output_columns[0]) if output_columns else TASK_REGRESSION
    return Schema(roles=roles, task=task)


def load_dataset(
    path: Path,
    schema_text: Optional[str],
    output: Optional[str] = "y",
    covariates: Sequence[str] = (),
    task: str = TASK_AUTO,
) -> Dataset:
    """Resolves the schema of `path` and loads it."""
    return load_csv(path, resolve_schema(path, schema_text, output, covariates, task))


def check_same_features(source: Dataset, target: Dataset):
    """
    Raises:
        DatasetError: If the two datasets do not share their feature columns.
    """
    if source.column_names != target.column_names:
        raise DatasetError(
            "Feature schemas differ: source has "
            f"{', '.join(source.column_names)}; target has {', '.join(target.column_names)}."
        )
