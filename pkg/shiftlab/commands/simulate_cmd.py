# commands/simulate_cmd.py
"""
Handles the 'simulate' command: draws a scenario and writes its source,
target and ground-truth tables.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import typer
from rich.markup import escape

from ..constants import (
    DEFAULT_OUTPUT_DIR,
    SCENARIO_ALIASES,
    SCENARIO_KINDS,
    SCHEMA_TEXT_NAME,
    SOURCE_CSV_NAME,
    TARGET_CSV_NAME,
    TRUTH_CSV_NAME,
)
from ..core.dataset import default_schema, write_csv
from ..core.errors import ShiftLabError
from ..core.scenarios import ScenarioConfig, generate
from ..utils.config_manager import ConfigError, coerce_scenario_param
from ..utils.output_manager import OutputManager
from .common import console_stderr, fail, fail_unexpected, parse_prior_flag


def _scenario_params(
    kind: str,
    params: List[str],
    source_priors: Optional[str],
    target_priors: Optional[str],
) -> Dict[str, Any]:
    """
    Collects `--param key=value` pairs and the prior flags into scenario parameters.

    Raises:
        typer.BadParameter: Naming the flag whose value is invalid.
    """
    resolved: Dict[str, Any] = {}
    for item in params:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise typer.BadParameter(
                f"expected key=value, got '{item}'", param_hint="--param"
            )
        try:
            resolved[name.strip()] = coerce_scenario_param(kind, name.strip(), value.strip())
        except ConfigError as e:
            raise typer.BadParameter(str(e), param_hint="--param")
    for flag, label, value in (
        ("--source-priors", "source_priors", source_priors),
        ("--target-priors", "target_priors", target_priors),
    ):
        if value is None:
            continue
        if kind != "label_shift":
            raise typer.BadParameter(
                f"only the label_shift scenario has class priors, not '{kind}'", param_hint=flag
            )
        resolved[label] = tuple(float(p) for p in parse_prior_flag(value, flag))
    return resolved


def simulate(
    scenario: str = typer.Option(
        ...,
        "--scenario",
        "-s",
        help=f"Scenario alias or kind ({', '.join(list(SCENARIO_ALIASES) + SCENARIO_KINDS)}).",
    ),
    n: Optional[int] = typer.Option(
        None, "--n", "-n", min=1, help="Rows per population (sets both sizes)."
    ),
    n_source: Optional[int] = typer.Option(None, "--n-source", min=1, help="Source rows."),
    n_target: Optional[int] = typer.Option(None, "--n-target", min=1, help="Target rows."),
    seed: int = typer.Option(0, "--seed", min=0, help="Root seed of every random draw."),
    out: Path = typer.Option(
        DEFAULT_OUTPUT_DIR, "--out", "-o", file_okay=False, help="Output directory."
    ),
    source_priors: Optional[str] = typer.Option(
        None, "--source-priors", help="Source class priors, e.g. 0.5,0.5 (label_shift only)."
    ),
    target_priors: Optional[str] = typer.Option(
        None, "--target-priors", help="Target class priors, e.g. 0.9,0.1 (label_shift only)."
    ),
    param: List[str] = typer.Option(
        [], "--param", "-p", help="Scenario parameter as key=value; repeatable."
    ),
):
    """
    Generates a scenario and writes source.csv, target.csv, truth.csv and schema.txt.

    truth.csv is aligned row-wise with source.csv. Identical flags and seed
    always produce byte-identical files.
    """
    if scenario in SCENARIO_ALIASES:
        kind = SCENARIO_ALIASES[scenario]["kind"]
    elif scenario in SCENARIO_KINDS:
        kind = scenario
    else:
        known = ", ".join(list(SCENARIO_ALIASES) + SCENARIO_KINDS)
        raise typer.BadParameter(
            f"unknown scenario '{scenario}'; known: {known}", param_hint="--scenario"
        )
    params = _scenario_params(kind, param, source_priors, target_priors)

    try:
        config = ScenarioConfig.from_alias(
            scenario,
            n_source=n_source or n or 1000,
            n_target=n_target or n or 1000,
            seed=seed,
            **params,
        )
        source, target, truth = generate(config)
        schema = default_schema(source)
        with OutputManager(out) as outputs:
            outputs.stage(SOURCE_CSV_NAME, lambda path: write_csv(source, path, schema))
            outputs.stage(TARGET_CSV_NAME, lambda path: write_csv(target, path, schema))
            outputs.stage(
                TRUTH_CSV_NAME,
                lambda path: pd.DataFrame(truth.columns()).to_csv(
                    path, index=False, lineterminator="\n", encoding="utf-8"
                ),
            )
            outputs.stage_text(SCHEMA_TEXT_NAME, schema.to_text() + "\n")
        console_stderr.print(
            f"✅ Wrote {source.n_rows} source and {target.n_rows} target rows "
            f"({escape(config.kind)}) to {escape(str(out))}"
        )
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)
