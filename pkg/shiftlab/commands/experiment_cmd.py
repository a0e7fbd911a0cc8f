# commands/experiment_cmd.py
"""
Handles the 'experiment' command: runs a strategy-comparison grid from a
preset, a config file and flag overrides, and writes the reports.
"""

import io
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from ..constants import (
    CONFIG_SNAPSHOT_NAME,
    METRIC_CHOICES,
    PRESETS,
    REPORT_CSV_NAME,
    REPORT_JSONL_NAME,
    REPORT_TEXT_NAME,
    REWEIGHTING_METHODS,
    STRATEGY_CHOICES,
)
from ..core.errors import ShiftLabError
from ..core.experiment import run_experiment
from ..core.report import EvalReport
from ..utils.config_manager import SCENARIO_PARAM_PREFIX, ConfigManager, ExperimentConfig
from ..utils.output_manager import OutputManager
from .common import console_stderr, fail, fail_unexpected

logger = logging.getLogger(__name__)

REPORT_TEXT_WIDTH = 120


def strategy_table(report: EvalReport, title: str) -> Table:
    """Mean ± standard error per cell, in the report's cell order."""
    table = Table(title=title)
    for column in ("learner", "strategy", "train", "test", "metric", "mean", "stderr", "reps"):
        justify = "right" if column in ("mean", "stderr", "reps") else "left"
        table.add_column(column, justify=justify)
    frame = report.plot_frame()
    for row in frame.itertuples(index=False):
        stderr = "-" if row.stderr is None or row.stderr != row.stderr else f"{row.stderr:.4f}"
        table.add_row(
            row.learner,
            row.strategy,
            row.train_pop,
            row.test_pop,
            row.metric,
            f"{row.mean:.4f}",
            stderr,
            str(row.repetitions),
        )
    return table


def render_report_text(report: EvalReport, config: ExperimentConfig) -> str:
    """The strategy grid as a plain-text table, independent of the terminal."""
    buffer = io.StringIO()
    text_console = Console(file=buffer, width=REPORT_TEXT_WIDTH, color_system=None)
    title = (
        f"{config.scenario.kind}: {config.repetitions} repetition(s), "
        f"{config.k}-fold, seed {config.seed}"
    )
    text_console.print(strategy_table(report, title))
    return buffer.getvalue()


def _flag_overrides(**flags: Any) -> Dict[str, Any]:
    return {key: value for key, value in flags.items() if value is not None}


def experiment(
    config_path: Optional[Path] = typer.Option(
        None,
        "--config",
        "-c",
        help="Flat JSON configuration file.",
        exists=True,
        file_okay=True,
        dir_okay=False,
        readable=True,
        resolve_path=True,
    ),
    preset: Optional[str] = typer.Option(
        None, "--preset", help=f"Figure preset ({', '.join(PRESETS)}); lowest precedence."
    ),
    scenario: Optional[str] = typer.Option(
        None, "--scenario", "-s", help="Scenario alias or kind."
    ),
    n_source: Optional[int] = typer.Option(None, "--n-source", min=1, help="Source rows."),
    n_target: Optional[int] = typer.Option(None, "--n-target", min=1, help="Target rows."),
    learners: Optional[str] = typer.Option(
        None, "--learners", help="Comma-separated learner names."
    ),
    strategies: Optional[str] = typer.Option(
        None, "--strategies", help=f"Comma-separated subset of {', '.join(STRATEGY_CHOICES)}."
    ),
    train_pops: Optional[str] = typer.Option(None, "--train-pops", help="Training populations."),
    test_pops: Optional[str] = typer.Option(None, "--test-pops", help="Test populations."),
    k: Optional[int] = typer.Option(None, "--k", "-k", help="Folds per population."),
    repetitions: Optional[int] = typer.Option(None, "--repetitions", "-r", help="Scenario draws."),
    metric: Optional[str] = typer.Option(
        None, "--metric", help=f"Metric ({', '.join(METRIC_CHOICES)})."
    ),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Root seed."),
    reweighting_method: Optional[str] = typer.Option(
        None, "--reweighting-method", help=f"Weights source ({', '.join(REWEIGHTING_METHODS)})."
    ),
    reweighting_view: Optional[str] = typer.Option(
        None, "--reweighting-view", help="Ratio view, e.g. x, x+y, covariate:age."
    ),
    flatten_lambda: Optional[float] = typer.Option(
        None, "--flatten-lambda", help="Weight flattening exponent in [0, 1]."
    ),
    regress_out_covariate: Optional[str] = typer.Option(
        None, "--regress-out-covariate", help="Covariate removed by regress-out."
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", file_okay=False, help="Output directory."
    ),
    param: List[str] = typer.Option(
        [], "--param", "-p", help="Scenario parameter as key=value; repeatable."
    ),
    n_jobs: int = typer.Option(1, "--n-jobs", "-j", help="Parallel repetitions (joblib)."),
):
    """
    Runs every learner x strategy x train-pop x test-pop cell over the
    configured repetitions.

    Writes report.csv (plot-ready), report.txt, report.jsonl (every fold
    record) and config.json. Outputs appear only if every cell succeeds.
    """
    if preset is not None and preset not in PRESETS:
        raise typer.BadParameter(
            f"unknown preset '{preset}'; known: {', '.join(PRESETS)}", param_hint="--preset"
        )
    overrides = _flag_overrides(
        scenario=scenario,
        n_source=n_source,
        n_target=n_target,
        learners=learners,
        strategies=strategies,
        train_pops=train_pops,
        test_pops=test_pops,
        k=k,
        repetitions=repetitions,
        metric=metric,
        seed=seed,
        reweighting_method=reweighting_method,
        reweighting_view=reweighting_view,
        flatten_lambda=flatten_lambda,
        regress_out_covariate=regress_out_covariate,
        output_dir=None if out is None else str(out),
    )
    for item in param:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise typer.BadParameter(
                f"expected key=value, got '{item}'", param_hint="--param"
            )
        overrides[SCENARIO_PARAM_PREFIX + name.strip()] = value.strip()

    try:
        config = ConfigManager(config_path, preset).build(overrides)
        logger.info(
            "Running %d cell(s) x %d repetition(s)", len(config.cells), config.repetitions
        )
        report = run_experiment(config, n_jobs=n_jobs)
        report.metadata["seed"] = config.seed
        with OutputManager(config.output_dir) as outputs:
            outputs.stage(REPORT_CSV_NAME, report.write_plot_csv)
            outputs.stage_text(REPORT_TEXT_NAME, render_report_text(report, config))
            outputs.stage(REPORT_JSONL_NAME, report.write_jsonl)
            outputs.stage_text(CONFIG_SNAPSHOT_NAME, ConfigManager.snapshot(config))
        console_stderr.print(strategy_table(report, escape(config.scenario.kind)))
        typer.echo(str(config.output_dir / REPORT_CSV_NAME))
    except ShiftLabError as e:
        fail(e)
    except typer.Exit:
        raise
    except Exception as e:
        fail_unexpected(e)
