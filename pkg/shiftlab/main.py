# main.py
"""
Main entry point for the shiftlab CLI.

Defines the Typer application and registers the top-level commands
'simulate', 'experiment', 'estimate-weights', 'detect-shift', 'evaluate',
'correct-priors' and 'version'.
"""

import logging

import typer
from rich.logging import RichHandler

from .commands import evaluate_cmd, experiment_cmd, simulate_cmd, weights_cmd
from .commands.common import console_stderr
from .constants import APP_NAME, APP_VERSION

# Create the main Typer application instance
app = typer.Typer(
    name=APP_NAME,
    help="Simulate dataset shift, estimate importance weights and compare correction strategies.",
    add_completion=True,
)


def configure_logging(verbose: bool):
    """Routes log records and Python warnings to a rich handler on stderr."""
    handler = RichHandler(console=console_stderr, show_path=False, markup=False)
    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing, RichHandler):
            root.removeHandler(existing)
    root.addHandler(handler)
    level = logging.DEBUG if verbose else logging.WARNING
    logging.getLogger(APP_NAME).setLevel(level)
    logging.getLogger("py.warnings").setLevel(logging.WARNING)
    logging.captureWarnings(True)


@app.callback()
def main_callback(
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Log solver progress and decisions (to stderr)."
    ),
):
    """Dataset-shift toolkit: seeded commands are reproducible; results go to stdout."""
    configure_logging(verbose)


# Register the top-level commands defined in the command modules
app.command("simulate")(simulate_cmd.simulate)
app.command("experiment")(experiment_cmd.experiment)
app.command("estimate-weights")(weights_cmd.estimate_weights)
app.command("detect-shift")(weights_cmd.detect_shift)
app.command("evaluate")(evaluate_cmd.evaluate)
app.command("correct-priors")(evaluate_cmd.correct_priors)


# Define the top-level 'version' command
@app.command("version")
def show_version():
    """Displays the application's version."""
    typer.echo(f"name: {APP_NAME} version: {APP_VERSION}")


# Entry point for running the script directly
if __name__ == "__main__":
    app()
