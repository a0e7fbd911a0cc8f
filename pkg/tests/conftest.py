import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from shiftlab.core.dataset import Dataset


@pytest.fixture
def runner():
    # click < 8.2 mixes stderr into stdout unless told otherwise.
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def regression_data(rng):
    """y = 1 + 2 x1 - 3 x2 plus small noise, with an 'age' covariate."""
    n = 200
    features = rng.normal(size=(n, 2))
    outputs = 1.0 + 2.0 * features[:, 0] - 3.0 * features[:, 1] + rng.normal(0.0, 0.1, n)
    return Dataset(
        features=features,
        outputs=outputs,
        covariates={"age": rng.uniform(20.0, 80.0, n)},
        column_names=("x1", "x2"),
    )


@pytest.fixture
def binary_data(rng):
    """Two overlapping Gaussian classes in 2-D."""
    n = 300
    labels = rng.integers(0, 2, n)
    features = rng.normal(size=(n, 2)) + 1.5 * labels[:, None]
    return Dataset(features=features, outputs=labels, column_names=("x1", "x2"), n_classes=2)


@pytest.fixture
def write_frame(tmp_path):
    """Writes a DataFrame as CSV under tmp_path and returns the path."""

    def _write(name, frame: pd.DataFrame):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
        return path

    return _write
