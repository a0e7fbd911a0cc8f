import numpy as np
import pandas as pd
import pytest

from shiftlab.core.dataset import (
    Dataset,
    DatasetError,
    Schema,
    default_schema,
    load_csv,
    split,
    split_indices,
    write_csv,
)


def test_vector_features_become_a_column():
    data = Dataset(features=[1.0, 2.0, 3.0])
    assert data.features.shape == (3, 1)
    assert data.column_names == ("x0",)


def test_dataset_is_read_only(regression_data):
    with pytest.raises(ValueError):
        regression_data.features[0, 0] = 99.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"outputs": [1.0, 2.0]},
        {"covariates": {"age": [1.0]}},
        {"weights": [1.0, -1.0, 1.0]},
        {"weights": [0.0, 0.0, 0.0]},
        {"outputs": [0, 1, 2], "n_classes": 2},
        {"outputs": [0, 1, 0.5], "n_classes": 2},
        {"outputs": [0, 0, 0], "n_classes": 1},
        {"column_names": ("a", "b")},
    ],
)
def test_invariant_violations_rejected(kwargs):
    with pytest.raises(DatasetError):
        Dataset(features=np.zeros((3, 1)), **kwargs)


def test_negative_weight_message_names_row():
    with pytest.raises(DatasetError, match="negative weight at row 1"):
        Dataset(features=np.zeros((3, 1)), weights=[1.0, -0.5, 1.0])


def test_missing_covariate_is_reported(regression_data):
    with pytest.raises(DatasetError, match="not present"):
        regression_data.covariate("dose")


def test_take_keeps_columns_aligned(regression_data):
    rows = [5, 0, 3]
    subset = regression_data.take(rows)
    np.testing.assert_array_equal(subset.features, regression_data.features[rows])
    np.testing.assert_array_equal(subset.outputs, regression_data.outputs[rows])
    np.testing.assert_array_equal(subset.covariate("age"), regression_data.covariate("age")[rows])


def test_split_sizes_and_disjointness(regression_data):
    train_idx, test_idx = split_indices(regression_data.n_rows, 0.25, seed=4)
    assert test_idx.size == 50
    assert np.intersect1d(train_idx, test_idx).size == 0
    np.testing.assert_array_equal(
        np.sort(np.concatenate([train_idx, test_idx])), np.arange(regression_data.n_rows)
    )


def test_split_is_deterministic(regression_data):
    first_train, first_test = split(regression_data, 0.3, seed=9)
    second_train, second_test = split(regression_data, 0.3, seed=9)
    assert first_train.equals(second_train)
    assert first_test.equals(second_test)


@pytest.mark.parametrize(
    "n, fraction, n_test", [(10, 0.3, 3), (10, 0.25, 3), (4, 0.125, 1), (6, 0.25, 2)]
)
def test_split_rounds_halves_up(n, fraction, n_test):
    train_idx, test_idx = split_indices(n, fraction, seed=0)
    assert (train_idx.size, test_idx.size) == (n - n_test, n_test)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.001])
def test_split_rejects_empty_sides(regression_data, fraction):
    with pytest.raises(DatasetError):
        split(regression_data, fraction, seed=0)


def test_csv_round_trip_is_exact(tmp_path, rng):
    data = Dataset(
        features=rng.normal(size=(20, 2)) * 1e-3,
        outputs=rng.integers(0, 3, 20),
        covariates={"age": rng.uniform(20, 80, 20)},
        groups=np.array(["site-a", "site-b"] * 10),
        weights=rng.uniform(0.1, 2.0, 20),
        column_names=("f1", "f2"),
        n_classes=3,
    )
    path = tmp_path / "data.csv"
    schema = write_csv(data, path)
    assert load_csv(path, schema).equals(data)


def test_schema_parse_and_text():
    schema = Schema.parse("x1:feature,age:covariate:age,y:output")
    assert schema.covariate_columns() == {"age": "age"}
    assert schema.to_text() == "x1:feature,age:covariate:age,y:output"


@pytest.mark.parametrize(
    "text",
    [
        "x1:feature,y:output,z:output",
        "x1:feature,y:label",
        "y:output",
        "x1",
    ],
)
def test_bad_schema_rejected(text):
    with pytest.raises(DatasetError):
        Schema.parse(text)


def test_load_ignores_unnamed_columns(write_frame):
    path = write_frame("d.csv", pd.DataFrame({"x": [1.0, 2.0], "note": ["a", "b"], "y": [0, 1]}))
    data = load_csv(path, Schema.parse("x:feature,y:output"))
    assert data.column_names == ("x",)
    assert data.n_rows == 2


def test_empty_cell_names_column_and_row(write_frame):
    path = write_frame("d.csv", pd.DataFrame({"x": ["1.0", ""], "y": ["1", "2"]}))
    with pytest.raises(DatasetError, match=r"column 'x' at data row 2"):
        load_csv(path, Schema.parse("x:feature,y:output"))


def test_non_numeric_cell_rejected(write_frame):
    path = write_frame("d.csv", pd.DataFrame({"x": ["1.0", "abc"], "y": ["1", "2"]}))
    with pytest.raises(DatasetError, match="Non-numeric cell 'abc'"):
        load_csv(path, Schema.parse("x:feature,y:output"))


def test_missing_schema_column_rejected(write_frame):
    path = write_frame("d.csv", pd.DataFrame({"x": [1.0]}))
    with pytest.raises(DatasetError, match="absent"):
        load_csv(path, Schema.parse("x:feature,y:output"))


def test_zero_rows_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="zero data rows"):
        load_csv(path, Schema.parse("x:feature,y:output"))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "nope.csv", Schema.parse("x:feature"))


def test_classification_infers_class_count(write_frame):
    path = write_frame("d.csv", pd.DataFrame({"x": [0.1, 0.2, 0.3], "y": [0, 2, 1]}))
    data = load_csv(path, Schema.parse("x:feature,y:output", task="classification"))
    assert data.n_classes == 3
    assert data.outputs.dtype.kind == "i"


def test_default_schema_lists_every_column(regression_data):
    schema = default_schema(regression_data)
    assert schema.roles == {
        "x1": "feature",
        "x2": "feature",
        "y": "output",
        "age": "covariate:age",
    }
