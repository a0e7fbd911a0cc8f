"""
Tabular dataset representation, CSV ingestion and random splitting.

A `Dataset` is immutable once built: every array is copied and flagged
read-only, and all transformations return new values.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ShiftLabError
from .rng import RngSeed, as_seed

ROLE_FEATURE = "feature"
ROLE_OUTPUT = "output"
ROLE_GROUP = "group"
ROLE_WEIGHT = "weight"
COVARIATE_PREFIX = "covariate:"

TASK_REGRESSION = "regression"
TASK_CLASSIFICATION = "classification"


class DatasetError(ShiftLabError):
    """Raised for malformed input files, schema problems and invariant violations."""

    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    A tabular sample of n rows.

    Attributes:
        features: Real matrix of shape (n, d).
        outputs: Optional length-n vector; class ids in {0..K-1} when
            `n_classes` is set, real values otherwise.
        covariates: Named real columns of length n (age, contrast dose, ...).
        groups: Optional categorical column (site ids), stored as strings.
        weights: Optional nonnegative per-row weights, not all zero.
        column_names: Names of the d feature columns.
        n_classes: Number of classes K >= 2 for classification, else None.
    """

    features: np.ndarray
    outputs: Optional[np.ndarray] = None
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    groups: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    column_names: Tuple[str, ...] = ()
    n_classes: Optional[int] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise DatasetError(f"Features must be a matrix, got {features.ndim} dims.")
        n, d = features.shape
        object.__setattr__(self, "features", _frozen(features))

        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise DatasetError(
                f"Got {len(names)} column names for {d} feature columns."
            )
        object.__setattr__(self, "column_names", names)

        if self.outputs is not None:
            outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
            self._check_length("outputs", outputs, n)
            if self.n_classes is not None:
                outputs = self._check_labels(outputs, self.n_classes)
            object.__setattr__(self, "outputs", _frozen(outputs))
        elif self.n_classes is not None:
            self._check_class_count(self.n_classes)

        covariates: Dict[str, np.ndarray] = {}
        for name, column in dict(self.covariates).items():
            column = np.asarray(column, dtype=float).reshape(-1)
            self._check_length(f"covariate '{name}'", column, n)
            covariates[str(name)] = _frozen(column)
        object.__setattr__(self, "covariates", MappingProxyType(covariates))

        if self.groups is not None:
            groups = np.asarray(self.groups).astype(str).reshape(-1)
            self._check_length("groups", groups, n)
            object.__setattr__(self, "groups", _frozen(groups))

        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            self._check_length("weights", weights, n)
            check_weight_values(weights)
            object.__setattr__(self, "weights", _frozen(weights))

    @staticmethod
    def _check_length(label: str, column: np.ndarray, n: int):
        if column.shape[0] != n:
            raise DatasetError(f"Column {label} has {column.shape[0]} rows, expected {n}.")

    @staticmethod
    def _check_class_count(n_classes: int):
        if int(n_classes) != n_classes or n_classes < 2:
            raise DatasetError(f"Classification needs K >= 2 classes, got {n_classes}.")

    def _check_labels(self, outputs: np.ndarray, n_classes: int) -> np.ndarray:
        self._check_class_count(n_classes)
        if not np.all(np.isfinite(outputs)) or np.any(outputs != np.round(outputs)):
            raise DatasetError("Class labels must be integers.")
        if outputs.size and (outputs.min() < 0 or outputs.max() > n_classes - 1):
            raise DatasetError(f"Class labels must lie in {{0..{n_classes - 1}}}.")
        return outputs.astype(int)

    # --- Accessors ---

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_outputs(self) -> bool:
        return self.outputs is not None

    @property
    def is_classification(self) -> bool:
        return self.n_classes is not None

    def covariate(self, name: str) -> np.ndarray:
        """Returns a covariate column, raising DatasetError when it is absent."""
        try:
            return self.covariates[name]
        except KeyError:
            available = ", ".join(self.covariates) or "none"
            raise DatasetError(
                f"Covariate '{name}' not present (available: {available})."
            ) from None

    def require_outputs(self) -> np.ndarray:
        if self.outputs is None:
            raise DatasetError("Dataset has no outputs.")
        return self.outputs

    # --- Transformations (all return new datasets) ---

    def take(self, indices: Sequence[int]) -> "Dataset":
        """Returns the rows at `indices`, in that order."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[idx],
            outputs=None if self.outputs is None else self.outputs[idx],
            covariates={k: v[idx] for k, v in self.covariates.items()},
            groups=None if self.groups is None else self.groups[idx],
            weights=None if self.weights is None else self.weights[idx],
            column_names=self.column_names,
            n_classes=self.n_classes,
        )

    def with_weights(self, weights: Optional[np.ndarray]) -> "Dataset":
        return replace(self, weights=weights)

    def with_features(
        self, features: np.ndarray, column_names: Optional[Sequence[str]] = None
    ) -> "Dataset":
        names = tuple(column_names) if column_names is not None else ()
        if not names and np.asarray(features).shape[-1] == self.n_features:
            names = self.column_names
        return replace(self, features=features, column_names=names)

    def with_covariate(self, name: str, values: np.ndarray) -> "Dataset":
        covariates = dict(self.covariates)
        covariates[name] = values
        return replace(self, covariates=covariates)

    def equals(self, other: "Dataset") -> bool:
        """Exact structural and value equality."""

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            self.column_names == other.column_names
            and self.n_classes == other.n_classes
            and same(self.features, other.features)
            and same(self.outputs, other.outputs)
            and same(self.groups, other.groups)
            and same(self.weights, other.weights)
            and set(self.covariates) == set(other.covariates)
            and all(same(v, other.covariates[k]) for k, v in self.covariates.items())
        )


def check_weight_values(weights: np.ndarray, label: str = "weight"):
    """Validates the weight-column invariant: finite, nonnegative, not all zero."""
    if not np.all(np.isfinite(weights)):
        raise DatasetError(f"Non-finite {label} value.")
    if np.any(weights < 0):
        row = int(np.argmax(weights < 0))
        raise DatasetError(f"negative {label} at row {row}: {weights[row]}")
    if weights.size and not np.any(weights > 0):
        raise DatasetError(f"All {label} values are zero.")


# --- Schema ---


@dataclass(frozen=True)
class Schema:
    """
    Column-role mapping for CSV ingestion.

    Attributes:
        roles: Column name -> role, one of 'feature', 'output',
            'covariate:<name>', 'group', 'weight'.
        task: 'regression' or 'classification'.
        n_classes: Class count for classification; inferred when None.
    """

    roles: Mapping[str, str]
    task: str = TASK_REGRESSION
    n_classes: Optional[int] = None

    def __post_init__(self):
        if self.task not in (TASK_REGRESSION, TASK_CLASSIFICATION):
            raise DatasetError(f"Unknown task '{self.task}'.")
        counts: Dict[str, int] = {}
        for column, role in self.roles.items():
            if role not in (ROLE_FEATURE, ROLE_OUTPUT, ROLE_GROUP, ROLE_WEIGHT) and not (
                role.startswith(COVARIATE_PREFIX) and len(role) > len(COVARIATE_PREFIX)
            ):
                raise DatasetError(f"Column '{column}' has unknown role '{role}'.")
            counts[role] = counts.get(role, 0) + 1
        for role in (ROLE_OUTPUT, ROLE_GROUP, ROLE_WEIGHT):
            if counts.get(role, 0) > 1:
                raise DatasetError(f"At most one column may have role '{role}'.")
        if not counts.get(ROLE_FEATURE):
            raise DatasetError("Schema declares no feature column.")
        object.__setattr__(self, "roles", MappingProxyType(dict(self.roles)))

    @classmethod
    def parse(
        cls, text: str, task: str = TASK_REGRESSION, n_classes: Optional[int] = None
    ) -> "Schema":
        """Parses 'col:role,col:role' (e.g. 'x1:feature,age:covariate:age,y:output')."""
        roles: Dict[str, str] = {}
        for item in filter(None, (part.strip() for part in text.split(","))):
            column, sep, role = item.partition(":")
            if not sep or not column or not role:
                raise DatasetError(f"Malformed schema entry '{item}' (expected col:role).")
            roles[column] = role
        return cls(roles=roles, task=task, n_classes=n_classes)

    def columns_with(self, role: str) -> List[str]:
        return [c for c, r in self.roles.items() if r == role]

    def covariate_columns(self) -> Dict[str, str]:
        """Maps covariate name -> CSV column."""
        return {
            r[len(COVARIATE_PREFIX):]: c
            for c, r in self.roles.items()
            if r.startswith(COVARIATE_PREFIX)
        }

    def to_text(self) -> str:
        return ",".join(f"{c}:{r}" for c, r in self.roles.items())


def _parse_float(text: str) -> float:
    # Python's float() is correctly rounded, so written values read back exactly.
    try:
        return float(text)
    except ValueError:
        return np.nan


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    empty = raw.str.strip() == ""
    if empty.any():
        row = int(np.argmax(empty.to_numpy()))
        raise DatasetError(f"Empty cell in column '{column}' at data row {row + 1}.")
    values = raw.map(_parse_float).to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argmax(bad))
        raise DatasetError(
            f"Non-numeric cell '{raw.iloc[row]}' in column '{column}' at data row {row + 1}."
        )
    return values


def load_csv(path: Union[str, Path], schema: Schema) -> Dataset:
    """
    Reads a comma-separated UTF-8 file with a header row into a Dataset.

    Columns not named in the schema are ignored. Decimal separator is '.',
    scientific notation is accepted, empty cells are errors.

    Raises:
        DatasetError: Missing file, absent schema column, empty or
            non-numeric cell, zero data rows, or a violated invariant.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"File not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
            sep=",",
        )
    except pd.errors.EmptyDataError:
        raise DatasetError(f"File has no header row: {path}") from None
    except (UnicodeDecodeError, pd.errors.ParserError) as e:
        raise DatasetError(f"Could not parse {path}: {e}") from None

    missing = [c for c in schema.roles if c not in frame.columns]
    if missing:
        raise DatasetError(f"Column(s) named in schema absent from {path}: {', '.join(missing)}")
    if len(frame) == 0:
        raise DatasetError(f"File has zero data rows: {path}")

    feature_columns = [c for c in frame.columns if schema.roles.get(c) == ROLE_FEATURE]
    features = np.column_stack([_numeric_column(frame, c) for c in feature_columns])

    outputs = None
    n_classes = None
    output_columns = schema.columns_with(ROLE_OUTPUT)
    if output_columns:
        outputs = _numeric_column(frame, output_columns[0])
        if schema.task == TASK_CLASSIFICATION:
            if np.any(outputs != np.round(outputs)) or np.any(outputs < 0):
                raise DatasetError(
                    f"Column '{output_columns[0]}' must hold class ids 0..K-1."
                )
            n_classes = schema.n_classes or max(2, int(outputs.max()) + 1)

    covariates = {
        name: _numeric_column(frame, column)
        for name, column in schema.covariate_columns().items()
    }

    groups = None
    group_columns = schema.columns_with(ROLE_GROUP)
    if group_columns:
        groups = frame[group_columns[0]].to_numpy(dtype=str)
        if np.any(np.char.strip(groups) == ""):
            raise DatasetError(f"Empty cell in group column '{group_columns[0]}'.")

    weights = None
    weight_columns = schema.columns_with(ROLE_WEIGHT)
    if weight_columns:
        weights = _numeric_column(frame, weight_columns[0])
        check_weight_values(weights)

    return Dataset(
        features=features,
        outputs=outputs,
        covariates=covariates,
        groups=groups,
        weights=weights,
        column_names=tuple(feature_columns),
        n_classes=n_classes,
    )


def default_schema(data: Dataset, output_name: str = "y") -> Schema:
    """Schema matching the column layout `write_csv` produces by default."""
    roles: Dict[str, str] = {name: ROLE_FEATURE for name in data.column_names}
    if data.outputs is not None:
        roles[output_name] = ROLE_OUTPUT
    for name in data.covariates:
        roles[name] = f"{COVARIATE_PREFIX}{name}"
    if data.groups is not None:
        roles["group"] = ROLE_GROUP
    if data.weights is not None:
        roles["weight"] = ROLE_WEIGHT
    task = TASK_CLASSIFICATION if data.is_classification else TASK_REGRESSION
    return Schema(roles=roles, task=task, n_classes=data.n_classes)


def write_csv(
    data: Dataset, path: Union[str, Path], schema: Optional[Schema] = None
) -> Schema:
    """
    Writes a Dataset so that `load_csv(path, schema)` reproduces it exactly.

    Floats are written with their shortest round-tripping representation.

    Returns:
        The schema describing the written file.
    """
    schema = schema or default_schema(data)
    columns: Dict[str, np.ndarray] = {}
    feature_columns = schema.columns_with(ROLE_FEATURE)
    if len(feature_columns) != data.n_features:
        raise DatasetError(
            f"Schema names {len(feature_columns)} feature columns, dataset has {data.n_features}."
        )
    for j, column in enumerate(feature_columns):
        columns[column] = data.features[:, j]
    for column in schema.columns_with(ROLE_OUTPUT):
        columns[column] = data.require_outputs()
    for name, column in schema.covariate_columns().items():
        columns[column] = data.covariate(name)
    for column in schema.columns_with(ROLE_GROUP):
        if data.groups is None:
            raise DatasetError("Schema declares a group column but dataset has no groups.")
        columns[column] = data.groups
    for column in schema.columns_with(ROLE_WEIGHT):
        if data.weights is None:
            raise DatasetError("Schema declares a weight column but dataset has no weights.")
        columns[column] = data.weights

    frame = pd.DataFrame({c: columns[c] for c in schema.roles})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return schema


# --- Splitting ---


def split_indices(
    n: int, test_fraction: float, seed: Union[RngSeed, int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded disjoint (train, test) row-index partition, each side sorted."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must lie in (0, 1), got {test_fraction}.")
    if n < 2:
        raise DatasetError(f"Need at least 2 rows to split, got {n}.")
    # Half-up rounding: 2.5 test rows become 3.
    n_test = int(np.floor(test_fraction * n + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise DatasetError(
            f"test_fraction {test_fraction} leaves an empty side for n={n}."
        )
    permutation = as_seed(seed).generator().permutation(n)
    return np.sort(permutation[n_test:]), np.sort(permutation[:n_test])


def split(
    data: Dataset, test_fraction: float, seed: Union[RngSeed, int]
) -> Tuple[Dataset, Dataset]:
    """
    Randomly partitions the rows of `data` into (train, test).

    |test| = test_fraction * n rounded half up; the partition depends only on
    (n, test_fraction, seed).
    """
    train_idx, test_idx = split_indices(data.n_rows, test_fraction, seed)
    return data.take(train_idx), data.take(test_idx)
