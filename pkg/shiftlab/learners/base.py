"""
Defines the model specification, fitted-model container, the abstract base
class every learner family implements, and the learner error types.
"""

import json
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..constants import LEARNER_FAMILIES, LEARNER_PRESETS
from ..core.errors import ShiftLabError

LOSS_SQUARED = "squared"
LOSS_LOGISTIC = "logistic"


class LearnerError(ShiftLabError):
    """Raised when a learner cannot be fitted or applied."""

    pass


class CalibrationError(LearnerError):
    """Raised when a probability calibration map cannot be fitted."""

    pass


@dataclass(frozen=True)
class ModelSpec:
    """
    Learner family plus its hyperparameters.

    Only the fields relevant to `family` are used: `degree` for
    polynomial, `bandwidth`/`ridge` for rbf_kernel, `rounds`/
    `learning_rate`/`max_depth` for boosted_stumps. `regularization` is the
    L2 strength of the linear families.
    """

    family: str
    regularization: float = 0.0
    loss: Optional[str] = None
    degree: int = 1
    bandwidth: float = 1.0
    ridge: float = 1e-3
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.family not in LEARNER_FAMILIES:
            raise LearnerError(
                f"Unknown learner family '{self.family}'. "
                f"Supported: {', '.join(LEARNER_FAMILIES)}"
            )
        loss = self.loss or LEARNER_FAMILIES[self.family]["default_loss"]
        if loss not in (LOSS_SQUARED, LOSS_LOGISTIC):
            raise LearnerError(f"Unknown loss '{loss}'.")
        if self.family == "logistic" and loss != LOSS_LOGISTIC:
            raise LearnerError("The logistic family only supports the logistic loss.")
        object.__setattr__(self, "loss", loss)
        if self.family == "linear_ridge":
            object.__setattr__(self, "degree", 1)
        if int(self.degree) != self.degree or self.degree < 1:
            raise LearnerError(f"degree must be a positive integer, got {self.degree}.")
        if self.regularization < 0:
            raise LearnerError(f"regularization must be >= 0, got {self.regularization}.")
        if self.bandwidth <= 0:
            raise LearnerError(f"bandwidth must be > 0, got {self.bandwidth}.")
        if self.ridge < 0:
            raise LearnerError(f"ridge must be >= 0, got {self.ridge}.")
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise LearnerError(f"rounds must be >= 1, got {self.rounds}.")
        if not 0 < self.learning_rate <= 1:
            raise LearnerError(f"learning_rate must lie in (0, 1], got {self.learning_rate}.")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise LearnerError(f"max_depth must be >= 1, got {self.max_depth}.")

    @classmethod
    def from_name(cls, name: str) -> "ModelSpec":
        """
        Builds a spec from a short name ('linear', 'rbf', 'boosting', 'ridge',
        'poly4') or 'poly:<degree>'.
        """
        key = name.strip().lower()
        if key.startswith("poly:"):
            try:
                degree = int(key.split(":", 1)[1])
            except ValueError:
                raise LearnerError(f"Malformed polynomial learner name '{name}'.") from None
            return cls(family="polynomial", degree=degree)
        if key not in LEARNER_PRESETS:
            raise LearnerError(
                f"Unknown learner '{name}'. Known: {', '.join(LEARNER_PRESETS)}, poly:<d>"
            )
        return cls(**LEARNER_PRESETS[key])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSpec":
        return cls(**data)


@dataclass(frozen=True)
class Standardizer:
    """Per-column (weighted) mean and scale captured at fit time."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray, weights: np.ndarray) -> "Standardizer":
        total = weights.sum()
        mean = weights @ features / total
        var = weights @ (features - mean) ** 2 / total
        scale = np.sqrt(var)
        # Constant columns are centred but not rescaled.
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Standardizer":
        return cls(mean=np.asarray(data["mean"], float), scale=np.asarray(data["scale"], float))


@dataclass(frozen=True)
class PlattMap:
    """Monotone sigmoid p(class 1) = expit(slope * decision + intercept)."""

    slope: float
    intercept: float


@dataclass(frozen=True, eq=False)
class Model:
    """
    A fitted predictor: its spec, parameters, standardization statistics,
    optional calibration map and solver diagnostics.

    `params` values are numpy arrays, floats, or lists of such (trees).
    """

    spec: ModelSpec
    params: Dict[str, Any]
    standardizer: Standardizer
    n_features: int
    n_classes: Optional[int] = None
    calibration: Optional[PlattMap] = None
    solver_info: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_classifier(self) -> bool:
        return self.n_classes is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "params": _encode(self.params),
            "standardizer": self.standardizer.to_dict(),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "calibration": None if self.calibration is None else asdict(self.calibration),
            "solver_info": _encode(self.solver_info),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Model":
        calibration = data.get("calibration")
        return cls(
            spec=ModelSpec.from_dict(data["spec"]),
            params=_decode(data["params"]),
            standardizer=Standardizer.from_dict(data["standardizer"]),
            n_features=int(data["n_features"]),
            n_classes=data.get("n_classes"),
            calibration=None if calibration is None else PlattMap(**calibration),
            solver_info=_decode(data.get("solver_info", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Model":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise LearnerError(f"Invalid model document: {e}") from None


_ARRAY_TAG = "__array__"


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return {_ARRAY_TAG: value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _decode(value: Any) -> Any:
    if isinstance(value, dict):
        if _ARRAY_TAG in value:
            return np.asarray(value[_ARRAY_TAG], dtype=value.get("dtype", "float64"))
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


class BaseLearner(ABC):
    """Abstract base class for the learner family implementations."""

    @abstractmethod
    def fit(
        self,
        spec: ModelSpec,
        features: np.ndarray,
        targets: np.ndarray,
        weights: np.ndarray,
        n_classes: Optional[int],
    ) -> Tuple[Dict[str, Any], Dict[str, Any]]:
        """
        Minimizes the weighted empirical risk on standardized features.

        Args:
            spec: The model specification.
            features: Standardized (n, d) matrix.
            targets: Real outputs, or integer class ids when n_classes is set.
            weights: Nonnegative (n,) weights, not all zero.
            n_classes: Class count for classification, else None.

        Returns:
            A tuple of (fitted parameters, solver diagnostics).

        Raises:
            LearnerError: If the problem is singular or otherwise unsolvable.
        """
        pass

    @abstractmethod
    def decision(
        self, spec: ModelSpec, params: Dict[str, Any], features: np.ndarray,
        n_classes: Optional[int],
    ) -> np.ndarray:
        """
        Raw scores on standardized features: (n,) for regression and binary
        classification (larger means class 1), (n, K) for multiclass.
        """
        pass

    @abstractmethod
    def probabilities(
        self, spec: ModelSpec, params: Dict[str, Any], features: np.ndarray,
        n_classes: int,
    ) -> np.ndarray:
        """Uncalibrated (n, K) class probabilities on standardized features."""
        pass
