# utils/config_manager.py
"""
Loads, merges and validates experiment configurations.

A configuration is a flat JSON object. Keys name `ExperimentConfig` fields
(`learners`, `k`, `repetitions`, ...) or scenario parameters prefixed with
`scenario.` (`scenario.subkind`, `scenario.target_priors`, ...). Values are
scalars, lists, or comma-separated strings. Sources are merged with the
precedence preset < file < command-line flags.
"""

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from ..constants import (
    CLASSIFICATION_SCENARIOS,
    DEFAULT_OUTPUT_DIR,
    METRIC_CHOICES,
    PRESETS,
    REWEIGHTING_METHODS,
    SCENARIO_ALIASES,
    SCENARIO_DEFAULTS,
    SCENARIO_POPULATIONS,
    STRATEGY_CHOICES,
)
from ..core.errors import ShiftLabError
from ..core.scenarios import ScenarioConfig
from ..learners import ModelSpec
from ..weights import RatioView

SCENARIO_PARAM_PREFIX = "scenario."
LIST_KEYS = ("learners", "strategies", "train_pops", "test_pops")
INT_KEYS = ("n_source", "n_target", "k", "repetitions", "seed")
FLOAT_KEYS = ("flatten_lambda",)
TEXT_KEYS = (
    "scenario",
    "metric",
    "reweighting_method",
    "reweighting_view",
    "regress_out_covariate",
    "output_dir",
)
CONFIG_KEYS = LIST_KEYS + INT_KEYS + FLOAT_KEYS + TEXT_KEYS


class ConfigError(ShiftLabError):
    """Custom exception for configuration-related errors."""

    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A complete, validated experiment description.

    Attributes:
        scenario: Scenario kind, sizes and parameters (its seed is replaced per
            repetition by a sub-stream of `seed`).
        learners: Learner names resolved through `ModelSpec.from_name`.
        strategies: Subset of baseline, reweighting, regress-out, prior-correction.
        train_pops, test_pops: Population names of the scenario.
        k: Folds per population.
        repetitions: Independent scenario draws.
        metric: accuracy, mse, log_loss or brier.
        seed: Root seed of every random draw.
        reweighting_method: truth, discriminative, kmm or ulsif.
        reweighting_view: Ratio view for the estimators ('x', 'covariate:age', ...).
        flatten_lambda: Exponent applied to the weights before fitting.
        regress_out_covariate: Covariate removed by the regress-out strategy.
        output_dir: Where reports are written.
    """

    scenario: ScenarioConfig
    learners: Tuple[str, ...]
    strategies: Tuple[str, ...]
    train_pops: Tuple[str, ...]
    test_pops: Tuple[str, ...]
    k: int = 5
    repetitions: int = 1
    metric: str = "accuracy"
    seed: int = 0
    reweighting_method: str = "truth"
    reweighting_view: str = "x"
    flatten_lambda: float = 1.0
    regress_out_covariate: str = "age"
    output_dir: Path = DEFAULT_OUTPUT_DIR

    def __post_init__(self):
        for label in LIST_KEYS:
            object.__setattr__(self, label, tuple(getattr(self, label)))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.learners:
            raise ConfigError("An experiment needs at least one learner.")
        if not self.strategies:
            raise ConfigError("An experiment needs at least one strategy.")
        unknown = [s for s in self.strategies if s not in STRATEGY_CHOICES]
        if unknown:
            raise ConfigError(
                f"Unknown strateg(y/ies) {', '.join(unknown)}. Known: {', '.join(STRATEGY_CHOICES)}"
            )
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}.")
        if int(self.k) != self.k or self.k < 2:
            raise ConfigError(f"k must be an integer >= 2, got {self.k}.")
        if not self.train_pops or not self.test_pops:
            raise ConfigError("An experiment needs train and test populations.")
        populations = SCENARIO_POPULATIONS[self.scenario.kind]
        for pop in self.train_pops + self.test_pops:
            if pop not in populations:
                raise ConfigError(
                    f"Unknown population '{pop}' for scenario '{self.scenario.kind}'. "
                    f"Known: {', '.join(populations)}"
                )
        if self.metric not in METRIC_CHOICES:
            raise ConfigError(
                f"Unknown metric '{self.metric}'. Known: {', '.join(METRIC_CHOICES)}"
            )
        classification = self.scenario.kind in CLASSIFICATION_SCENARIOS
        if classification == (self.metric == "mse"):
            raise ConfigError(
                f"Metric '{self.metric}' does not fit scenario '{self.scenario.kind}'."
            )
        if "prior-correction" in self.strategies and not classification:
            raise ConfigError("prior-correction needs a classification scenario.")
        if self.reweighting_method not in REWEIGHTING_METHODS:
            raise ConfigError(
                f"Unknown reweighting method '{self.reweighting_method}'. "
                f"Known: {', '.join(REWEIGHTING_METHODS)}"
            )
        if not 0.0 <= self.flatten_lambda <= 1.0:
            raise ConfigError(f"flatten_lambda must lie in [0, 1], got {self.flatten_lambda}.")
        try:
            for name in self.learners:
                ModelSpec.from_name(name)
            RatioView.parse(self.reweighting_view)
        except ShiftLabError as e:
            raise ConfigError(str(e)) from e

    @property
    def classification(self) -> bool:
        return self.scenario.kind in CLASSIFICATION_SCENARIOS

    @property
    def specs(self) -> Dict[str, ModelSpec]:
        return {name: ModelSpec.from_name(name) for name in self.learners}

    @property
    def cells(self) -> List[Tuple[str, str, str, str]]:
        """(learner, strategy, train_pop, test_pop) in report order."""
        return [
            (learner, strategy, train_pop, test_pop)
            for learner in self.learners
            for strategy in self.strategies
            for train_pop in self.train_pops
            for test_pop in self.test_pops
        ]

    def to_flat(self) -> Dict[str, Any]:
        """The flat key-value form that `ConfigManager` reads back."""
        flat: Dict[str, Any] = {"scenario": self.scenario.kind}
        flat["n_source"] = self.scenario.n_source
        flat["n_target"] = self.scenario.n_target
        for f in fields(self):
            if f.name == "scenario":
                continue
            value = getattr(self, f.name)
            if f.name in LIST_KEYS:
                value = ",".join(value)
            elif isinstance(value, Path):
                value = str(value)
            flat[f.name] = value
        for name, value in self.scenario.params.items():
            flat[SCENARIO_PARAM_PREFIX + name] = _to_json_value(value)
        return flat


def _to_json_value(value: Any) -> Any:
    if isinstance(value, (tuple, list)):
        return [_to_json_value(v) for v in value]
    return value


def _split_list(value: Any, key: str) -> Tuple[str, ...]:
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",")]
    elif isinstance(value, (list, tuple)):
        items = [str(item).strip() for item in value]
    else:
        raise ConfigError(f"'{key}' must be a list or a comma-separated string, got {value!r}.")
    return tuple(item for item in items if item)


def _to_number(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"'{key}' expects numbers, got '{text}'.") from None


def _as_int(value: Any, key: str) -> int:
    number = _to_number(str(value), key) if isinstance(value, str) else value
    if isinstance(number, bool) or not isinstance(number, (int, float)) or int(number) != number:
        raise ConfigError(f"'{key}' must be an integer, got {value!r}.")
    return int(number)


def coerce_scenario_param(kind: str, name: str, value: Any) -> Any:
    """
    Converts a raw configuration value into the type of the scenario
    parameter's default.

    Strings are parsed by shape: "0.9,0.1" for number tuples, "0,0;2.5,2.5"
    for tuples of rows, "uniform,-1,1" for a law spec. Lists are turned
    into tuples recursively.

    Args:
        kind: Scenario kind whose defaults define the expected types.
        name: Parameter name without the `scenario.` prefix.
        value: Raw value from a preset, file or flag.

    Returns:
        The coerced value.

    Raises:
        ConfigError: If the parameter is unknown or the value cannot be parsed.
    """
    defaults = SCENARIO_DEFAULTS[kind]
    if name not in defaults:
        raise ConfigError(
            f"Unknown parameter 'scenario.{name}' for scenario '{kind}'. "
            f"Known: {', '.join(sorted(defaults))}"
        )
    default = defaults[name]
    key = SCENARIO_PARAM_PREFIX + name
    if isinstance(value, (list, tuple)):
        return tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in value)
    if not isinstance(value, str):
        return value
    if isinstance(default, str):
        return value.strip()
    if isinstance(default, tuple):
        if default and isinstance(default[0], tuple):
            return tuple(
                tuple(_to_number(item, key) for item in row.split(","))
                for row in value.split(";")
                if row.strip()
            )
        items = [item.strip() for item in value.split(",")]
        if default and isinstance(default[0], str):
            return (items[0],) + tuple(_to_number(item, key) for item in items[1:])
        return tuple(_to_number(item, key) for item in items)
    if isinstance(default, int):
        return _as_int(value, key)
    return _to_number(value, key)


class ConfigManager:
    """Handles loading and merging of flat experiment configurations."""

    def __init__(self, config_path: Optional[Path] = None, preset: Optional[str] = None):
        """
        Initializes the ConfigManager.

        Args:
            config_path: Optional path to a flat JSON configuration file.
            preset: Optional figure preset name used as the lowest layer.

        Raises:
            ConfigError: If the preset is unknown.
        """
        if preset is not None and preset not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset}'. Known: {', '.join(PRESETS)}")
        self.config_path = config_path
        self.preset = preset
        self._config: Optional[Dict[str, Any]] = None

    def load(self, force_reload: bool = False) -> Dict[str, Any]:
        """
        Loads the configuration file, if any.

        Uses an in-memory cache unless force_reload is True.

        Returns:
            The file's key-value mapping, or an empty dict without a file.

        Raises:
            ConfigError: If the file is missing, unreadable, not a JSON
                object, or holds unknown keys.
        """
        if self._config is not None and not force_reload:
            return self._config
        config_data: Dict[str, Any] = {}
        if self.config_path is not None:
            try:
                content = self.config_path.read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"Could not read config file ({self.config_path}): {e}")
            if content.strip():
                try:
                    loaded_json = json.loads(content)
                except json.JSONDecodeError as e:
                    raise ConfigError(
                        f"Error decoding config file ({self.config_path}): {e}"
                    ) from None
                if not isinstance(loaded_json, dict):
                    raise ConfigError(
                        f"Config file ({self.config_path}) does not contain a JSON object."
                    )
                config_data = loaded_json
        self._check_keys(config_data, str(self.config_path))
        self._config = config_data
        return self._config

    @staticmethod
    def _check_keys(data: Mapping[str, Any], origin: str):
        unknown = sorted(
            key
            for key in data
            if key not in CONFIG_KEYS and not key.startswith(SCENARIO_PARAM_PREFIX)
        )
        if unknown:
            raise ConfigError(
                f"Unknown configuration key(s) in {origin}: {', '.join(unknown)}. "
                f"Known: {', '.join(CONFIG_KEYS)}, scenario.<param>"
            )

    def merged(self, overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
        """
        Merges preset, file and overrides; `None` overrides are ignored.

        Raises:
            ConfigError: On unknown keys in any layer.
        """
        layers: Dict[str, Any] = dict(PRESETS[self.preset]) if self.preset else {}
        layers.update(self.load())
        flags = {k: v for k, v in (overrides or {}).items() if v is not None}
        self._check_keys(flags, "flags")
        layers.update(flags)
        return layers

    def build(self, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        """
        Produces the validated experiment configuration.

        Args:
            overrides: Flag values; they take precedence over file and preset.

        Returns:
            The validated ExperimentConfig.

        Raises:
            ConfigError: On missing, unknown or invalid settings.
            ScenarioError: On invalid scenario parameters.
        """
        data = self.merged(overrides)
        if "scenario" not in data:
            raise ConfigError("No scenario configured; use --preset, a config file or --scenario.")
        alias = str(data["scenario"])
        if alias in SCENARIO_ALIASES:
            kind = SCENARIO_ALIASES[alias]["kind"]
        elif alias in SCENARIO_DEFAULTS:
            kind = alias
        else:
            known = ", ".join(list(SCENARIO_ALIASES) + list(SCENARIO_DEFAULTS))
            raise ConfigError(f"Unknown scenario '{alias}'. Known: {known}")

        params = {
            key[len(SCENARIO_PARAM_PREFIX):]: coerce_scenario_param(
                kind, key[len(SCENARIO_PARAM_PREFIX):], value
            )
            for key, value in data.items()
            if key.startswith(SCENARIO_PARAM_PREFIX)
        }
        seed = _as_int(data.get("seed", 0), "seed")
        scenario = ScenarioConfig.from_alias(
            alias,
            n_source=_as_int(data.get("n_source", 1000), "n_source"),
            n_target=_as_int(data.get("n_target", 1000), "n_target"),
            seed=seed,
            **params,
        )
        kwargs: Dict[str, Any] = {"scenario": scenario, "seed": seed}
        for key in LIST_KEYS:
            if key not in data:
                raise ConfigError(f"Missing configuration key '{key}'.")
            kwargs[key] = _split_list(data[key], key)
        for key in ("k", "repetitions"):
            if key in data:
                kwargs[key] = _as_int(data[key], key)
        if "flatten_lambda" in data:
            value = data["flatten_lambda"]
            kwargs["flatten_lambda"] = (
                _to_number(value, "flatten_lambda") if isinstance(value, str) else float(value)
            )
        for key in TEXT_KEYS:
            if key != "scenario" and key in data:
                kwargs[key] = str(data[key])
        if "metric" not in kwargs:
            kwargs["metric"] = "accuracy" if scenario.kind in CLASSIFICATION_SCENARIOS else "mse"
        return ExperimentConfig(**kwargs)

    @staticmethod
    def snapshot(config: ExperimentConfig) -> str:
        """The configuration as JSON text, readable back through `ConfigManager`."""
        return json.dumps(config.to_flat(), indent=4, sort_keys=True) + "\n"
