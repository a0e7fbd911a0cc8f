"""
Centralized constants and default settings for the shiftlab toolkit.
"""

from pathlib import Path
from typing import Any, Dict, List

# --- Application Info ---
APP_NAME = "shiftlab"
APP_VERSION = "0.1.0"

# --- Output Paths ---
DEFAULT_OUTPUT_DIR: Path = Path("shiftlab-out")
REPORT_CSV_NAME = "report.csv"
REPORT_TEXT_NAME = "report.txt"
REPORT_JSONL_NAME = "report.jsonl"
CONFIG_SNAPSHOT_NAME = "config.json"
SOURCE_CSV_NAME = "source.csv"
TARGET_CSV_NAME = "target.csv"
TRUTH_CSV_NAME = "truth.csv"
SCHEMA_TEXT_NAME = "schema.txt"
MODEL_JSON_NAME = "model.json"
WEIGHTS_CSV_NAME = "weights.csv"
CORRECTED_CSV_NAME = "corrected_probs.csv"
WEIGHT_COLUMN = "weight"

# --- Exit Statuses ---
# Usage errors leave through typer.BadParameter with status 2.
EXIT_RUNTIME_FAILURE = 1

# --- Numeric Defaults ---
# Iterative solvers (logistic, Platt) stop on gradient norm or iteration cap.
SOLVER_GRADIENT_TOL: float = 1e-8
SOLVER_MAX_ITER: int = 500
# Relative condition number above which an unregularized system is singular.
SINGULAR_CONDITION: float = 1e12
# Probabilities from the provenance classifier are clamped to this band.
PROBABILITY_CLIP: float = 1e-6
# Smallest weight kept after an estimator clamps coefficients to zero,
# relative to the mean weight.
WEIGHT_FLOOR: float = 1e-8
MEAN_ONE_TOLERANCE: float = 1e-12
PRIOR_SUM_TOLERANCE: float = 1e-12
# Held-out slice used to calibrate the provenance classifier.
CALIBRATION_HOLDOUT_FRACTION: float = 0.2
# Kernel mean matching.
KMM_MAX_ITER: int = 10_000
KMM_OBJECTIVE_TOL: float = 1e-8
KMM_DEFAULT_BOUND: float = 1000.0
# uLSIF basis.
ULSIF_MAX_CENTERS: int = 100
ULSIF_DEFAULT_RIDGE: float = 1e-3
# Shift detector verdict bands (held-out AUC).
DETECTOR_SHIFT_AUC: float = 0.6
DETECTOR_LOW_OVERLAP_AUC: float = 0.95
# Minimum expected number of selected rows in a selection scenario.
MIN_EXPECTED_SELECTED: float = 10.0
# Quantiles defining the young / old strata of an age pool.
YOUNG_QUANTILE: float = 0.2
OLD_QUANTILE: float = 0.8

# --- Learner Families ---
# Structure describing every supported learner family.
LEARNER_FAMILIES: Dict[str, Dict[str, Any]] = {
    "linear_ridge": {"default_loss": "squared"},
    "logistic": {"default_loss": "logistic"},
    "polynomial": {"default_loss": "squared"},
    "rbf_kernel": {"default_loss": "squared"},
    "boosted_stumps": {"default_loss": "logistic"},
}

# Short learner names usable in configuration files and flags.
LEARNER_PRESETS: Dict[str, Dict[str, Any]] = {
    "ridge": {"family": "linear_ridge", "regularization": 0.0},
    "linear": {"family": "logistic", "regularization": 1e-3},
    "poly4": {"family": "polynomial", "degree": 4, "regularization": 0.0},
    "rbf": {
        "family": "rbf_kernel",
        "bandwidth": 0.5,
        "ridge": 1e-2,
        "loss": "squared",
    },
    "boosting": {
        "family": "boosted_stumps",
        "rounds": 60,
        "learning_rate": 0.2,
        "max_depth": 3,
    },
}

# --- Scenarios ---
SCENARIO_KINDS: List[str] = [
    "age_shift",
    "selection",
    "covariate_shift",
    "label_shift",
    "age_replica",
]

# Default parameters for each scenario kind. Every value is an implementation
# choice; the figures these scenarios echo do not print their parameters.
SCENARIO_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "age_shift": {
        "age_min": 20.0,
        "age_max": 80.0,
        "young_beta": (2.0, 5.0),
        "old_beta": (5.0, 2.0),
        "old_mix_source": 0.2,
        "old_mix_target": 0.8,
        "offset": 0.6,
        "noise": 0.12,
        "prevalence_slope": 4.0,
        "prevalence_center": 0.5,
    },
    "selection": {
        "subkind": "b",
        "noise_scale": 0.5,
        "rate": 0.5,
        "x_slope": 1.0,
        "m_slope": 2.0,
        "z_strength": 0.0,
    },
    "covariate_shift": {
        "coefficients": (0.0, 1.0, -0.6, 0.15),
        "noise": 0.3,
        "source_law": ("gaussian", 0.0, 1.0),
        "target_law": ("gaussian", 2.0, 0.7),
    },
    "label_shift": {
        "means": ((0.0, 0.0), (2.5, 2.5)),
        "scale": 1.0,
        "source_priors": (0.5, 0.5),
        "target_priors": (0.9, 0.1),
    },
    "age_replica": {
        "pool_size": 10_000,
        "n_features": 29,
        "young_old_fraction": 0.1,
        "old_old_fraction": 0.9,
        "age_min": 40.0,
        "age_max": 70.0,
        "age_effect": 3.0,
    },
}

# Scenario kinds whose outputs are class labels.
CLASSIFICATION_SCENARIOS: tuple = ("age_shift", "label_shift", "age_replica")

# Population names exposed by each scenario kind (source first).
SCENARIO_POPULATIONS: Dict[str, tuple] = {
    "age_shift": ("young", "old"),
    "selection": ("source", "target"),
    "covariate_shift": ("source", "target"),
    "label_shift": ("source", "target"),
    "age_replica": ("young", "old"),
}

# --- Experiment Strategies ---
STRATEGY_CHOICES: List[str] = [
    "baseline",
    "reweighting",
    "regress-out",
    "prior-correction",
]
REWEIGHTING_METHODS: List[str] = ["truth", "discriminative", "kmm", "ulsif"]
METRIC_CHOICES: List[str] = ["accuracy", "mse", "log_loss", "brier"]

# --- Figure Presets ---
# Flat experiment configurations, one per figure being reproduced.
PRESETS: Dict[str, Dict[str, Any]] = {
    "fig1": {
        "scenario": "age_shift",
        "n_source": 1000,
        "n_target": 1000,
        "learners": "linear,rbf",
        "strategies": "baseline,reweighting,regress-out",
        "train_pops": "young",
        "test_pops": "young,old",
        "k": 5,
        "repetitions": 20,
        "metric": "accuracy",
        "reweighting_method": "truth",
        "regress_out_covariate": "age",
    },
    "fig3a": {
        "scenario": "selection",
        "scenario.subkind": "a",
        "n_source": 2000,
        "n_target": 2000,
        "learners": "ridge",
        "strategies": "baseline,reweighting",
        "train_pops": "source",
        "test_pops": "source,target",
        "k": 5,
        "repetitions": 10,
        "metric": "mse",
        "reweighting_method": "truth",
    },
    "fig3b": {
        "scenario": "selection",
        "scenario.subkind": "b",
        "n_source": 2000,
        "n_target": 2000,
        "learners": "ridge",
        "strategies": "baseline,reweighting",
        "train_pops": "source",
        "test_pops": "source,target",
        "k": 5,
        "repetitions": 10,
        "metric": "mse",
        "reweighting_method": "truth",
    },
    "fig3c": {
        "scenario": "selection",
        "scenario.subkind": "c",
        "n_source": 2000,
        "n_target": 2000,
        "learners": "ridge",
        "strategies": "baseline,reweighting",
        "train_pops": "source",
        "test_pops": "source,target",
        "k": 5,
        "repetitions": 10,
        "metric": "mse",
        "reweighting_method": "truth",
    },
    "fig4": {
        "scenario": "covariate_shift",
        "n_source": 500,
        "n_target": 500,
        "learners": "ridge,poly4",
        "strategies": "baseline,reweighting",
        "train_pops": "source",
        "test_pops": "source,target",
        "k": 5,
        "repetitions": 20,
        "metric": "mse",
        "reweighting_method": "truth",
    },
    "fig5": {
        "scenario": "label_shift",
        "n_source": 1000,
        "n_target": 1000,
        "learners": "linear",
        "strategies": "baseline,prior-correction",
        "train_pops": "source",
        "test_pops": "target",
        "k": 5,
        "repetitions": 20,
        "metric": "log_loss",
    },
    "appB-replica": {
        "scenario": "age_replica",
        "n_source": 1000,
        "n_target": 1000,
        "learners": "linear,boosting",
        "strategies": "baseline,reweighting,regress-out",
        "train_pops": "young,old",
        "test_pops": "young,old",
        "k": 10,
        "repetitions": 10,
        "metric": "accuracy",
        "reweighting_method": "discriminative",
        "reweighting_view": "covariate:age",
        "regress_out_covariate": "age",
    },
}

# Scenario selectors accepted by `simulate --scenario`.
SCENARIO_ALIASES: Dict[str, Dict[str, Any]] = {
    "fig1": {"kind": "age_shift"},
    "fig3a": {"kind": "selection", "subkind": "a"},
    "fig3b": {"kind": "selection", "subkind": "b"},
    "fig3c": {"kind": "selection", "subkind": "c"},
    "fig4": {"kind": "covariate_shift"},
    "fig5": {"kind": "label_shift"},
    "appB-replica": {"kind": "age_replica"},
}
