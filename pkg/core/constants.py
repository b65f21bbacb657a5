"""Application-wide constants."""

from __future__ import annotations

import os
from pathlib import Path

VERSION = "1.0"

CONFIG_DIR = Path(os.path.expanduser("~/.config/explab"))
DATABASE_FILE = CONFIG_DIR / "explab.db"
LOG_FILE = CONFIG_DIR / "explab.log"
DEFAULT_OUTPUT_DIR = Path("runs")

MAX_LOG_SIZE = 50 * 1024 * 1024
LOG_RETENTION_DAYS = 30

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3
EXIT_INTERRUPTED = 130

# Numerical guards
SPHERE_NORM_FLOOR = 1e-12
NORMALIZER_STD_FLOOR = 1e-8
REWARD_STD_FLOOR = 1e-12
COST_CAP = 1e12
DEFAULT_SPECTRAL_TOL = 1e-9
SPECTRAL_MAX_SQUARINGS = 64
HINDSIGHT_REL_TOL = 1e-9
NEWTON_RIDGE = 1e-6
FISHER_DAMPING = 1e-6

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Problem defaults
REGRESSION_NOISE_STD = 0.001
REGRESSION_N_TRAIN = 100_000
REGRESSION_N_TEST = 10_000
REINFORCE_BETA = 0.5
# Largest RMS change in predictions one natural-REINFORCE step may make.
NATURAL_REINFORCE_MAX_SHIFT = REINFORCE_BETA
LQR_TARGET_RHO = 0.95
LQR_NOISE_SCALE = 1e-4
LQR_CONTROL_COST = 1e-3
LQR_SUCCESS_RATIO = 1.05
UNSTABLE_INIT_MAX_DOUBLINGS = 20
RL_ESTIMATOR_DELTA = 1e-2
ARS_MINIBATCH = 64

EVAL_EVERY_SAMPLES = 1024
LQR_EVAL_EVERY_ITERATIONS = 10
DEFAULT_SEED_COUNT = 10
DEFAULT_TUNING_SEEDS = (1000, 1001, 1002)
LQR_TUNING_SEEDS = (2000, 2001)

EXPERIMENTS = ("linreg", "regret", "lqr", "bandit_cls", "oracle_check", "norms", "tune")

ALGORITHMS = (
    "supervised_sgd",
    "supervised_newton",
    "ogd",
    "bgd",
    "action_rs",
    "reinforce",
    "natural_reinforce",
    "ars_v1t",
    "ars_v2t",
)

EXPERIMENT_ALGORITHMS = {
    "linreg": (
        "supervised_sgd",
        "supervised_newton",
        "reinforce",
        "natural_reinforce",
        "ars_v2t",
    ),
    "regret": ("ogd", "bgd", "action_rs"),
    "lqr": ("reinforce", "ars_v1t"),
    "bandit_cls": ("supervised_sgd", "reinforce", "ars_v2t"),
    "oracle_check": (),
    "norms": (),
    "tune": ("ars_v1t", "ars_v2t"),
}

# Learning rate / batch size for REINFORCE with ADAM, keyed by input dimension.
REINFORCE_LINREG_TABLE = {
    10: {"lr": 0.08, "batch_size": 512},
    100: {"lr": 0.03, "batch_size": 512},
    1000: {"lr": 0.01, "batch_size": 512},
}

# Natural REINFORCE uses SGD with lr / sqrt(batches seen).
NATURAL_REINFORCE_LINREG_TABLE = {
    10: {"lr": 2.0, "batch_size": 512},
    100: {"lr": 2.0, "batch_size": 512},
}

SUPERVISED_SGD_LINREG_TABLE = {
    10: {"lr": 0.1, "batch_size": 64},
    100: {"lr": 0.1, "batch_size": 64},
    1000: {"lr": 0.01, "batch_size": 64},
}

ARS_LINREG_TABLE = {
    10: {"stepsize": 0.03, "n_directions": 10, "n_top": 10, "perturbation": 0.03},
    100: {"stepsize": 0.03, "n_directions": 10, "n_top": 10, "perturbation": 0.02},
    1000: {"stepsize": 0.03, "n_directions": 200, "n_top": 200, "perturbation": 0.03},
}

ARS_CLASSIFICATION_HYPERPARAMS = {
    "stepsize": 0.02,
    "n_directions": 50,
    "n_top": 20,
    "perturbation": 0.03,
}
REINFORCE_CLASSIFICATION_HYPERPARAMS = {"lr": 0.001, "batch_size": 512}
SUPERVISED_CLASSIFICATION_HYPERPARAMS = {"lr": 0.01, "momentum": 0.5, "batch_size": 64}

ARS_ONE_STEP_CANDIDATES = {
    "stepsize": (0.001, 0.005, 0.01, 0.02, 0.03),
    "n_directions": (10, 50, 100, 200, 500),
    "n_top": (5, 10, 50, 100, 200),
    "perturbation": (0.001, 0.005, 0.01, 0.02, 0.03),
}

ARS_LQR_CANDIDATES = {
    "stepsize": (0.005, 0.01, 0.02, 0.03),
    "n_directions": (20, 50, 100),
    "n_top": (10, 25, 50),
    "perturbation": (0.01, 0.02, 0.03, 0.04),
}

ARS_LQR_HYPERPARAMS = {
    "stepsize": 0.02,
    "n_directions": 20,
    "n_top": 10,
    "perturbation": 0.02,
}
REINFORCE_LQR_HYPERPARAMS = {"lr": 0.01, "batch_size": 10, "use_cost_to_go": True}

CURVE_COLUMNS = ("experiment", "algorithm", "seed", "samples", "metric", "value")
SUMMARY_COLUMNS = ("experiment", "algorithm", "group", "samples", "mean", "std", "n_seeds")
REGRET_COLUMNS = ("algorithm", "d", "T", "seed", "regret", "bound_rhs", "within_bound")
SAMPLES_COLUMNS = ("algorithm", "d", "T", "seed", "epsilon", "samples", "censored")
LQR_COLUMNS = ("H", "algorithm", "seed", "samples", "success")
NORMS_COLUMNS = ("estimator", "d", "H", "sample", "norm")
TUNE_COLUMNS = (
    "task",
    "candidate",
    "stepsize",
    "n_directions",
    "n_top",
    "perturbation",
    "mean_metric",
    "selected",
)
ORACLE_COLUMNS = ("check", "value", "tolerance", "passed")
PROBLEM_DUMP_PREFIX = ("split", "index", "y")
