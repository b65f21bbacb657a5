"""Experiment configuration loading, validation, and persistence."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from core.constants import (
    ALGORITHMS,
    ARS_CLASSIFICATION_HYPERPARAMS,
    ARS_LINREG_TABLE,
    ARS_LQR_HYPERPARAMS,
    ARS_MINIBATCH,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED_COUNT,
    DEFAULT_TUNING_SEEDS,
    EVAL_EVERY_SAMPLES,
    EXPERIMENT_ALGORITHMS,
    EXPERIMENTS,
    FISHER_DAMPING,
    LQR_CONTROL_COST,
    LQR_EVAL_EVERY_ITERATIONS,
    LQR_NOISE_SCALE,
    LQR_SUCCESS_RATIO,
    LQR_TARGET_RHO,
    LQR_TUNING_SEEDS,
    NATURAL_REINFORCE_LINREG_TABLE,
    NATURAL_REINFORCE_MAX_SHIFT,
    NEWTON_RIDGE,
    REGRESSION_N_TEST,
    REGRESSION_N_TRAIN,
    REGRESSION_NOISE_STD,
    REINFORCE_BETA,
    REINFORCE_CLASSIFICATION_HYPERPARAMS,
    REINFORCE_LINREG_TABLE,
    REINFORCE_LQR_HYPERPARAMS,
    RL_ESTIMATOR_DELTA,
    SUPERVISED_CLASSIFICATION_HYPERPARAMS,
    SUPERVISED_SGD_LINREG_TABLE,
)


class ConfigError(RuntimeError):
    """Raised for unreadable, unknown, or inconsistent configuration values."""


SECTION_DEFAULTS: dict[str, dict[str, Any]] = {
    "linreg": {
        "d": [10, 100, 1000],
        "n_train": REGRESSION_N_TRAIN,
        "n_test": REGRESSION_N_TEST,
        "noise_std": REGRESSION_NOISE_STD,
        "budget": REGRESSION_N_TRAIN,
        "eval_every": EVAL_EVERY_SAMPLES,
        "dump_problems": False,
        "hyperparameters": {},
    },
    "regret": {
        "d": [10, 100],
        "T": [100, 1000, 10000],
        "epsilons": [0.1],
        "radius": 1.0,
        "feature_bound": 1.0,
        "target_bound": 1.0,
        "jitter": 0.1,
        "checkpoints": 100,
        "patience": 1,
    },
    "lqr": {
        "d": 20,
        "H": [10, 20, 40],
        "budget": 2_000_000,
        "eval_every": LQR_EVAL_EVERY_ITERATIONS,
        "target_rho": LQR_TARGET_RHO,
        "noise_scale": LQR_NOISE_SCALE,
        "control_cost": LQR_CONTROL_COST,
        "success_ratio": LQR_SUCCESS_RATIO,
        "hyperparameters": {},
    },
    "bandit_cls": {
        "K": 10,
        "d": 20,
        "separation": 3.0,
        "n_train": 20_000,
        "n_test": 2_000,
        "budget": 100_000,
        "eval_every": EVAL_EVERY_SAMPLES,
        "hyperparameters": {},
    },
    "oracle_check": {
        "pair_checks": 1000,
        "mc_samples": 4_000_000,
        "fd_samples": 1_000_000,
        "riccati_systems": 100,
        "riccati_policies": 1000,
    },
    "norms": {
        "d": [5, 10, 20, 40],
        "H": 20,
        "H_sweep": [10, 20, 40, 80],
        "sweep_d": 10,
        "samples": 200,
        "delta": RL_ESTIMATOR_DELTA,
    },
    "tune": {
        "task": "linreg",
        "d": 10,
        "H": 10,
        "lqr_d": 20,
        "budget": 20_000,
        "max_candidates": 25,
        "tuning_seeds": list(DEFAULT_TUNING_SEEDS),
        "lqr_tuning_seeds": list(LQR_TUNING_SEEDS),
    },
}

DEFAULT_EXPERIMENT_CONFIG: dict[str, Any] = {
    "experiment": None,
    "algorithms": [],
    "master_seed": 0,
    "seeds": list(range(DEFAULT_SEED_COUNT)),
    "workers": 1,
    "output_dir": str(DEFAULT_OUTPUT_DIR),
    **copy.deepcopy(SECTION_DEFAULTS),
}

HYPERPARAMETER_KEYS = {
    "supervised_sgd": {"lr", "batch_size", "momentum"},
    "supervised_newton": {"batch_size", "ridge"},
    "reinforce": {"lr", "batch_size", "beta", "use_cost_to_go"},
    "natural_reinforce": {"lr", "batch_size", "beta", "damping", "max_shift"},
    "ars_v1t": {"stepsize", "n_directions", "n_top", "perturbation", "minibatch"},
    "ars_v2t": {"stepsize", "n_directions", "n_top", "perturbation", "minibatch"},
}

TUNE_TASKS = ("linreg", "lqr")


def _deep_merge(base: dict[str, Any], incoming: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in incoming.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _reject_unknown(defaults: dict[str, Any], incoming: dict[str, Any], prefix: str = "") -> None:
    for key, value in incoming.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"Unknown configuration key: {path}")
        if key == "hyperparameters":
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path} must be an object")
            _reject_unknown(defaults[key], value, f"{path}.")


def table_lookup(table: dict[int, dict[str, Any]], d: int) -> dict[str, Any]:
    """Row for the largest tabulated dimension <= d (the smallest row below the table)."""
    keys = sorted(table)
    chosen = keys[0]
    for key in keys:
        if key <= d:
            chosen = key
    return dict(table[chosen])


def default_hyperparameters(experiment: str, algorithm: str, d: int = 10) -> dict[str, Any]:
    if experiment == "linreg":
        if algorithm == "supervised_sgd":
            return {**table_lookup(SUPERVISED_SGD_LINREG_TABLE, d), "momentum": 0.0}
        if algorithm == "supervised_newton":
            return {"batch_size": SUPERVISED_SGD_LINREG_TABLE[10]["batch_size"], "ridge": NEWTON_RIDGE}
        if algorithm == "reinforce":
            return {**table_lookup(REINFORCE_LINREG_TABLE, d), "beta": REINFORCE_BETA}
        if algorithm == "natural_reinforce":
            return {
                **table_lookup(NATURAL_REINFORCE_LINREG_TABLE, d),
                "beta": REINFORCE_BETA,
                "damping": FISHER_DAMPING,
                "max_shift": NATURAL_REINFORCE_MAX_SHIFT,
            }
        if algorithm in ("ars_v1t", "ars_v2t"):
            return {**table_lookup(ARS_LINREG_TABLE, d), "minibatch": ARS_MINIBATCH}
    if experiment == "bandit_cls":
        if algorithm == "supervised_sgd":
            return dict(SUPERVISED_CLASSIFICATION_HYPERPARAMS)
        if algorithm == "reinforce":
            return dict(REINFORCE_CLASSIFICATION_HYPERPARAMS)
        if algorithm in ("ars_v1t", "ars_v2t"):
            return {**ARS_CLASSIFICATION_HYPERPARAMS, "minibatch": ARS_MINIBATCH}
    if experiment == "lqr":
        if algorithm == "reinforce":
            return dict(REINFORCE_LQR_HYPERPARAMS)
        if algorithm == "ars_v1t":
            return dict(ARS_LQR_HYPERPARAMS)
    return {}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    algorithms: tuple[str, ...]
    master_seed: int
    seeds: tuple[int, ...]
    workers: int
    output_dir: Path
    settings: dict[str, Any] = field(default_factory=dict)

    def hyperparameters(self, algorithm: str, d: int = 10) -> dict[str, Any]:
        overrides = self.settings.get("hyperparameters", {}).get(algorithm, {})
        return {**default_hyperparameters(self.experiment, algorithm, d), **overrides}

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "algorithms": list(self.algorithms),
            "master_seed": self.master_seed,
            "seeds": list(self.seeds),
            "workers": self.workers,
            "output_dir": str(self.output_dir),
            self.experiment: copy.deepcopy(self.settings),
        }

    def canonical_json(self) -> str:
        """Config identity for hashing; output location and pool size are excluded."""
        payload = self.to_dict()
        payload.pop("output_dir")
        payload.pop("workers")
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _as_int_list(value: Any, path: str) -> list[int]:
    items = value if isinstance(value, list) else [value]
    if not items or not all(isinstance(item, int) and not isinstance(item, bool) for item in items):
        raise ConfigError(f"{path} must be a non-empty list of integers")
    return items


class ConfigManager:
    """Loads a JSON experiment file over the defaults and resolves it into an ExperimentConfig."""

    def __init__(self, path: str | Path | None, logger=None):
        self.path = Path(path) if path else None
        self.logger = logger
        self._raw = self._load_from_disk()

    def _load_from_disk(self) -> dict[str, Any]:
        if self.path is None:
            return {}
        if not self.path.exists():
            raise ConfigError(f"Config file not found: {self.path}")
        try:
            with self.path.open("r", encoding="utf-8") as handle:
                raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {self.path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("Config file must contain a JSON object")
        _reject_unknown(DEFAULT_EXPERIMENT_CONFIG, raw)
        if self.logger:
            self.logger.log("DEBUG", "Loaded experiment config", path=str(self.path))
        return raw

    def provides(self, key: str) -> bool:
        """True when the config file itself sets the top-level `key`."""
        return key in self._raw

    def load(self, overrides: dict[str, Any] | None = None) -> dict[str, Any]:
        """Defaults, then file values, then overrides (CLI flags)."""
        merged = _deep_merge(DEFAULT_EXPERIMENT_CONFIG, self._raw)
        if overrides:
            _reject_unknown(DEFAULT_EXPERIMENT_CONFIG, overrides)
            merged = _deep_merge(merged, overrides)
        return merged

    def resolve(
        self, experiment: str | None = None, overrides: dict[str, Any] | None = None
    ) -> ExperimentConfig:
        merged = self.load(overrides)
        experiment = (experiment or merged.get("experiment") or "").replace("-", "_")
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment: {experiment or '<none>'}")
        if merged.get("experiment") and merged["experiment"].replace("-", "_") != experiment:
            raise ConfigError(
                f"Config file is for experiment {merged['experiment']}, not {experiment}"
            )
        settings = merged[experiment]
        allowed = EXPERIMENT_ALGORITHMS[experiment]
        algorithms = tuple(merged.get("algorithms") or allowed)
        for algorithm in algorithms:
            if algorithm not in ALGORITHMS:
                raise ConfigError(f"Unknown algorithm: {algorithm}")
            if algorithm not in allowed:
                raise ConfigError(f"Algorithm {algorithm} is not valid for experiment {experiment}")
        if len(set(algorithms)) != len(algorithms):
            raise ConfigError("algorithms must be distinct")

        seeds = _as_int_list(merged["seeds"], "seeds")
        if len(set(seeds)) != len(seeds) or min(seeds) < 0:
            raise ConfigError("seeds must be distinct non-negative integers")
        master_seed = merged["master_seed"]
        if not isinstance(master_seed, int) or master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        workers = merged["workers"]
        if not isinstance(workers, int) or workers < 0:
            raise ConfigError("workers must be a non-negative integer (0 = all cores)")

        self._validate_section(experiment, settings, algorithms)
        return ExperimentConfig(
            experiment=experiment,
            algorithms=algorithms,
            master_seed=master_seed,
            seeds=tuple(seeds),
            workers=workers,
            output_dir=Path(merged["output_dir"]),
            settings=settings,
        )

    def _validate_section(self, experiment: str, settings: dict[str, Any], algorithms) -> None:
        for key in ("budget", "n_train", "n_test", "eval_every", "samples", "checkpoints",
                    "patience", "max_candidates", "pair_checks", "mc_samples", "fd_samples",
                    "riccati_systems", "riccati_policies"):
            if key in settings:
                value = settings[key]
                minimum = 0 if key == "budget" else 1
                if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
                    raise ConfigError(f"{experiment}.{key} must be an integer >= {minimum}")
        for key in ("d", "H", "T", "H_sweep", "sweep_d", "K", "lqr_d"):
            if key in settings:
                values = _as_int_list(settings[key], f"{experiment}.{key}")
                if min(values) < 1:
                    raise ConfigError(f"{experiment}.{key} values must be >= 1")
        if experiment == "bandit_cls" and settings["K"] < 2:
            raise ConfigError("bandit_cls.K must be >= 2")
        if experiment == "tune":
            if settings["task"] not in TUNE_TASKS:
                raise ConfigError(f"tune.task must be one of {', '.join(TUNE_TASKS)}")
            for key in ("tuning_seeds", "lqr_tuning_seeds"):
                _as_int_list(settings[key], f"tune.{key}")
        hyperparameters = settings.get("hyperparameters", {})
        if not isinstance(hyperparameters, dict):
            raise ConfigError(f"{experiment}.hyperparameters must be an object")
        for algorithm, values in hyperparameters.items():
            if algorithm not in EXPERIMENT_ALGORITHMS[experiment]:
                raise ConfigError(
                    f"Unknown configuration key: {experiment}.hyperparameters.{algorithm}"
                )
            for key in values:
                if key not in HYPERPARAMETER_KEYS[algorithm]:
                    raise ConfigError(
                        f"Unknown configuration key: {experiment}.hyperparameters.{algorithm}.{key}"
                    )

    def save(self, config: ExperimentConfig, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = target.with_suffix(f"{target.suffix}.tmp")
        with tmp_path.open("w", encoding="utf-8") as handle:
            json.dump(config.to_dict(), handle, indent=4, sort_keys=True)
        tmp_path.replace(target)
        return target
