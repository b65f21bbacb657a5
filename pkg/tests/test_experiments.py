from __future__ import annotations

import pytest

from core.config import ConfigError, ConfigManager
from core.constants import CURVE_COLUMNS, LQR_COLUMNS, REGRET_COLUMNS, SUMMARY_COLUMNS, TUNE_COLUMNS
from core.experiments import candidate_grid, run_experiment
from core.runtime import CellRunner
from utils.reports import read_csv

TINY = {
    "linreg": {"d": [3], "n_train": 2000, "n_test": 200, "budget": 1024, "eval_every": 256},
    "regret": {"d": [2], "T": [50], "checkpoints": 10, "epsilons": [0.5, 1e-9]},
    "lqr": {"d": 3, "H": [4], "budget": 2000, "eval_every": 2},
    "bandit_cls": {"K": 3, "d": 4, "n_train": 300, "n_test": 100, "budget": 1024, "eval_every": 256},
    "oracle_check": {
        "pair_checks": 3,
        "mc_samples": 1000,
        "fd_samples": 1000,
        "riccati_systems": 2,
        "riccati_policies": 5,
    },
    "norms": {"d": [2, 4], "H": 3, "H_sweep": [3, 6], "sweep_d": 2, "samples": 20},
    "tune": {"d": 3, "budget": 2000, "max_candidates": 3},
}


def tiny_config(experiment, out, seeds=(0, 1), workers=1, **extra):
    overrides = {
        "seeds": list(seeds),
        "workers": workers,
        "output_dir": str(out),
        experiment: {**TINY[experiment], **extra},
    }
    return ConfigManager(None).resolve(experiment, overrides)


def run(experiment, out, workers=1, **extra):
    config = tiny_config(experiment, out, workers=workers, **extra)
    return run_experiment(config, CellRunner(workers))


def header(path):
    return tuple(path.read_text(encoding="utf-8").splitlines()[0].split(","))


def test_linreg_writes_curves_for_every_algorithm(tmp_path):
    output = run("linreg", tmp_path)
    assert output.cells == 5 * 2
    assert header(output.files["curve"]) == CURVE_COLUMNS
    assert header(output.files["summary"]) == SUMMARY_COLUMNS
    rows = read_csv(output.files["curve"])
    assert {row["algorithm"] for row in rows} == {
        "supervised_sgd",
        "supervised_newton",
        "reinforce",
        "natural_reinforce",
        "ars_v2t",
    }
    assert all(row["metric"] == "test_mse@d=3" for row in rows)
    assert "supervised_newton@d=3" in output.notes["final_mean_test_mse"]


def test_linreg_outputs_do_not_depend_on_worker_count(tmp_path):
    serial = run("linreg", tmp_path / "serial", workers=1)
    pooled = run("linreg", tmp_path / "pooled", workers=8)
    for name in ("curve", "summary"):
        assert serial.files[name].read_bytes() == pooled.files[name].read_bytes()


def test_linreg_can_dump_problem_instances(tmp_path):
    output = run("linreg", tmp_path, dump_problems=True)
    assert (tmp_path / "problems" / "linreg_d=3_seed=1.csv").exists()
    assert "problem_d=3_seed=0" in output.files


def test_regret_reports_bounds_and_censoring(tmp_path):
    output = run("regret", tmp_path)
    regret = read_csv(output.files["regret"])
    assert header(output.files["regret"]) == REGRET_COLUMNS
    assert len(regret) == 3 * 2
    assert all(row["within_bound"] == "true" for row in regret if row["algorithm"] == "ogd")
    samples = read_csv(output.files["samples"])
    assert len(samples) == len(regret) * 2
    assert all((row["censored"] == "true") == (row["samples"] == "") for row in samples)
    assert set(output.notes["median_samples_to_epsilon"]) >= {"ogd@d=2,eps=0.5"}


def test_lqr_records_success_and_saves_systems(tmp_path):
    output = run_experiment(tiny_config("lqr", tmp_path, seeds=(0,)), CellRunner(1))
    rows = read_csv(output.files["lqr"])
    assert header(output.files["lqr"]) == LQR_COLUMNS
    assert [row["algorithm"] for row in rows] == ["reinforce", "ars_v1t"]
    for row in rows:
        assert (row["samples"] == "") == (row["success"] == "false")
    assert (tmp_path / "systems" / "seed=0.json").exists()
    assert set(output.notes["successes"]) == {"reinforce@H=4", "ars_v1t@H=4"}


def test_bandit_classification_reports_accuracy(tmp_path):
    output = run("bandit_cls", tmp_path)
    rows = read_csv(output.files["curve"])
    assert {row["metric"] for row in rows} == {"test_accuracy@K=3,d=4"}
    assert all(0.0 <= float(row["value"]) <= 1.0 for row in rows)


def test_oracle_check_writes_every_check(tmp_path):
    output = run("oracle_check", tmp_path)
    rows = read_csv(output.files["oracle"])
    assert len(rows) == 7
    assert output.passed == all(row["passed"] == "true" for row in rows)
    assert "riccati_scalar" not in output.notes["failed_checks"]


def test_norms_measures_both_estimators(tmp_path):
    output = run("norms", tmp_path)
    rows = read_csv(output.files["norms"])
    assert len(rows) == 2 * (2 + 2) * 20
    assert {row["estimator"] for row in rows} == {"param_space", "action_space"}
    assert set(output.notes["slope_in_d"]) == {"param_space", "action_space"}
    assert set(output.notes["slope_in_H"]) == {"param_space", "action_space"}


def test_tune_selects_exactly_one_candidate(tmp_path):
    output = run("tune", tmp_path)
    rows = read_csv(output.files["tune"])
    assert header(output.files["tune"]) == TUNE_COLUMNS
    assert len(rows) == 3
    assert sum(row["selected"] == "true" for row in rows) == 1
    assert output.notes["selected"]["algorithm"] == "ars_v2t"


def test_tune_rejects_overlapping_seeds(tmp_path):
    config = tiny_config("tune", tmp_path, seeds=(1000,))
    with pytest.raises(ConfigError, match="disjoint"):
        run_experiment(config, CellRunner(1))


def test_tune_rejects_normalisation_for_lqr(tmp_path):
    overrides = {
        "algorithms": ["ars_v2t"],
        "output_dir": str(tmp_path),
        "tune": {"task": "lqr", "budget": 100},
    }
    config = ConfigManager(None).resolve("tune", overrides)
    with pytest.raises(ConfigError, match="lqr"):
        run_experiment(config, CellRunner(1))


def test_candidate_grid_skips_invalid_combinations():
    grid = candidate_grid(
        {"stepsize": (0.1,), "n_directions": (5, 10), "n_top": (10,), "perturbation": (0.01, 0.02)}, 10
    )
    assert [(row["n_directions"], row["perturbation"]) for row in grid] == [(10, 0.01), (10, 0.02)]
    assert len(candidate_grid({"stepsize": (1, 2), "n_directions": (5,), "n_top": (1,), "perturbation": (1,)}, 1)) == 1
