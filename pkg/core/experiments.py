"""Experiment drivers: build cells, run them on the pool, collect and write outputs.

Problem instances depend only on (master seed, experiment, task parameters,
seed), so every algorithm in a run sees the same data and systems.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from core.ars import ArsConfig
from core.config import ConfigError, ExperimentConfig
from core.constants import (
    ARS_LQR_CANDIDATES,
    ARS_MINIBATCH,
    ARS_ONE_STEP_CANDIDATES,
    CURVE_COLUMNS,
    FISHER_DAMPING,
    LQR_COLUMNS,
    NORMS_COLUMNS,
    ORACLE_COLUMNS,
    REGRESSION_N_TEST,
    REGRESSION_NOISE_STD,
    REGRET_COLUMNS,
    SAMPLES_COLUMNS,
    SUMMARY_COLUMNS,
    TUNE_COLUMNS,
)
from core.data_env import (
    dump_problem_csv,
    gen_blobs_classification,
    gen_bounded_stream,
    gen_linreg,
    problem_seed,
)
from core.lqr_env import (
    embed_system,
    gen_lqr_system,
    init_unstable_policy,
    riccati_optimal,
    save_system_json,
)
from core.online_linreg import (
    BoundsConfig,
    average_regret_curve,
    empirical_regret,
    run_online_learner,
)
from core.oracles import run_oracle_checks
from core.policy_gradient import action_space_rl_grad, param_space_rl_grad
from core.rng import rng_derive
from core.runtime import Cell, CellResult, CellRunner
from core.trainers import (
    TrainingRun,
    train_ars_classifier,
    train_ars_linreg,
    train_ars_lqr,
    train_natural_reinforce_linreg,
    train_reinforce_classifier,
    train_reinforce_linreg,
    train_reinforce_lqr,
    train_supervised_classifier,
    train_supervised_newton,
    train_supervised_sgd,
)
from utils.metrics import (
    SummaryRow,
    loglog_slope,
    median_or_censored,
    samples_to_threshold,
    summarize,
)
from utils.reports import write_csv

ARS_VARIANTS = {"ars_v1t": "V1t", "ars_v2t": "V2t"}


@dataclass
class ExperimentOutput:
    files: dict[str, Path] = field(default_factory=dict)
    summary: list[SummaryRow] = field(default_factory=list)
    notes: dict[str, Any] = field(default_factory=dict)
    cells: int = 0
    passed: bool = True


def _group_value(group: str, key: str) -> int:
    for part in group.split(","):
        name, _, value = part.partition("=")
        if name == key:
            return int(value)
    raise KeyError(f"{key} not in group {group!r}")


def _ars_config(hyperparameters: dict, algorithm: str) -> ArsConfig:
    return ArsConfig.from_mapping(hyperparameters, ARS_VARIANTS[algorithm])


def _curve_rows(config: ExperimentConfig, results: list[CellResult]) -> list[dict]:
    rows = []
    for result in results:
        run: TrainingRun = result.value["run"] if isinstance(result.value, dict) else result.value
        cell = result.cell
        for samples, value in run.curve:
            rows.append(
                {
                    "experiment": config.experiment,
                    "algorithm": cell.algorithm,
                    "seed": cell.seed,
                    "samples": samples,
                    "metric": f"{run.metric}@{cell.group}",
                    "value": value,
                }
            )
    return rows


def _summaries(config: ExperimentConfig, results: list[CellResult], strict: bool) -> list[SummaryRow]:
    series: dict[tuple[str, str, str], dict[int, list]] = {}
    for result in results:
        run = result.value["run"] if isinstance(result.value, dict) else result.value
        key = (config.experiment, result.cell.algorithm, result.cell.group)
        series.setdefault(key, {})[result.cell.seed] = run.curve
    return summarize(series, strict=strict)


def _summary_rows(summary: list[SummaryRow]) -> list[dict]:
    return [
        {
            "experiment": row.experiment,
            "algorithm": row.algorithm,
            "group": row.group,
            "samples": row.samples,
            "mean": row.mean,
            "std": row.std,
            "n_seeds": row.n_seeds,
        }
        for row in summary
    ]


def _write_curves_and_summary(
    config: ExperimentConfig, results: list[CellResult], output: ExperimentOutput, strict: bool = True
) -> None:
    out = config.output_dir
    output.files["curve"] = write_csv(out / "curve.csv", CURVE_COLUMNS, _curve_rows(config, results))
    output.summary = _summaries(config, results, strict)
    output.files["summary"] = write_csv(
        out / "summary.csv", SUMMARY_COLUMNS, _summary_rows(output.summary)
    )


def run_linreg_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    settings = config.settings
    cells = [
        Cell("linreg", algorithm, f"d={d}", seed)
        for d in settings["d"]
        for algorithm in config.algorithms
        for seed in config.seeds
    ]

    def make_problem(d: int, seed: int):
        return gen_linreg(
            d,
            n_train=settings["n_train"],
            n_test=settings.get("n_test", REGRESSION_N_TEST),
            seed=problem_seed(config.master_seed, "linreg", d, seed),
            noise_std=settings.get("noise_std", REGRESSION_NOISE_STD),
        )

    def work(cell: Cell) -> TrainingRun:
        d = _group_value(cell.group, "d")
        problem = make_problem(d, cell.seed)
        hyper = config.hyperparameters(cell.algorithm, d)
        budget, every, rng = settings["budget"], settings["eval_every"], cell.rng(config.master_seed)
        if cell.algorithm == "supervised_sgd":
            return train_supervised_sgd(
                problem, hyper["lr"], hyper["batch_size"], budget, every, hyper.get("momentum", 0.0)
            )
        if cell.algorithm == "supervised_newton":
            return train_supervised_newton(problem, hyper["batch_size"], budget, every, hyper["ridge"])
        if cell.algorithm == "reinforce":
            return train_reinforce_linreg(
                problem, hyper["lr"], hyper["batch_size"], budget, every, rng, hyper["beta"]
            )
        if cell.algorithm == "natural_reinforce":
            return train_natural_reinforce_linreg(
                problem,
                hyper["lr"],
                hyper["batch_size"],
                budget,
                every,
                rng,
                hyper["beta"],
                hyper.get("damping", FISHER_DAMPING),
                hyper["max_shift"],
            )
        return train_ars_linreg(
            problem,
            _ars_config(hyper, cell.algorithm),
            budget,
            every,
            rng,
            hyper["minibatch"],
            logger=logger,
        )

    results = runner.run(cells, work)
    output = ExperimentOutput(cells=len(cells))
    _write_curves_and_summary(config, results, output)
    if settings.get("dump_problems"):
        for d in settings["d"]:
            for seed in config.seeds:
                path = config.output_dir / "problems" / f"linreg_d={d}_seed={seed}.csv"
                output.files[f"problem_d={d}_seed={seed}"] = dump_problem_csv(make_problem(d, seed), path)
    final: dict[str, float] = {}
    for row in output.summary:
        final[f"{row.algorithm}@{row.group}"] = row.mean
    output.notes["final_mean_test_mse"] = final
    return output


def run_regret_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    settings = config.settings
    bounds = BoundsConfig(
        radius=settings["radius"],
        feature_bound=settings["feature_bound"],
        target_bound=settings["target_bound"],
    )
    cells = [
        Cell("regret", algorithm, f"d={d},T={T}", seed)
        for algorithm in config.algorithms
        for d in settings["d"]
        for T in settings["T"]
        for seed in config.seeds
    ]

    def work(cell: Cell) -> dict:
        d, T = _group_value(cell.group, "d"), _group_value(cell.group, "T")
        X, y = gen_bounded_stream(
            d, T, bounds, problem_seed(config.master_seed, "regret", d, T, cell.seed), settings["jitter"]
        )
        ledger = run_online_learner(cell.algorithm, X, y, bounds, cell.rng(config.master_seed), logger=logger)
        regret, rhs = empirical_regret(ledger, bounds, cell.algorithm, d, T)
        curve = average_regret_curve(ledger, bounds.radius, max(1, T // settings["checkpoints"]))
        reached = {
            epsilon: samples_to_threshold(curve, epsilon, settings["patience"])
            for epsilon in settings["epsilons"]
        }
        run = TrainingRun("average_regret", curve, T)
        return {"run": run, "regret": regret, "rhs": rhs, "reached": reached}

    results = runner.run(cells, work)
    output = ExperimentOutput(cells=len(cells))
    regret_rows, sample_rows = [], []
    for result in results:
        cell, value = result.cell, result.value
        d, T = _group_value(cell.group, "d"), _group_value(cell.group, "T")
        regret_rows.append(
            {
                "algorithm": cell.algorithm,
                "d": d,
                "T": T,
                "seed": cell.seed,
                "regret": value["regret"],
                "bound_rhs": value["rhs"],
                "within_bound": value["regret"] <= value["rhs"],
            }
        )
        for epsilon, samples in value["reached"].items():
            sample_rows.append(
                {
                    "algorithm": cell.algorithm,
                    "d": d,
                    "T": T,
                    "seed": cell.seed,
                    "epsilon": float(epsilon),
                    "samples": samples,
                    "censored": samples is None,
                }
            )
    output.files["regret"] = write_csv(config.output_dir / "regret.csv", REGRET_COLUMNS, regret_rows)
    output.files["samples"] = write_csv(config.output_dir / "samples.csv", SAMPLES_COLUMNS, sample_rows)
    _write_curves_and_summary(config, results, output)

    output.notes["bound_violations"] = sum(not row["within_bound"] for row in regret_rows)
    ds, T_max = sorted(settings["d"]), max(settings["T"])
    medians: dict[str, float] = {}
    for algorithm in config.algorithms:
        for epsilon in settings["epsilons"]:
            for d in ds:
                values = [
                    row["samples"]
                    for row in sample_rows
                    if (row["algorithm"], row["d"], row["T"], row["epsilon"]) == (algorithm, d, T_max, float(epsilon))
                ]
                medians[f"{algorithm}@d={d},eps={epsilon}"] = median_or_censored(values)
    output.notes["median_samples_to_epsilon"] = medians
    return output


def _lqr_instance(config: ExperimentConfig, seed: int):
    settings = config.settings
    system_seed = problem_seed(config.master_seed, "lqr", settings["d"], seed)
    system = gen_lqr_system(
        settings["d"],
        seed=system_seed,
        target_rho=settings["target_rho"],
        noise_scale=settings["noise_scale"],
        control_cost=settings["control_cost"],
    )
    w0 = init_unstable_policy(system, rng_derive(system_seed, ["lqr", "init"])).w
    return system, w0


def run_lqr_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    settings = config.settings
    cells = [
        Cell("lqr", algorithm, f"H={H}", seed)
        for H in settings["H"]
        for algorithm in config.algorithms
        for seed in config.seeds
    ]

    def work(cell: Cell) -> dict:
        H = _group_value(cell.group, "H")
        system, w0 = _lqr_instance(config, cell.seed)
        threshold = settings["success_ratio"] * riccati_optimal(system, H).optimal_cost
        hyper = config.hyperparameters(cell.algorithm, settings["d"])

        def reached(_samples: int, cost: float) -> bool:
            return cost <= threshold

        rng = cell.rng(config.master_seed)
        if cell.algorithm == "reinforce":
            run = train_reinforce_lqr(
                system,
                H,
                w0,
                hyper["lr"],
                hyper["batch_size"],
                settings["budget"],
                settings["eval_every"],
                rng,
                hyper.get("use_cost_to_go", True),
                stop_when=reached,
            )
        else:
            run = train_ars_lqr(
                system,
                H,
                w0,
                _ars_config(hyper, cell.algorithm),
                settings["budget"],
                settings["eval_every"],
                rng,
                stop_when=reached,
                logger=logger,
            )
        return {"run": run, "success_at": samples_to_threshold(run.curve, threshold, 1)}

    results = runner.run(cells, work)
    output = ExperimentOutput(cells=len(cells))
    rows = []
    for result in results:
        success_at = result.value["success_at"]
        rows.append(
            {
                "H": _group_value(result.cell.group, "H"),
                "algorithm": result.cell.algorithm,
                "seed": result.cell.seed,
                "samples": success_at,
                "success": success_at is not None,
            }
        )
    output.files["lqr"] = write_csv(config.output_dir / "lqr.csv", LQR_COLUMNS, rows)
    for seed in config.seeds:
        system, _ = _lqr_instance(config, seed)
        output.files[f"system_seed={seed}"] = save_system_json(
            system, config.output_dir / "systems" / f"seed={seed}.json"
        )
    _write_curves_and_summary(config, results, output, strict=False)
    successes: dict[str, int] = {}
    medians: dict[str, float] = {}
    for algorithm in config.algorithms:
        for H in settings["H"]:
            subset = [row for row in rows if (row["algorithm"], row["H"]) == (algorithm, H)]
            successes[f"{algorithm}@H={H}"] = sum(row["success"] for row in subset)
            medians[f"{algorithm}@H={H}"] = median_or_censored([row["samples"] for row in subset])
    output.notes["successes"] = successes
    output.notes["median_samples_at_success"] = medians
    return output


def run_bandit_classification(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    settings = config.settings
    K, d = settings["K"], settings["d"]
    group = f"K={K},d={d}"
    cells = [Cell("bandit_cls", algorithm, group, seed) for algorithm in config.algorithms for seed in config.seeds]

    def work(cell: Cell) -> TrainingRun:
        problem = gen_blobs_classification(
            K,
            d,
            settings["n_train"],
            settings["n_test"],
            settings["separation"],
            problem_seed(config.master_seed, "bandit_cls", K, d, cell.seed),
        )
        hyper = config.hyperparameters(cell.algorithm, d)
        budget, every, rng = settings["budget"], settings["eval_every"], cell.rng(config.master_seed)
        if cell.algorithm == "supervised_sgd":
            return train_supervised_classifier(
                problem, hyper["lr"], hyper["momentum"], hyper["batch_size"], budget, every, rng
            )
        if cell.algorithm == "reinforce":
            return train_reinforce_classifier(problem, hyper["lr"], hyper["batch_size"], budget, every, rng)
        return train_ars_classifier(
            problem, _ars_config(hyper, cell.algorithm), budget, every, rng, hyper["minibatch"], logger=logger
        )

    results = runner.run(cells, work)
    output = ExperimentOutput(cells=len(cells))
    _write_curves_and_summary(config, results, output)
    return output


def run_oracle_check(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    cell = Cell("oracle_check", "oracles", "all", 0)
    [result] = runner.run([cell], lambda _cell: run_oracle_checks(config.settings, config.master_seed, logger))
    checks = result.value
    output = ExperimentOutput(cells=1, passed=all(check.passed for check in checks))
    output.files["oracle"] = write_csv(
        config.output_dir / "oracle.csv", ORACLE_COLUMNS, [check.as_row() for check in checks]
    )
    output.notes["failed_checks"] = [check.check for check in checks if not check.passed]
    return output


def _estimator_norms(system, w, estimator: str, delta: float, H: int, samples: int, rng) -> np.ndarray:
    """Per-sample norms of single-direction estimates, computed from one vectorised batch."""
    if estimator == "param_space":
        estimate = param_space_rl_grad(system, w, delta, H, rng, samples=samples)
        costs = np.atleast_1d(estimate.meta["cost"])
        return system.d * costs / delta
    estimate = action_space_rl_grad(system, w, delta, H, rng, samples=samples)
    costs = np.atleast_1d(estimate.meta["cost"])
    directions = np.atleast_2d(estimate.meta["direction"])
    projected = directions @ estimate.meta["states"].T
    return (H * costs / delta) * np.linalg.norm(projected, axis=1)


def run_norms_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    """Estimator norms on one system embedded into growing state dimension, plus a horizon sweep."""
    settings = config.settings
    ds = sorted(settings["d"])
    base_d = min(ds + [settings["sweep_d"]])
    base_seed = problem_seed(config.master_seed, "norms", base_d)
    base = gen_lqr_system(base_d, seed=base_seed, noise_scale=0.0)
    w_base = 0.1 * rng_derive(base_seed, ["norms", "policy"]).normal(base_d)
    estimators = ("param_space", "action_space")
    cells = [Cell("norms", estimator, f"d={d},H={settings['H']}", 0) for estimator in estimators for d in ds]
    cells += [
        Cell("norms", estimator, f"d={settings['sweep_d']},H={H}", 0)
        for estimator in estimators
        for H in settings["H_sweep"]
    ]

    def work(cell: Cell) -> np.ndarray:
        d, H = _group_value(cell.group, "d"), _group_value(cell.group, "H")
        system = embed_system(base, d)
        w = np.concatenate([w_base, np.zeros(d - base_d)])
        # One stream per estimator and horizon, shared across d.
        rng = rng_derive(config.master_seed, ["norms", cell.algorithm, H])
        return _estimator_norms(system, w, cell.algorithm, settings["delta"], H, settings["samples"], rng)

    results = runner.run(cells, work)
    output = ExperimentOutput(cells=len(cells))
    rows, summary = [], []
    means: dict[tuple[str, int, int], float] = {}
    for result in results:
        d, H = _group_value(result.cell.group, "d"), _group_value(result.cell.group, "H")
        norms = result.value
        means[(result.cell.algorithm, d, H)] = float(norms.mean())
        rows.extend(
            {"estimator": result.cell.algorithm, "d": d, "H": H, "sample": index, "norm": float(norm)}
            for index, norm in enumerate(norms)
        )
        summary.append(
            SummaryRow("norms", result.cell.algorithm, result.cell.group, len(norms), float(norms.mean()), float(norms.std()), 1)
        )
    output.files["norms"] = write_csv(config.output_dir / "norms.csv", NORMS_COLUMNS, rows)
    output.summary = summary
    output.files["summary"] = write_csv(config.output_dir / "summary.csv", SUMMARY_COLUMNS, _summary_rows(summary))
    H_fixed, sweep_d = settings["H"], settings["sweep_d"]
    output.notes["slope_in_d"] = {
        estimator: loglog_slope(ds, [means[(estimator, d, H_fixed)] for d in ds]) for estimator in estimators
    }
    if len(settings["H_sweep"]) > 1:
        output.notes["slope_in_H"] = {
            estimator: loglog_slope(
                settings["H_sweep"], [means[(estimator, sweep_d, H)] for H in settings["H_sweep"]]
            )
            for estimator in estimators
        }
    return output


def candidate_grid(candidates: dict[str, tuple], max_candidates: int) -> list[dict[str, Any]]:
    """Grid-order enumeration of valid (n_top <= n_directions) combinations."""
    grid = []
    for stepsize, n_directions, n_top, perturbation in itertools.product(
        candidates["stepsize"], candidates["n_directions"], candidates["n_top"], candidates["perturbation"]
    ):
        if n_top > n_directions:
            continue
        grid.append(
            {"stepsize": stepsize, "n_directions": n_directions, "n_top": n_top, "perturbation": perturbation}
        )
        if len(grid) >= max_candidates:
            break
    return grid


def run_tune_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    """Pick ARS hyperparameters from the candidate tables on seeds disjoint from evaluation seeds."""
    settings = config.settings
    task = settings["task"]
    if task == "linreg":
        seeds, candidates = settings["tuning_seeds"], ARS_ONE_STEP_CANDIDATES
        default_algorithm = "ars_v2t"
    else:
        seeds, candidates = settings["lqr_tuning_seeds"], ARS_LQR_CANDIDATES
        default_algorithm = "ars_v1t"
    if set(seeds) & set(config.seeds):
        raise ConfigError("tuning seeds must be disjoint from evaluation seeds")
    algorithm = config.algorithms[0] if len(config.algorithms) == 1 else default_algorithm
    if task == "lqr" and algorithm == "ars_v2t":
        raise ConfigError("state normalisation (ars_v2t) is not available for the lqr tuning task")
    grid = candidate_grid(candidates, settings["max_candidates"])
    cells = [Cell("tune", algorithm, f"candidate={index}", seed) for index in range(len(grid)) for seed in seeds]

    def work(cell: Cell) -> float:
        params = grid[_group_value(cell.group, "candidate")]
        ars = _ars_config(params, cell.algorithm)
        rng = cell.rng(config.master_seed)
        budget = settings["budget"]
        if task == "linreg":
            d = settings["d"]
            problem = gen_linreg(d, seed=problem_seed(config.master_seed, "tune", d, cell.seed))
            return train_ars_linreg(problem, ars, budget, budget or 1, rng, ARS_MINIBATCH).final_value
        H, lqr_d = settings["H"], settings["lqr_d"]
        system_seed = problem_seed(config.master_seed, "tune", "lqr", lqr_d, cell.seed)
        system = gen_lqr_system(lqr_d, seed=system_seed)
        w0 = init_unstable_policy(system, rng_derive(system_seed, ["lqr", "init"])).w
        optimum = riccati_optimal(system, H).optimal_cost
        run = train_ars_lqr(system, H, w0, ars, budget, 10, rng)
        return run.final_value / optimum

    results = runner.run(cells, work)
    scores: dict[int, list[float]] = {}
    for result in results:
        scores.setdefault(_group_value(result.cell.group, "candidate"), []).append(result.value)
    means = {index: float(np.mean(values)) for index, values in scores.items()}
    best = min(means, key=lambda index: (means[index], index)) if means else None
    rows = [
        {
            "task": task,
            "candidate": index,
            **grid[index],
            "mean_metric": means[index],
            "selected": index == best,
        }
        for index in range(len(grid))
    ]
    output = ExperimentOutput(cells=len(cells))
    output.files["tune"] = write_csv(config.output_dir / "tune.csv", TUNE_COLUMNS, rows)
    output.notes["selected"] = {"algorithm": algorithm, **grid[best]} if best is not None else None
    return output


DRIVERS: dict[str, Callable[[ExperimentConfig, CellRunner, Any], ExperimentOutput]] = {
    "linreg": run_linreg_experiment,
    "regret": run_regret_experiment,
    "lqr": run_lqr_experiment,
    "bandit_cls": run_bandit_classification,
    "oracle_check": run_oracle_check,
    "norms": run_norms_experiment,
    "tune": run_tune_experiment,
}


def run_experiment(config: ExperimentConfig, runner: CellRunner, logger=None) -> ExperimentOutput:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return DRIVERS[config.experiment](config, runner, logger)
