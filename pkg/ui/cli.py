"""Command-line entry point: `explab.py <experiment> [flags]` and `explab.py history`."""

from __future__ import annotations

import argparse
import sys
import traceback
from datetime import datetime
from typing import Any, Sequence

from core.config import SECTION_DEFAULTS, ConfigError, ConfigManager, ExperimentConfig
from core.constants import (
    DATABASE_FILE,
    DEFAULT_OUTPUT_DIR,
    EXIT_CONFIG_ERROR,
    EXIT_FAILURE,
    EXIT_INTERRUPTED,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    LOG_FILE,
    LOG_RETENTION_DAYS,
    MAX_LOG_SIZE,
    VERSION,
)
from core.experiments import ExperimentOutput, run_experiment
from core.numeric import NumericalError
from core.runtime import CellResult, CellRunner
from db.manager import DatabaseManager
from ui.colors import C, colors_supported
from utils.logging_utils import EnhancedLogger
from utils.reports import git_blob_sha1, write_meta
from utils.system import get_system_info, resolve_workers

COMMANDS = ("linreg", "regret", "lqr", "bandit-cls", "oracle-check", "norms", "tune")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explab.py",
        description="Parameter-space versus action-space exploration benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=f"run the {command} experiment")
        sub.add_argument("--config", help="JSON experiment file")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--seed", type=_non_negative_int, help="master seed")
        sub.add_argument("--seeds", type=_positive_int, help="evaluate seeds 0..n-1")
        sub.add_argument("--workers", type=_non_negative_int, help="worker threads (0 = all cores)")
        sub.add_argument("--alg", help="comma-separated algorithm names")
        sub.add_argument("--budget", type=_non_negative_int, help="sample budget per run")
        sub.add_argument("--quiet", action="store_true", help="only warnings and errors on stdout")
        sub.add_argument("--no-db", action="store_true", help="do not record the run in the registry")

    history = subparsers.add_parser("history", help="list recorded runs")
    history.add_argument("--limit", type=_positive_int, default=20)
    history.add_argument("--experiment", help="only runs of this experiment")
    return parser


def build_overrides(args: argparse.Namespace, experiment: str) -> dict[str, Any]:
    """Map CLI flags onto config keys; flags win over file values."""
    overrides: dict[str, Any] = {}
    if args.out:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.seeds is not None:
        overrides["seeds"] = list(range(args.seeds))
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.alg:
        overrides["algorithms"] = [
            name.strip().replace("-", "_") for name in args.alg.split(",") if name.strip()
        ]
    if args.budget is not None:
        if "budget" not in SECTION_DEFAULTS[experiment]:
            raise ConfigError(f"--budget does not apply to the {experiment} experiment")
        overrides[experiment] = {"budget": args.budget}
    return overrides


def create_services(quiet: bool = False, use_db: bool = True):
    if not colors_supported():
        C.disable_colors()
    logger = EnhancedLogger(LOG_FILE, quiet=quiet, max_size=MAX_LOG_SIZE, retention_days=LOG_RETENTION_DAYS)
    db_manager = DatabaseManager(DATABASE_FILE) if use_db else None
    return logger, db_manager


def _final_metric(value: Any) -> float | None:
    final = getattr(value, "final_value", None)
    if final is not None:
        return float(final)
    if isinstance(value, (int, float)):
        return float(value)
    return None


def print_summary(config: ExperimentConfig, output: ExperimentOutput) -> None:
    """Final-checkpoint mean/std for each (algorithm, group)."""
    final: dict[tuple[str, str], Any] = {}
    for row in output.summary:
        final[(row.algorithm, row.group)] = row
    if final:
        print(f"\n{C.BOLD}{config.experiment} summary{C.RESET}")
        print(f"{'algorithm':<20} {'group':<16} {'samples':>10} {'mean':>14} {'std':>12} {'seeds':>6}")
        for (algorithm, group), row in final.items():
            print(
                f"{algorithm:<20} {group:<16} {row.samples:>10d} "
                f"{row.mean:>14.6g} {row.std:>12.4g} {row.n_seeds:>6d}"
            )
    for key, value in output.notes.items():
        print(f"{C.DIM}{key}:{C.RESET} {value}")
    for name, path in output.files.items():
        print(f"{C.DIM}{name}:{C.RESET} {path}")


def run_command(args: argparse.Namespace, logger: EnhancedLogger, db_manager: DatabaseManager | None) -> int:
    experiment = args.command.replace("-", "_")
    config_manager = ConfigManager(args.config, logger)
    overrides = build_overrides(args, experiment)
    if "output_dir" not in overrides and not config_manager.provides("output_dir"):
        overrides["output_dir"] = str(DEFAULT_OUTPUT_DIR / experiment)
    config = config_manager.resolve(experiment, overrides)
    workers = resolve_workers(config.workers, logger)

    canonical = config.canonical_json()
    run_id = None
    if db_manager:
        run_id = db_manager.log_run_start(experiment, git_blob_sha1(canonical), config.output_dir)

    def record(result: CellResult) -> None:
        if db_manager and run_id is not None:
            db_manager.log_cell_result(
                run_id,
                result.cell.algorithm,
                result.cell.group,
                result.cell.seed,
                result.duration,
                result.ok,
                _final_metric(result.value) if result.ok else None,
            )

    logger.log(
        "INFO",
        f"Running {experiment}",
        algorithms=",".join(config.algorithms) or "-",
        seeds=len(config.seeds),
        workers=workers,
        out=str(config.output_dir),
    )
    started_at = datetime.now().isoformat(timespec="seconds")
    status = "failed"
    try:
        output = run_experiment(config, CellRunner(workers, logger, on_result=record), logger)
        finished_at = datetime.now().isoformat(timespec="seconds")
        config_manager.save(config, config.output_dir / "config.json")
        write_meta(
            config.output_dir / "meta.json",
            config.to_dict(),
            canonical,
            get_system_info(),
            started_at,
            finished_at,
            extra={"workers_used": workers, "files": {k: str(v) for k, v in output.files.items()}},
        )
        status = "finished"
    except KeyboardInterrupt:
        status = "interrupted"
        raise
    except Exception as exc:
        if db_manager:
            db_manager.log_error(run_id, type(exc).__name__, str(exc), traceback.format_exc())
        raise
    finally:
        if db_manager and run_id is not None:
            db_manager.log_run_end(run_id, status)

    print_summary(config, output)
    if not output.passed:
        logger.log("ERROR", f"{experiment} checks failed", failed=output.notes.get("failed_checks"))
        return EXIT_FAILURE
    logger.log("SUCCESS", f"{experiment} finished", cells=output.cells)
    return EXIT_OK


def show_history(db_manager: DatabaseManager | None, limit: int, experiment: str | None) -> int:
    if db_manager is None:
        print("Run registry is disabled.")
        return EXIT_FAILURE
    runs = db_manager.recent_runs(limit, experiment.replace("-", "_") if experiment else None)
    if not runs:
        print("No runs recorded yet.")
        return EXIT_OK
    print(f"{'id':>5} {'experiment':<14} {'status':<12} {'cells':>6} {'failed':>6} {'seconds':>10}  output")
    for run in runs:
        duration = f"{run['duration']:.1f}" if run["duration"] is not None else "-"
        status = run["status"]
        color = "GREEN" if status == "finished" else "YELLOW" if status == "running" else "RED"
        print(
            f"{run['id']:>5} {run['experiment']:<14} {C.paint(f'{status:<12}', color)} "
            f"{run['cells']:>6} {run['failed_cells']:>6} {duration:>10}  {run['output_dir']}"
        )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    use_db = not getattr(args, "no_db", False)
    logger, db_manager = create_services(quiet=quiet, use_db=use_db)
    try:
        if args.command == "history":
            return show_history(db_manager, args.limit, args.experiment)
        return run_command(args, logger, db_manager)
    except ConfigError as exc:
        logger.log("ERROR", f"Configuration error: {exc}")
        return EXIT_CONFIG_ERROR
    except NumericalError as exc:
        logger.log("ERROR", f"Numerical failure: {exc}")
        return EXIT_NUMERICAL_ERROR
    except KeyboardInterrupt:
        logger.log("WARNING", "Interrupted")
        return EXIT_INTERRUPTED
    except Exception as exc:
        logger.log("CRITICAL", f"Unexpected error: {exc}")
        return EXIT_FAILURE
    finally:
        logger.close()


if __name__ == "__main__":
    sys.exit(main())
