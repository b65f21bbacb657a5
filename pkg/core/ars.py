"""Augmented Random Search (V1-t / V2-t) in parameter space."""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from core.constants import NORMALIZER_STD_FLOOR, REWARD_STD_FLOOR
from core.numeric import (
    InvalidArgumentError,
    NumericalError,
    RunningMoments,
    as_vector,
    running_moments_merge,
)
from core.rng import RngStream

VARIANTS = ("V1t", "V2t")


@dataclass(frozen=True)
class ArsConfig:
    stepsize: float
    n_directions: int
    n_top: int
    perturbation: float
    variant: str = "V1t"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"unknown ARS variant {self.variant!r}")
        if not 1 <= self.n_top <= self.n_directions:
            raise InvalidArgumentError(
                f"need 1 <= n_top <= n_directions, got {self.n_top} / {self.n_directions}"
            )
        if self.stepsize <= 0 or self.perturbation <= 0:
            raise InvalidArgumentError("stepsize and perturbation must be positive")

    @classmethod
    def from_mapping(cls, values: dict, variant: str) -> "ArsConfig":
        return cls(
            stepsize=float(values["stepsize"]),
            n_directions=int(values["n_directions"]),
            n_top=int(values["n_top"]),
            perturbation=float(values["perturbation"]),
            variant=variant,
        )

    @property
    def normalizes(self) -> bool:
        return self.variant == "V2t"

    @property
    def evaluations_per_iteration(self) -> int:
        return 2 * self.n_directions


@dataclass(frozen=True)
class ArsState:
    w: np.ndarray
    moments: RunningMoments = field(default_factory=RunningMoments)
    iteration: int = 0


@dataclass(frozen=True)
class Evaluation:
    """Reward of one perturbed policy and the raw inputs it visited."""

    reward: float
    visited: RunningMoments = field(default_factory=RunningMoments)


Evaluator = Callable[[np.ndarray, "RunningMoments | None", RngStream], Evaluation]


@dataclass
class ArsDiagnostics:
    iteration: int
    rewards_plus: np.ndarray
    rewards_minus: np.ndarray
    kept: np.ndarray
    reward_std: float = 0.0
    step_norm: float = 0.0
    degenerate: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class ArsTask(Protocol):
    """What ars_train needs from an environment adapter."""

    dim: int
    metric_name: str
    samples_per_evaluation: int

    def initial_params(self) -> np.ndarray: ...

    def evaluator(self, rng: RngStream) -> Evaluator: ...

    def metric(self, w: np.ndarray, moments: RunningMoments | None) -> float: ...


@dataclass
class ArsRun:
    state: ArsState
    curve: list[tuple[int, float]]
    samples: int = 0
    degenerate_iterations: int = 0
    stopped_early: bool = False


def normalize_input(x, moments: RunningMoments | None) -> np.ndarray:
    """(x - mean) / max(std, 1e-8) on the last axis; identity until two inputs are seen."""
    values = np.asarray(x, dtype=float)
    if moments is None or moments.mean is None or moments.count < 2:
        return values.copy()
    if values.shape[-1] != moments.mean.shape[0]:
        raise InvalidArgumentError(
            f"input has dimension {values.shape[-1]}, moments {moments.mean.shape[0]}"
        )
    return (values - moments.mean) / np.maximum(moments.std, NORMALIZER_STD_FLOOR)


def _evaluate_direction(
    evaluate: Evaluator,
    w: np.ndarray,
    direction: np.ndarray,
    config: ArsConfig,
    moments: RunningMoments | None,
    rng: RngStream,
    index: int,
) -> tuple[Evaluation, Evaluation]:
    plus = evaluate(w + config.perturbation * direction, moments, rng.derive("evaluate", index, "+"))
    minus = evaluate(w - config.perturbation * direction, moments, rng.derive("evaluate", index, "-"))
    return plus, minus


def ars_iteration(
    evaluate: Evaluator,
    state: ArsState,
    config: ArsConfig,
    rng: RngStream,
    executor: Executor | None = None,
) -> tuple[ArsState, ArsDiagnostics]:
    """One ARS update; direction k only ever reads streams derived from (rng, k)."""
    w = as_vector(state.w, "w")
    moments = state.moments if config.normalizes else None
    directions = np.stack(
        [rng.derive("direction", k).normal(w.shape[0]) for k in range(config.n_directions)]
    )

    def job(k: int) -> tuple[Evaluation, Evaluation]:
        return _evaluate_direction(evaluate, w, directions[k], config, moments, rng, k)

    indices = range(config.n_directions)
    results = list(executor.map(job, indices)) if executor else [job(k) for k in indices]
    r_plus = np.array([plus.reward for plus, _ in results], dtype=float)
    r_minus = np.array([minus.reward for _, minus in results], dtype=float)
    diagnostics = ArsDiagnostics(
        iteration=state.iteration,
        rewards_plus=r_plus,
        rewards_minus=r_minus,
        kept=np.zeros(0, dtype=int),
    )
    if not (np.all(np.isfinite(r_plus)) and np.all(np.isfinite(r_minus))):
        diagnostics.error = "non-finite reward"
        return state, diagnostics

    # Stable sort keeps ties in direction order.
    order = np.argsort(-np.maximum(r_plus, r_minus), kind="stable")
    kept = order[: config.n_top]
    diagnostics.kept = kept
    reward_std = float(np.std(np.concatenate([r_plus[kept], r_minus[kept]])))
    diagnostics.reward_std = reward_std

    new_moments = state.moments
    if config.normalizes:
        for plus, minus in results:
            new_moments = running_moments_merge(new_moments, plus.visited)
            new_moments = running_moments_merge(new_moments, minus.visited)

    if reward_std < REWARD_STD_FLOOR:
        diagnostics.degenerate = True
        new_w = w
    else:
        step = (config.stepsize / (config.n_top * reward_std)) * (
            (r_plus[kept] - r_minus[kept]) @ directions[kept]
        )
        diagnostics.step_norm = float(np.linalg.norm(step))
        new_w = w + step
    return ArsState(w=new_w, moments=new_moments, iteration=state.iteration + 1), diagnostics


def ars_train(
    task: ArsTask,
    config: ArsConfig,
    budget: int,
    eval_every: int,
    rng: RngStream,
    stop_when: Callable[[int, float], bool] | None = None,
    executor: Executor | None = None,
    logger=None,
) -> ArsRun:
    """Run ARS until the next iteration would exceed the sample budget.

    An iteration costs 2 * n_directions * task.samples_per_evaluation samples.
    The metric is checkpointed at the start, whenever the sample count crosses
    a multiple of eval_every, and once more at the end of training.
    """
    if budget < 0:
        raise InvalidArgumentError(f"budget must be non-negative, got {budget}")
    if eval_every < 1:
        raise InvalidArgumentError(f"eval_every must be >= 1, got {eval_every}")
    state = ArsState(w=np.asarray(task.initial_params(), dtype=float))
    cost = config.evaluations_per_iteration * task.samples_per_evaluation
    curve = [(0, task.metric(state.w, state.moments if config.normalizes else None))]
    run = ArsRun(state=state, curve=curve)
    if stop_when is not None and stop_when(0, curve[0][1]):
        run.stopped_early = True
        return run

    next_checkpoint = eval_every
    while run.samples + cost <= budget:
        iteration_rng = rng.derive("iteration", run.state.iteration)
        evaluate = task.evaluator(iteration_rng.derive("evaluator"))
        run.state, diagnostics = ars_iteration(
            evaluate, run.state, config, iteration_rng, executor=executor
        )
        if not diagnostics.ok:
            raise NumericalError(
                f"ARS iteration {diagnostics.iteration} failed: {diagnostics.error}"
            )
        if diagnostics.degenerate:
            run.degenerate_iterations += 1
            if logger:
                logger.log(
                    "DEBUG",
                    "ARS iteration skipped (reward spread below floor)",
                    iteration=diagnostics.iteration,
                )
        run.samples += cost
        if run.samples >= next_checkpoint:
            while next_checkpoint <= run.samples:
                next_checkpoint += eval_every
            value = task.metric(run.state.w, run.state.moments if config.normalizes else None)
            run.curve.append((run.samples, value))
            if stop_when is not None and stop_when(run.samples, value):
                run.stopped_early = True
                return run

    if run.curve[-1][0] != run.samples:
        value = task.metric(run.state.w, run.state.moments if config.normalizes else None)
        run.curve.append((run.samples, value))
        if stop_when is not None and stop_when(run.samples, value):
            run.stopped_early = True
    return run
