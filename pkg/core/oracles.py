"""Analytic and Monte-Carlo consistency checks for the estimators and the Riccati oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.lqr_env import LqrSystem, gen_lqr_system, policy_cost_batch, riccati_optimal
from core.online_linreg import BoundsConfig, LinearPredictor, LossOracle, action_space_step
from core.policy_gradient import (
    GaussianPolicyParams,
    action_space_rl_grad,
    param_space_rl_grad,
    reinforce_gaussian_grad,
    smoothed_objective_mc,
)
from core.rng import RngStream, rng_derive, sample_unit_sphere_batch

MC_CHUNK = 250_000


@dataclass(frozen=True)
class OracleResult:
    check: str
    value: float
    tolerance: float
    passed: bool

    def as_row(self) -> dict:
        return {
            "check": self.check,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _relative_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    return float(np.linalg.norm(estimate - truth) / max(np.linalg.norm(truth), 1e-300))


def _chunked_mean(n_samples: int, rng: RngStream, draw: Callable[[int, RngStream], np.ndarray]):
    """Mean of per-chunk means weighted by chunk size; chunk k reads rng.derive('chunk', k)."""
    total = None
    done = 0
    index = 0
    while done < n_samples:
        size = min(MC_CHUNK, n_samples - done)
        chunk = draw(size, rng.derive("chunk", index)) * size
        total = chunk if total is None else total + chunk
        done += size
        index += 1
    return total / n_samples


def check_two_point_exactness(n_pairs: int, rng: RngStream, d: int = 5) -> OracleResult:
    """Averaging the action-space step over e = +1 and e = -1 gives 2 (w^T x - y) x exactly."""
    bounds = BoundsConfig(radius=1e6, feature_bound=1e3, target_bound=1e3)
    worst = 0.0
    for _ in range(n_pairs):
        w = rng.normal(d)
        x = rng.normal(d)
        y = float(rng.normal())
        delta = 0.1 + 0.9 * float(rng.uniform())
        pred = LinearPredictor(w)
        steps = []
        for sign in (1.0, -1.0):
            moved, _ = action_space_step(pred, LossOracle(1, x, y), 1.0, delta, rng, bounds, sign=sign)
            steps.append(w - moved.w)
        averaged = 0.5 * (steps[0] + steps[1])
        worst = max(worst, _relative_error(averaged, 2.0 * (w @ x - y) * x))
    return OracleResult("two_point_exactness", worst, 1e-10, worst <= 1e-10)


def check_bgd_unbiased(n_samples: int, rng: RngStream, d: int = 10, delta: float = 2.0) -> OracleResult:
    """Mean of (d / delta) l(w + delta u) u over the sphere against 2 (w^T x - y) x."""
    x = np.zeros(d)
    x[0] = 1.0
    w = np.zeros(d)
    y = -1.0

    def draw(size: int, stream: RngStream) -> np.ndarray:
        u = sample_unit_sphere_batch(size, d, stream)
        losses = ((w + delta * u) @ x - y) ** 2
        return ((d / delta) * losses[:, None] * u).mean(axis=0)

    estimate = _chunked_mean(n_samples, rng, draw)
    error = _relative_error(estimate, 2.0 * (w @ x - y) * x)
    return OracleResult("bgd_unbiased", error, 0.01, error <= 0.01)


def _fd_system() -> LqrSystem:
    return LqrSystem(
        A=np.array([[0.5, 0.2], [0.0, 0.4]]),
        B=np.array([1.0, 0.5]),
        Q=np.eye(2),
        R=1.0,
        noise_scale=0.0,
        x1=np.array([1.0, 1.0]),
    )


def check_param_space_vs_smoothed(
    n_samples: int, fd_samples: int, rng: RngStream, delta: float = 0.5, step: float = 1e-3
) -> OracleResult:
    """Mean of the parameter-space estimator against a central difference of the smoothed cost."""
    system = _fd_system()
    H = 2
    w = np.array([0.3, -0.2])

    def draw(size: int, stream: RngStream) -> np.ndarray:
        return param_space_rl_grad(system, w, delta, H, stream, samples=size).g

    estimate = _chunked_mean(n_samples, rng.derive("estimator"), draw)

    def objective(points: np.ndarray) -> np.ndarray:
        return policy_cost_batch(system, points, H)

    fd = np.zeros(w.shape[0])
    for i in range(w.shape[0]):
        offset = np.zeros(w.shape[0])
        offset[i] = step
        # Common random numbers: both sides read the same stream.
        plus = smoothed_objective_mc(
            objective, w + offset, delta, fd_samples, rng.derive("smoothing"), vectorized=True
        )
        minus = smoothed_objective_mc(
            objective, w - offset, delta, fd_samples, rng.derive("smoothing"), vectorized=True
        )
        fd[i] = (plus - minus) / (2.0 * step)
    error = _relative_error(estimate, fd)
    return OracleResult("param_space_vs_smoothed_fd", error, 0.01, error <= 0.01)


def check_action_space_mean(n_samples: int, rng: RngStream, tolerance: float = 0.01) -> OracleResult:
    """Scalar system A = B = Q = R = 1, x1 = 1, w = 2, H = 2: E[estimate] = X grad_a J = 46."""
    system = LqrSystem(
        A=np.ones((1, 1)), B=np.ones(1), Q=np.eye(1), R=1.0, noise_scale=0.0, x1=np.ones(1)
    )

    def draw(size: int, stream: RngStream) -> np.ndarray:
        return action_space_rl_grad(system, np.array([2.0]), 1.0, 2, stream, samples=size).g

    estimate = _chunked_mean(n_samples, rng, draw)
    error = _relative_error(estimate, np.array([46.0]))
    return OracleResult("action_space_mean", error, tolerance, error <= tolerance)


def check_riccati_scalar() -> OracleResult:
    """A = B = Q = R = 1, H = 2, x1 = 1: K1 = 0.5 and optimal cost 1.5."""
    system = LqrSystem(
        A=np.ones((1, 1)), B=np.ones(1), Q=np.eye(1), R=1.0, noise_scale=0.0, x1=np.ones(1)
    )
    solution = riccati_optimal(system, 2)
    error = abs(solution.gains[0, 0] - 0.5) + abs(solution.optimal_cost - 1.5)
    return OracleResult("riccati_scalar", error, 1e-12, error <= 1e-12)


def check_riccati_dominance(n_systems: int, n_policies: int, rng: RngStream) -> OracleResult:
    """No random stationary policy beats the Riccati optimum; value is the smallest cost ratio."""
    worst_ratio = np.inf
    for index in range(n_systems):
        stream = rng.derive("system", index)
        d = int(stream.integers(1, 6))
        H = int(stream.integers(1, 21))
        system = gen_lqr_system(d, seed=stream.next_u64(), noise_scale=0.0, control_cost=1.0)
        optimum = riccati_optimal(system, H).optimal_cost
        W = 0.5 * stream.normal((n_policies, d))
        costs = policy_cost_batch(system, W, H)
        worst_ratio = min(worst_ratio, float(costs.min() / optimum))
    tolerance = 1e-9
    return OracleResult("riccati_dominance", worst_ratio, tolerance, worst_ratio >= 1.0 - tolerance)


def check_gaussian_score(n_samples: int, rng: RngStream) -> OracleResult:
    """Hand value g = 4 at (yhat=1, w=0, x=1, beta=0.5) and a zero-mean score under unit reward."""
    hand = reinforce_gaussian_grad(
        np.ones((1, 1)), np.ones(1), np.ones(1), GaussianPolicyParams(w=np.zeros(1), beta=0.5)
    ).g[0]
    params = GaussianPolicyParams(w=np.array([0.5, -1.0]), beta=0.5)
    X = rng.normal((n_samples, 2))
    sampled = X @ params.w + params.beta * rng.normal(n_samples)
    mean_score = reinforce_gaussian_grad(X, sampled, np.ones(n_samples), params).g
    # Each coordinate has standard deviation ~ 1 / (beta sqrt(n)).
    tolerance = 6.0 / (params.beta * np.sqrt(n_samples))
    value = max(abs(hand - 4.0), float(np.abs(mean_score).max()))
    return OracleResult("gaussian_score", value, tolerance, value <= tolerance)


def run_oracle_checks(settings: dict, master_seed: int, logger=None) -> list[OracleResult]:
    def stream(name: str) -> RngStream:
        return rng_derive(master_seed, ["oracle", name])

    checks = [
        lambda: check_two_point_exactness(settings["pair_checks"], stream("two_point")),
        lambda: check_bgd_unbiased(settings["mc_samples"], stream("bgd")),
        lambda: check_param_space_vs_smoothed(
            settings["mc_samples"], settings["fd_samples"], stream("param_fd")
        ),
        lambda: check_action_space_mean(settings["mc_samples"], stream("action")),
        check_riccati_scalar,
        lambda: check_riccati_dominance(
            settings["riccati_systems"], settings["riccati_policies"], stream("riccati")
        ),
        lambda: check_gaussian_score(settings["mc_samples"], stream("score")),
    ]
    results = []
    for check in checks:
        result = check()
        results.append(result)
        if logger:
            logger.log(
                "SUCCESS" if result.passed else "ERROR",
                f"Oracle {result.check}",
                value=result.value,
                tolerance=result.tolerance,
            )
    return results
