"""Score-function and random-search gradient estimators.

Internally every estimator works in the ascent convention on rewards; costs
are negated exactly once where an environment hands them over.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from core.constants import COST_CAP, FISHER_DAMPING, REINFORCE_BETA
from core.lqr_env import (
    LinearGaussianPolicy,
    LqrSystem,
    Trajectory,
    open_loop_cost_batch,
    policy_cost_batch,
    rollout_policy,
)
from core.numeric import (
    InvalidArgumentError,
    as_matrix,
    as_vector,
    solve_linear_system,
)
from core.rng import RngStream, sample_unit_ball_batch, sample_unit_sphere_batch


@dataclass
class GradientEstimate:
    g: np.ndarray
    norm: float = field(init=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        self.norm = float(np.linalg.norm(self.g))

    def as_matrix(self) -> np.ndarray:
        shape = self.meta.get("shape")
        if shape is None:
            raise InvalidArgumentError("estimate has no matrix shape")
        return self.g.reshape(shape)


@dataclass(frozen=True)
class GaussianPolicyParams:
    w: np.ndarray
    logstd: float = 0.0
    beta: float = REINFORCE_BETA


@dataclass(frozen=True)
class SoftmaxPolicyParams:
    """Logit weights theta with shape (K, d + 1); inputs carry a leading 1."""

    theta: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.theta.shape[0])

    def probabilities(self, X) -> np.ndarray:
        logits = as_matrix(X, "X") @ self.theta.T
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        return weights / weights.sum(axis=1, keepdims=True)

    def sample_labels(self, X, rng: RngStream) -> np.ndarray:
        probs = self.probabilities(X)
        cumulative = np.cumsum(probs, axis=1)
        draws = rng.uniform(probs.shape[0])
        labels = (cumulative < draws[:, None]).sum(axis=1)
        return np.minimum(labels, self.n_classes - 1)

    def predict(self, X) -> np.ndarray:
        return np.argmax(as_matrix(X, "X") @ self.theta.T, axis=1)


def _batch(X, values, rewards) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = as_matrix(X, "X")
    values = np.asarray(values)
    rewards = as_vector(rewards, "rewards")
    if X.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    if not (X.shape[0] == values.shape[0] == rewards.shape[0]):
        raise InvalidArgumentError("batch arrays disagree on length")
    return X, values, rewards


def reinforce_gaussian_grad(
    X, sampled, rewards, params: GaussianPolicyParams
) -> GradientEstimate:
    """Ascent gradient of (1/N) sum r_i log N(yhat_i; w^T x_i, beta^2) w.r.t. w."""
    if params.beta <= 0:
        raise InvalidArgumentError(f"beta must be positive, got {params.beta}")
    X, sampled, rewards = _batch(X, sampled, rewards)
    scores = (sampled.astype(float) - X @ params.w) / params.beta**2
    g = X.T @ (rewards * scores) / X.shape[0]
    return GradientEstimate(g, meta={"beta": params.beta, "batch": X.shape[0]})


def reinforce_categorical_grad(
    X, labels, rewards, params: SoftmaxPolicyParams
) -> GradientEstimate:
    """Ascent gradient of (1/N) sum r_i log softmax_{k_i}(theta x_i)."""
    X, labels, rewards = _batch(X, labels, rewards)
    labels = labels.astype(int)
    K = params.n_classes
    if np.any(labels < 0) or np.any(labels >= K):
        raise InvalidArgumentError(f"labels must lie in [0, {K})")
    indicator = np.zeros((X.shape[0], K))
    indicator[np.arange(X.shape[0]), labels] = 1.0
    residual = (indicator - params.probabilities(X)) * rewards[:, None]
    g = residual.T @ X / X.shape[0]
    return GradientEstimate(g, meta={"shape": params.theta.shape, "batch": X.shape[0]})


def natural_grad(
    X,
    gradient: GradientEstimate,
    params: GaussianPolicyParams,
    damping: float = FISHER_DAMPING,
    fisher: np.ndarray | None = None,
) -> GradientEstimate:
    """Precondition by the Fisher of the Gaussian-mean policy, (1/(N beta^2)) X^T X.

    A caller that accumulates the Fisher over earlier batches passes it as
    ``fisher``; X is then only validated.
    """
    X = as_matrix(X, "X")
    if X.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    if fisher is None:
        fisher = X.T @ X / (X.shape[0] * params.beta**2)
    direction = solve_linear_system(fisher, gradient.g, damping)
    return GradientEstimate(direction, meta={**gradient.meta, "damping": damping})


def reinforce_trajectory_grad(
    trajectories: Sequence[Trajectory],
    policy: LinearGaussianPolicy,
    use_cost_to_go: bool = True,
) -> GradientEstimate:
    """Descent gradient of expected total cost over the parameters (w, logstd)."""
    if not trajectories:
        raise InvalidArgumentError("trajectory batch is empty")
    variance = policy.action_std**2
    ascent = np.zeros(policy.w.shape[0] + 1)
    for trajectory in trajectories:
        if trajectory.horizon == 0:
            continue
        X = trajectory.states.T
        residual = trajectory.actions - X @ policy.w
        if use_cost_to_go:
            rewards = -trajectory.cost_to_go()
        else:
            rewards = np.full(trajectory.horizon, -trajectory.total_cost)
        ascent[:-1] += X.T @ (rewards * residual / variance)
        ascent[-1] += float(rewards @ (residual * residual / variance - 1.0))
    ascent /= len(trajectories)
    return GradientEstimate(
        -ascent,
        meta={"episodes": len(trajectories), "cost_to_go": use_cost_to_go},
    )


def action_space_rl_grad(
    system: LqrSystem,
    w,
    delta: float,
    H: int,
    rng: RngStream,
    samples: int = 1,
    stochastic_noise: bool = False,
) -> GradientEstimate:
    """(H J(a + delta u_H) / delta) X u_H, averaged over `samples` directions."""
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    w = as_vector(w, "w")
    nominal = rollout_policy(
        system,
        LinearGaussianPolicy(w=w),
        H,
        rng if stochastic_noise else None,
        stochastic_policy=False,
        stochastic_noise=stochastic_noise,
    )
    X = nominal.states
    if nominal.truncated:
        X = np.hstack([X, np.zeros((system.d, H - X.shape[1]))])
        actions = np.concatenate([nominal.actions, np.zeros(H - nominal.horizon)])
    else:
        actions = nominal.actions
    directions = sample_unit_sphere_batch(samples, H, rng)
    costs = open_loop_cost_batch(
        system, actions[None, :] + delta * directions, rng, stochastic_noise
    )
    per_sample = (H * costs / delta)[:, None] * (directions @ X.T)
    return GradientEstimate(
        per_sample.mean(axis=0),
        meta={
            "delta": delta,
            "cost": costs[0] if samples == 1 else costs,
            "direction": directions[0] if samples == 1 else directions,
            "states": X,
            "truncated": nominal.truncated or bool(np.any(costs >= COST_CAP)),
        },
    )


def param_space_rl_grad(
    system: LqrSystem,
    w,
    delta: float,
    H: int,
    rng: RngStream,
    samples: int = 1,
) -> GradientEstimate:
    """(d J(w + delta u_d) / delta) u_d with deterministic rollouts."""
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    w = as_vector(w, "w")
    d = w.shape[0]
    directions = sample_unit_sphere_batch(samples, d, rng)
    costs = policy_cost_batch(system, w[None, :] + delta * directions, H)
    per_sample = (d * costs / delta)[:, None] * directions
    return GradientEstimate(
        per_sample.mean(axis=0),
        meta={
            "delta": delta,
            "cost": costs[0] if samples == 1 else costs,
            "direction": directions[0] if samples == 1 else directions,
        },
    )


def smoothed_objective_mc(
    objective: Callable,
    w,
    delta: float,
    n_samples: int,
    rng: RngStream,
    vectorized: bool = False,
) -> float:
    """Monte-Carlo estimate of E_{v ~ unit ball}[objective(w + delta v)]."""
    if n_samples < 1:
        raise InvalidArgumentError("n_samples must be >= 1")
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    w = as_vector(w, "w")
    points = w[None, :] + delta * sample_unit_ball_batch(n_samples, w.shape[0], rng)
    if vectorized:
        values = np.asarray(objective(points), dtype=float)
    else:
        values = np.array([objective(point) for point in points], dtype=float)
    return float(values.mean())
