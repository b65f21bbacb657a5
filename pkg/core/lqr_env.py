"""Finite-horizon LQR: random systems, rollouts and the Riccati oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.constants import (
    COST_CAP,
    LQR_CONTROL_COST,
    LQR_NOISE_SCALE,
    LQR_TARGET_RHO,
    UNSTABLE_INIT_MAX_DOUBLINGS,
)
from core.numeric import InvalidArgumentError, as_matrix, as_vector, spectral_radius
from core.rng import RngStream, rng_derive


class GenerationError(RuntimeError):
    """Raised when a random construction cannot satisfy its contract."""


@dataclass(frozen=True)
class LqrSystem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: float
    noise_scale: float
    x1: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        d = self.A.shape[0]
        if self.A.shape != (d, d) or self.B.shape != (d,) or self.x1.shape != (d,):
            raise InvalidArgumentError("A must be d x d, B and x1 length d")
        if self.Q.shape != (d, d):
            raise InvalidArgumentError("Q must be d x d")
        if self.R <= 0 or self.noise_scale < 0:
            raise InvalidArgumentError("R must be positive and noise_scale non-negative")

    @property
    def d(self) -> int:
        return int(self.A.shape[0])

    def closed_loop(self, w) -> np.ndarray:
        return self.A + np.outer(self.B, as_vector(w, "w"))

    def step_costs(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Per-step costs for states (..., d) and actions (...)."""
        quadratic = np.einsum("...i,ij,...j->...", states, self.Q, states)
        return quadratic + self.R * actions * actions

    def to_dict(self) -> dict:
        identity = bool(np.array_equal(self.Q, np.eye(self.d)))
        return {
            "d": self.d,
            "A": self.A.reshape(-1).tolist(),
            "B": self.B.tolist(),
            "Q": "identity" if identity else self.Q.reshape(-1).tolist(),
            "R": self.R,
            "c": self.noise_scale,
            "x1": self.x1.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LqrSystem":
        d = int(payload["d"])
        Q = payload.get("Q", "identity")
        return cls(
            A=np.asarray(payload["A"], dtype=float).reshape(d, d),
            B=np.asarray(payload["B"], dtype=float),
            Q=np.eye(d) if Q == "identity" else np.asarray(Q, dtype=float).reshape(d, d),
            R=float(payload["R"]),
            noise_scale=float(payload["c"]),
            x1=np.asarray(payload["x1"], dtype=float),
            seed=payload.get("seed"),
        )


@dataclass(frozen=True)
class LinearGaussianPolicy:
    """pi(a | x) = N(w^T x, exp(logstd)^2)."""

    w: np.ndarray
    logstd: float = 0.0

    @property
    def action_std(self) -> float:
        return float(np.exp(self.logstd))

    @property
    def params(self) -> np.ndarray:
        return np.append(self.w, self.logstd)

    @classmethod
    def from_params(cls, params) -> "LinearGaussianPolicy":
        params = as_vector(params, "params")
        return cls(w=params[:-1].copy(), logstd=float(params[-1]))


@dataclass
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    total_cost: float
    truncated: bool = False

    @property
    def horizon(self) -> int:
        return int(self.actions.shape[0])

    def cost_to_go(self) -> np.ndarray:
        """Tail sums of the step costs; every step of a truncated episode carries the cap."""
        if self.truncated:
            return np.full(self.horizon, COST_CAP)
        tail = np.cumsum(self.costs[::-1])[::-1]
        return np.minimum(tail, COST_CAP)


@dataclass(frozen=True)
class RiccatiSolution:
    gains: np.ndarray
    P1: np.ndarray
    optimal_cost: float
    value_matrices: list[np.ndarray] = field(default_factory=list, repr=False)

    def action(self, t: int, x) -> float:
        """Optimal action at 1-based step t."""
        return float(-self.gains[t - 1] @ x)


def gen_lqr_system(
    d: int,
    seed: int,
    target_rho: float = LQR_TARGET_RHO,
    noise_scale: float = LQR_NOISE_SCALE,
    control_cost: float = LQR_CONTROL_COST,
) -> LqrSystem:
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    rng = rng_derive(seed, ["lqr", "system"])
    A = rng.normal((d, d))
    rho = spectral_radius(A)
    while rho == 0.0:
        A = rng.normal((d, d))
        rho = spectral_radius(A)
    A *= target_rho / rho
    B = rng.normal(d)
    x1 = rng.normal(d)
    return LqrSystem(A=A, B=B, Q=np.eye(d), R=control_cost, noise_scale=noise_scale, x1=x1, seed=seed)


def embed_system(system: LqrSystem, d: int) -> LqrSystem:
    """Pad a system with inert coordinates so its trajectories are unchanged in d dimensions."""
    if d < system.d:
        raise InvalidArgumentError(f"cannot embed a {system.d}-d system into {d} dims")
    A = np.zeros((d, d))
    A[: system.d, : system.d] = system.A
    Q = np.eye(d)
    Q[: system.d, : system.d] = system.Q
    pad = np.zeros(d - system.d)
    return LqrSystem(
        A=A,
        B=np.concatenate([system.B, pad]),
        Q=Q,
        R=system.R,
        noise_scale=system.noise_scale,
        x1=np.concatenate([system.x1, pad]),
        seed=system.seed,
    )


def init_unstable_policy(
    system: LqrSystem, rng: RngStream, max_doublings: int = UNSTABLE_INIT_MAX_DOUBLINGS
) -> LinearGaussianPolicy:
    scale = 1.0
    for _ in range(max_doublings + 1):
        w = scale * rng.normal(system.d)
        if spectral_radius(system.closed_loop(w)) > 1.0:
            return LinearGaussianPolicy(w=w, logstd=0.0)
        scale *= 2.0
    raise GenerationError(
        f"no unstable closed loop found after {max_doublings} doublings"
    )


def _simulate_arrays(
    system: LqrSystem,
    H: int,
    episodes: int,
    rng: RngStream | None,
    stochastic_noise: bool,
    choose_actions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shared rollout loop; choose_actions(t, states) -> actions for every episode.

    Returns states (episodes, d, H), actions, costs and the step at which each
    episode was truncated (H when it ran to the end).
    """
    if H < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {H}")
    if stochastic_noise and rng is None:
        raise InvalidArgumentError("stochastic noise needs an rng")
    d = system.d
    states = np.zeros((episodes, d, H))
    actions = np.zeros((episodes, H))
    costs = np.zeros((episodes, H))
    stopped_at = np.full(episodes, H)
    running = np.zeros(episodes)
    x = np.tile(system.x1, (episodes, 1))
    noise_std = np.sqrt(system.noise_scale)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(H):
            live = stopped_at == H
            states[:, :, t] = x
            a = choose_actions(t, x)
            actions[:, t] = a
            step = system.step_costs(x, a)
            running = running + step
            broken = live & ~(np.isfinite(running) & np.all(np.isfinite(x), axis=1)
                              & (running <= COST_CAP))
            stopped_at[broken] = t
            costs[:, t] = np.where(live & ~broken, step, 0.0)
            x = x @ system.A.T + np.outer(a, system.B)
            if stochastic_noise and noise_std > 0:
                x = x + noise_std * rng.normal((episodes, d))
            x[stopped_at < H] = 0.0
    return states, actions, costs, stopped_at


def _total_costs(costs: np.ndarray, stopped_at: np.ndarray) -> np.ndarray:
    return np.where(stopped_at < costs.shape[1], COST_CAP, costs.sum(axis=1))


def _simulate(
    system: LqrSystem,
    H: int,
    episodes: int,
    rng: RngStream | None,
    stochastic_noise: bool,
    choose_actions,
) -> list[Trajectory]:
    states, actions, costs, stopped_at = _simulate_arrays(
        system, H, episodes, rng, stochastic_noise, choose_actions
    )
    trajectories = []
    for episode in range(episodes):
        stop = int(stopped_at[episode])
        if stop < H:
            trajectories.append(
                Trajectory(
                    states=states[episode, :, :stop].copy(),
                    actions=actions[episode, :stop].copy(),
                    costs=costs[episode, :stop].copy(),
                    total_cost=COST_CAP,
                    truncated=True,
                )
            )
        else:
            trajectories.append(
                Trajectory(
                    states=states[episode],
                    actions=actions[episode],
                    costs=costs[episode],
                    total_cost=float(costs[episode].sum()),
                )
            )
    return trajectories


def rollout_policy_batch(
    system: LqrSystem,
    policy: LinearGaussianPolicy,
    H: int,
    episodes: int,
    rng: RngStream | None,
    stochastic_policy: bool = True,
    stochastic_noise: bool = True,
) -> list[Trajectory]:
    if stochastic_policy and rng is None:
        raise InvalidArgumentError("a stochastic policy needs an rng")
    std = policy.action_std

    def choose(_t: int, x: np.ndarray) -> np.ndarray:
        mean = x @ policy.w
        if stochastic_policy:
            return mean + std * rng.normal(x.shape[0])
        return mean

    return _simulate(system, H, episodes, rng, stochastic_noise, choose)


def rollout_policy(
    system: LqrSystem,
    policy: LinearGaussianPolicy,
    H: int,
    rng: RngStream | None,
    stochastic_policy: bool = True,
    stochastic_noise: bool = True,
) -> Trajectory:
    return rollout_policy_batch(
        system, policy, H, 1, rng, stochastic_policy, stochastic_noise
    )[0]


def rollout_open_loop_batch(
    system: LqrSystem,
    actions,
    rng: RngStream | None = None,
    stochastic_noise: bool = False,
) -> list[Trajectory]:
    """actions has shape (episodes, H); each row is played verbatim."""
    plan = as_matrix(actions, "actions")
    return _simulate(
        system, plan.shape[1], plan.shape[0], rng, stochastic_noise, lambda t, _x: plan[:, t]
    )


def rollout_open_loop(
    system: LqrSystem,
    actions,
    rng: RngStream | None = None,
    stochastic_noise: bool = False,
) -> tuple[float, Trajectory]:
    plan = as_vector(actions, "actions")
    trajectory = rollout_open_loop_batch(system, plan[None, :], rng, stochastic_noise)[0]
    return trajectory.total_cost, trajectory


def rollout_time_varying(system: LqrSystem, gains, H: int) -> Trajectory:
    """Deterministic rollout of a_t = -K_t x_t without process noise."""
    K = as_matrix(gains, "gains")
    return _simulate(system, H, 1, None, False, lambda t, x: -(x @ K[t]))[0]


def policy_cost_batch(system: LqrSystem, W, H: int) -> np.ndarray:
    """Deterministic noise-free costs J(w) for every row of W."""
    W = as_matrix(W, "W")
    _, _, costs, stopped_at = _simulate_arrays(
        system, H, W.shape[0], None, False, lambda _t, x: np.einsum("ij,ij->i", x, W)
    )
    return _total_costs(costs, stopped_at)


def open_loop_cost_batch(
    system: LqrSystem, actions, rng: RngStream | None = None, stochastic_noise: bool = False
) -> np.ndarray:
    """Total cost of every open-loop plan (row of actions)."""
    plan = as_matrix(actions, "actions")
    _, _, costs, stopped_at = _simulate_arrays(
        system, plan.shape[1], plan.shape[0], rng, stochastic_noise, lambda t, _x: plan[:, t]
    )
    return _total_costs(costs, stopped_at)


def riccati_optimal(system: LqrSystem, H: int) -> RiccatiSolution:
    if H < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {H}")
    A, B, Q, R = system.A, system.B, system.Q, system.R
    gains = np.zeros((H, system.d))
    P = Q.copy()
    values = [P]
    for t in range(H - 2, -1, -1):
        PB = P @ B
        K = (PB @ A) / (R + B @ PB)
        closed = A - np.outer(B, K)
        P = Q + R * np.outer(K, K) + closed.T @ P @ closed
        P = 0.5 * (P + P.T)
        gains[t] = K
        values.append(P)
    values.reverse()
    return RiccatiSolution(
        gains=gains,
        P1=P,
        optimal_cost=float(system.x1 @ P @ system.x1),
        value_matrices=values,
    )


def eval_policy_cost(
    system: LqrSystem,
    policy: LinearGaussianPolicy,
    H: int,
    episodes: int,
    rng: RngStream | None,
    deterministic: bool = False,
) -> tuple[float, float]:
    if episodes < 1:
        raise InvalidArgumentError("episodes must be >= 1")
    if deterministic:
        trajectory = rollout_policy(system, policy, H, None, False, False)
        return trajectory.total_cost, 0.0
    trajectories = rollout_policy_batch(system, policy, H, episodes, rng)
    costs = np.array([trajectory.total_cost for trajectory in trajectories])
    return float(costs.mean()), float(costs.std())


def save_system_json(system: LqrSystem, path: str | Path) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(json.dumps(system.to_dict(), indent=2), encoding="utf-8")
    return file_path


def load_system_json(path: str | Path) -> LqrSystem:
    return LqrSystem.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
