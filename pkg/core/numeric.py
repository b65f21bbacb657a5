"""Projection, optimizer and small-matrix kernels shared by the learners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    DEFAULT_SPECTRAL_TOL,
    SPECTRAL_MAX_SQUARINGS,
)


class InvalidArgumentError(ValueError):
    """Raised when an operation receives arguments of the wrong shape or range."""


class NumericalError(RuntimeError):
    """Raised when a numerical kernel cannot produce a finite answer."""


class RankDeficiencyError(NumericalError):
    """Raised when a linear system without regularisation is singular."""


def as_vector(value, name: str = "vector") -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.ndim != 1:
        raise InvalidArgumentError(f"{name} must be 1-D, got shape {array.shape}")
    return array


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {array.shape}")
    return array


def require_same_dim(*arrays: np.ndarray) -> int:
    dims = {array.shape[0] for array in arrays}
    if len(dims) != 1:
        raise InvalidArgumentError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def project_l2_ball(v, radius: float) -> np.ndarray:
    if radius <= 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    vector = as_vector(v, "v")
    norm = float(np.linalg.norm(vector))
    if norm <= radius:
        return vector.copy()
    return vector * (radius / norm)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPSILON

    @classmethod
    def zeros(cls, dim: int, lr: float, **hyperparameters: float) -> "AdamState":
        return cls(m=np.zeros(dim), v=np.zeros(dim), lr=lr, **hyperparameters)


def adam_step(
    state: AdamState, params, grad
) -> tuple[AdamState, np.ndarray]:
    """Bias-corrected ADAM descent step."""
    params = as_vector(params, "params")
    grad = as_vector(grad, "grad")
    require_same_dim(params, grad, state.m, state.v)
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), params - step


def sgd_momentum_step(
    params, velocity, grad, lr: float, momentum: float
) -> tuple[np.ndarray, np.ndarray]:
    params = as_vector(params, "params")
    velocity = as_vector(velocity, "velocity")
    grad = as_vector(grad, "grad")
    require_same_dim(params, velocity, grad)
    velocity = momentum * velocity + grad
    return params - lr * velocity, velocity


def solve_normal_equations(gram, xty, ridge: float) -> np.ndarray:
    """Solve (gram + ridge*I) w = xty; singular systems without ridge fail loudly."""
    gram = as_matrix(gram, "gram")
    xty = as_vector(xty, "xty")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be non-negative, got {ridge}")
    dim = require_same_dim(gram, xty)
    system = gram + ridge * np.eye(dim)
    if ridge == 0 and np.linalg.matrix_rank(system) < dim:
        raise RankDeficiencyError(
            f"normal equations are rank deficient (rank < {dim}) and ridge is 0"
        )
    try:
        return np.linalg.solve(system, xty)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"normal equations are singular: {exc}") from exc


def newton_ls_step(X_batch, y_batch, ridge: float = 0.0) -> np.ndarray:
    X = as_matrix(X_batch, "X_batch")
    y = as_vector(y_batch, "y_batch")
    if X.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    if X.shape[0] != y.shape[0]:
        raise InvalidArgumentError(
            f"batch has {X.shape[0]} rows but {y.shape[0]} targets"
        )
    return solve_normal_equations(X.T @ X, X.T @ y, ridge)


@dataclass(frozen=True)
class RunningMoments:
    """Welford accumulator with the population variance convention."""

    count: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int | None:
        return None if self.mean is None else int(self.mean.shape[0])

    @property
    def variance(self) -> np.ndarray:
        if self.mean is None:
            return np.zeros(0)
        if self.count == 0:
            return np.zeros_like(self.mean)
        return np.maximum(self.m2 / self.count, 0.0)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def running_moments_update(state: RunningMoments, x) -> RunningMoments:
    x = as_vector(x, "x")
    if state.mean is None or state.count == 0:
        return RunningMoments(count=1, mean=x.copy(), m2=np.zeros_like(x))
    require_same_dim(state.mean, x)
    count = state.count + 1
    delta = x - state.mean
    mean = state.mean + delta / count
    m2 = state.m2 + delta * (x - mean)
    return RunningMoments(count=count, mean=mean, m2=m2)


def running_moments_merge(left: RunningMoments, right: RunningMoments) -> RunningMoments:
    """Chan et al. pairwise combination; merging in a fixed order is deterministic."""
    if right.count == 0 or right.mean is None:
        return left
    if left.count == 0 or left.mean is None:
        return right
    require_same_dim(left.mean, right.mean)
    count = left.count + right.count
    delta = right.mean - left.mean
    mean = left.mean + delta * (right.count / count)
    m2 = left.m2 + right.m2 + delta * delta * (left.count * right.count / count)
    return RunningMoments(count=count, mean=mean, m2=m2)


def running_moments_from_batch(X) -> RunningMoments:
    X = as_matrix(X, "X")
    if X.shape[0] == 0:
        return RunningMoments()
    mean = X.mean(axis=0)
    m2 = ((X - mean) ** 2).sum(axis=0)
    return RunningMoments(count=int(X.shape[0]), mean=mean, m2=m2)


def spectral_radius(
    A, tol: float = DEFAULT_SPECTRAL_TOL, max_squarings: int = SPECTRAL_MAX_SQUARINGS
) -> float:
    """Gelfand estimate lim ||A^k||^(1/k) via repeated squaring with renormalisation."""
    matrix = as_matrix(A, "A")
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgumentError(f"A must be square, got shape {matrix.shape}")
    if matrix.size == 0:
        return 0.0
    norm = float(np.linalg.norm(matrix, 2))
    if norm == 0.0:
        return 0.0
    log_scale = 0.0
    power = 1
    estimate = norm
    for _ in range(max_squarings):
        log_scale += math.log(norm)
        matrix = matrix / norm
        matrix = matrix @ matrix
        log_scale *= 2.0
        power *= 2
        norm = float(np.linalg.norm(matrix, 2))
        if norm == 0.0 or not math.isfinite(norm):
            return 0.0 if norm == 0.0 else estimate
        previous = estimate
        estimate = math.exp((log_scale + math.log(norm)) / power)
        if abs(estimate - previous) <= tol * max(estimate, np.finfo(float).tiny):
            break
    return estimate


def solve_linear_system(F, g, damping: float = 0.0) -> np.ndarray:
    """Cholesky solve of (F + damping*I) x = g, retrying once with 10x damping."""
    F = as_matrix(F, "F")
    g = as_vector(g, "g")
    if F.shape[0] != F.shape[1]:
        raise InvalidArgumentError(f"F must be square, got shape {F.shape}")
    dim = require_same_dim(F, g)
    fallback = 10.0 * damping if damping > 0 else 1e-8
    for extra in (damping, fallback):
        try:
            factor = np.linalg.cholesky(F + extra * np.eye(dim))
        except np.linalg.LinAlgError:
            continue
        return np.linalg.solve(factor.T, np.linalg.solve(factor, g))
    raise NumericalError(
        f"matrix is not positive definite even with damping {fallback}"
    )
