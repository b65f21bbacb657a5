"""Online linear regression under full-information, bandit and contextual-bandit feedback."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from core.constants import HINDSIGHT_REL_TOL
from core.numeric import InvalidArgumentError, as_matrix, as_vector, project_l2_ball
from core.rng import RngStream, sample_unit_sphere

LEARNER_KINDS = ("ogd", "bgd", "action")
KIND_ALIASES = {"action_rs": "action"}


def normalize_kind(kind: str) -> str:
    resolved = KIND_ALIASES.get(kind, kind)
    if resolved not in LEARNER_KINDS:
        raise InvalidArgumentError(f"unknown learner kind: {kind}")
    return resolved


@dataclass(frozen=True)
class BoundsConfig:
    """Problem constants: predictor, feature and target bounds, residual bound C, Lipschitz L."""

    radius: float
    feature_bound: float
    target_bound: float
    residual_bound: float | None = None
    lipschitz: float | None = None

    def __post_init__(self) -> None:
        for name in ("radius", "feature_bound", "target_bound"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        natural = self.radius * self.feature_bound + self.target_bound
        if self.residual_bound is None:
            object.__setattr__(self, "residual_bound", natural)
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", natural * self.feature_bound)
        if self.residual_bound <= 0 or self.lipschitz <= 0:
            raise InvalidArgumentError("residual_bound and lipschitz must be positive")
        if self.lipschitz > natural * self.feature_bound * (1 + 1e-12):
            raise InvalidArgumentError(
                f"lipschitz {self.lipschitz} exceeds (W*X + Y)*X = "
                f"{natural * self.feature_bound}"
            )


@dataclass
class LinearPredictor:
    w: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "LinearPredictor":
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return int(self.w.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def predict(self, x) -> float:
        return float(self.w @ x)


@dataclass
class RoundRecord:
    t: int
    x: np.ndarray
    y: float
    prediction: float
    loss: float
    perturbation: np.ndarray | float | None = None


@dataclass(frozen=True)
class ScheduleParams:
    lr: float
    delta: float


class LossOracle:
    """One round of the online game; (x_t, y_t) stay private to the environment.

    Full-information learners may call ``target``; contextual-bandit learners
    may call ``features`` and ``loss_at_prediction``; bandit learners only get
    ``loss_at_predictor``.
    """

    def __init__(self, t: int, x, y: float):
        self.t = t
        self._x = as_vector(x, "x")
        self._y = float(y)
        self._last_prediction: float | None = None
        self._last_loss: float | None = None
        self.calls = {"features": 0, "target": 0, "loss_at_prediction": 0, "loss_at_predictor": 0}

    @property
    def dim(self) -> int:
        return int(self._x.shape[0])

    def features(self) -> np.ndarray:
        self.calls["features"] += 1
        return self._x.copy()

    def target(self) -> float:
        self.calls["target"] += 1
        return self._y

    def loss_at_prediction(self, prediction: float) -> float:
        self.calls["loss_at_prediction"] += 1
        return self._charge(float(prediction))

    def loss_at_predictor(self, w) -> float:
        self.calls["loss_at_predictor"] += 1
        w = as_vector(w, "w")
        if w.shape[0] != self._x.shape[0]:
            raise InvalidArgumentError(
                f"predictor has dimension {w.shape[0]}, features {self._x.shape[0]}"
            )
        return self._charge(float(w @ self._x))

    def _charge(self, prediction: float) -> float:
        loss = (prediction - self._y) ** 2
        self._last_prediction = prediction
        self._last_loss = loss
        return loss

    def make_record(self, perturbation=None) -> RoundRecord:
        if self._last_prediction is None:
            raise RuntimeError("no loss was charged in this round")
        return RoundRecord(
            t=self.t,
            x=self._x,
            y=self._y,
            prediction=self._last_prediction,
            loss=self._last_loss,
            perturbation=perturbation,
        )


def _check_features(x: np.ndarray, bounds: BoundsConfig, logger) -> None:
    norm = float(np.linalg.norm(x))
    if norm > bounds.feature_bound * (1 + 1e-12) and logger:
        logger.log(
            "WARNING",
            "Feature norm exceeds the configured bound",
            norm=norm,
            bound=bounds.feature_bound,
        )


def ogd_step(
    pred: LinearPredictor,
    oracle: LossOracle,
    lr: float,
    bounds: BoundsConfig,
    logger=None,
) -> tuple[LinearPredictor, RoundRecord]:
    if lr <= 0:
        raise InvalidArgumentError(f"learning rate must be positive, got {lr}")
    x = oracle.features()
    if x.shape[0] != pred.dim:
        raise InvalidArgumentError(f"dimension mismatch: {pred.dim} vs {x.shape[0]}")
    _check_features(x, bounds, logger)
    prediction = pred.predict(x)
    oracle.loss_at_prediction(prediction)
    y = oracle.target()
    # Half-gradient update (factor 2 lives in the learning rate).
    w = pred.w - lr * (prediction - y) * x
    return LinearPredictor(project_l2_ball(w, bounds.radius)), oracle.make_record()


def bgd_param_step(
    pred: LinearPredictor,
    oracle: LossOracle,
    lr: float,
    delta: float,
    rng: RngStream,
    bounds: BoundsConfig,
    direction: np.ndarray | None = None,
) -> tuple[LinearPredictor, RoundRecord]:
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    d = pred.dim
    u = sample_unit_sphere(d, rng) if direction is None else as_vector(direction, "u")
    loss = oracle.loss_at_predictor(pred.w + delta * u)
    w = pred.w - lr * (loss * d / delta) * u
    return LinearPredictor(project_l2_ball(w, bounds.radius)), oracle.make_record(u)


def action_space_step(
    pred: LinearPredictor,
    oracle: LossOracle,
    lr: float,
    delta: float,
    rng: RngStream,
    bounds: BoundsConfig,
    sign: float | None = None,
    logger=None,
) -> tuple[LinearPredictor, RoundRecord]:
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    x = oracle.features()
    if x.shape[0] != pred.dim:
        raise InvalidArgumentError(f"dimension mismatch: {pred.dim} vs {x.shape[0]}")
    _check_features(x, bounds, logger)
    e = float(rng.signs()) if sign is None else float(sign)
    loss = oracle.loss_at_prediction(pred.predict(x) + delta * e)
    w = pred.w - lr * (loss * e / delta) * x
    return LinearPredictor(project_l2_ball(w, bounds.radius)), oracle.make_record(e)


def theorem_schedule(
    kind: str, bounds: BoundsConfig, d: int, t: int, T: int
) -> ScheduleParams:
    kind = normalize_kind(kind)
    W, X, C, L = bounds.radius, bounds.feature_bound, bounds.residual_bound, bounds.lipschitz
    if kind == "ogd":
        if t < 1:
            raise InvalidArgumentError(f"round index must be >= 1, got {t}")
        return ScheduleParams(lr=W / (C * X * math.sqrt(t)), delta=0.0)
    if T < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {T}")
    if kind == "bgd":
        spread = C * C + X * X
        delta = T ** -0.25 * math.sqrt(W * d * spread / (2.0 * L))
        return ScheduleParams(lr=W * delta / (d * spread * math.sqrt(T)), delta=delta)
    spread = C * C + 1.0
    delta = T ** -0.25 * math.sqrt(W * spread * X / (2.0 * C))
    return ScheduleParams(lr=W * delta / (spread * X * math.sqrt(T)), delta=delta)


def regret_bound_rhs(kind: str, bounds: BoundsConfig, d: int, T: int) -> float:
    kind = normalize_kind(kind)
    W, X, C, L = bounds.radius, bounds.feature_bound, bounds.residual_bound, bounds.lipschitz
    if kind == "ogd":
        return W * C * X * math.sqrt(T)
    if kind == "bgd":
        return math.sqrt(W * d * (C * C + X * X) * L) * T**0.75
    return math.sqrt(W * (C * C + 1.0) * X * C) * T**0.75


def best_in_hindsight(X, y, radius: float) -> LinearPredictor:
    """Least-squares comparator constrained to the L2 ball of the given radius."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] == 0:
        raise InvalidArgumentError("at least one round is required")
    w_ls, *_ = np.linalg.lstsq(X, y, rcond=None)
    if np.linalg.norm(w_ls) <= radius:
        return LinearPredictor(w_ls)
    eigvals, eigvecs = np.linalg.eigh(X.T @ X)
    eigvals = np.maximum(eigvals, 0.0)
    rotated = eigvecs.T @ (X.T @ y)

    def norm_at(lam: float) -> float:
        return float(np.linalg.norm(rotated / (eigvals + lam)))

    low, high = 0.0, 1.0
    while norm_at(high) > radius:
        low, high = high, high * 2.0
    for _ in range(400):
        mid = 0.5 * (low + high)
        norm = norm_at(mid)
        if abs(norm - radius) <= HINDSIGHT_REL_TOL * radius:
            break
        if norm > radius:
            low = mid
        else:
            high = mid
    w = eigvecs @ (rotated / (eigvals + mid))
    return LinearPredictor(project_l2_ball(w, radius))


@dataclass
class RegretLedger:
    records: list[RoundRecord] = field(default_factory=list)
    comparator: LinearPredictor | None = None
    radius: float | None = None

    def append(self, record: RoundRecord) -> None:
        self.records.append(record)
        self.comparator = None

    def __len__(self) -> int:
        return len(self.records)

    def features(self) -> np.ndarray:
        return np.stack([record.x for record in self.records])

    def targets(self) -> np.ndarray:
        return np.array([record.y for record in self.records])

    def losses(self) -> np.ndarray:
        return np.array([record.loss for record in self.records])

    def cumulative_losses(self) -> np.ndarray:
        return np.cumsum(self.losses())

    def best_predictor(self, radius: float) -> LinearPredictor:
        if self.comparator is None or self.radius != radius:
            self.comparator = best_in_hindsight(self.features(), self.targets(), radius)
            self.radius = radius
        return self.comparator

    def comparator_losses(self, radius: float) -> np.ndarray:
        w_star = self.best_predictor(radius).w
        return (self.features() @ w_star - self.targets()) ** 2


def empirical_regret(
    ledger: RegretLedger, bounds: BoundsConfig, kind: str, d: int, T: int
) -> tuple[float, float]:
    if not ledger.records:
        raise InvalidArgumentError("ledger is empty")
    regret = float(ledger.losses().sum() - ledger.comparator_losses(bounds.radius).sum())
    return regret, regret_bound_rhs(kind, bounds, d, T)


def run_online_learner(
    kind: str,
    X,
    y,
    bounds: BoundsConfig,
    rng: RngStream,
    T: int | None = None,
    logger=None,
) -> RegretLedger:
    """Play T rounds of the stream with the regret-bound step schedule, starting from w = 0."""
    kind = normalize_kind(kind)
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    T = X.shape[0] if T is None else T
    if T > X.shape[0]:
        raise InvalidArgumentError(f"stream has {X.shape[0]} rounds, {T} requested")
    d = X.shape[1]
    pred = LinearPredictor.zeros(d)
    ledger = RegretLedger()
    fixed = None if kind == "ogd" else theorem_schedule(kind, bounds, d, 1, T)
    for t in range(1, T + 1):
        oracle = LossOracle(t, X[t - 1], y[t - 1])
        if kind == "ogd":
            schedule = theorem_schedule(kind, bounds, d, t, T)
            pred, record = ogd_step(pred, oracle, schedule.lr, bounds, logger=logger)
        elif kind == "bgd":
            pred, record = bgd_param_step(pred, oracle, fixed.lr, fixed.delta, rng, bounds)
        else:
            pred, record = action_space_step(
                pred, oracle, fixed.lr, fixed.delta, rng, bounds, logger=logger
            )
        ledger.append(record)
    return ledger


def average_regret_curve(
    ledger: RegretLedger, radius: float, every: int
) -> list[tuple[int, float]]:
    """(t, R_t / t) every `every` rounds against the comparator of the whole ledger."""
    if every < 1:
        raise InvalidArgumentError(f"every must be >= 1, got {every}")
    excess = np.cumsum(ledger.losses() - ledger.comparator_losses(radius))
    T = excess.shape[0]
    rounds = list(range(every, T + 1, every))
    if not rounds or rounds[-1] != T:
        rounds.append(T)
    return [(t, float(excess[t - 1] / t)) for t in rounds]
