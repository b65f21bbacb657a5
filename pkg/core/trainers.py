"""Training loops that turn one algorithm on one problem into a learning curve.

Every loop counts samples (regression/classification rows, or LQR steps),
checkpoints its metric at sample 0 and whenever the count crosses a multiple
of ``eval_every``, and always records the final sample count.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.ars import ArsConfig, ars_train
from core.constants import FISHER_DAMPING, NATURAL_REINFORCE_MAX_SHIFT, NEWTON_RIDGE, REINFORCE_BETA
from core.data_env import (
    ClassificationProblem,
    RegressionProblem,
    classification_reward,
    eval_test_mse,
)
from core.lqr_env import LinearGaussianPolicy, LqrSystem, policy_cost_batch, rollout_policy_batch
from core.numeric import (
    AdamState,
    InvalidArgumentError,
    NumericalError,
    adam_step,
    sgd_momentum_step,
    solve_normal_equations,
)
from core.policy_gradient import (
    GaussianPolicyParams,
    SoftmaxPolicyParams,
    natural_grad,
    reinforce_categorical_grad,
    reinforce_gaussian_grad,
    reinforce_trajectory_grad,
)
from core.rng import RngStream
from core.tasks import ClassificationTask, LqrTask, RegressionTask, add_bias

StopRule = Callable[[int, float], bool]


@dataclass
class TrainingRun:
    metric: str
    curve: list[tuple[int, float]]
    samples: int
    params: np.ndarray | None = None
    stopped_early: bool = False

    @property
    def final_value(self) -> float:
        return self.curve[-1][1]


class _Checkpoints:
    def __init__(self, eval_every: int, stop_when: StopRule | None = None):
        if eval_every < 1:
            raise InvalidArgumentError(f"eval_every must be >= 1, got {eval_every}")
        self.eval_every = eval_every
        self.next = eval_every
        self.stop_when = stop_when
        self.points: list[tuple[int, float]] = []
        self.stopped = False

    def record(self, samples: int, value: float) -> bool:
        if not np.isfinite(value):
            raise NumericalError(f"metric became non-finite at {samples} samples")
        self.points.append((samples, float(value)))
        if self.stop_when is not None and self.stop_when(samples, value):
            self.stopped = True
        return self.stopped

    def due(self, samples: int) -> bool:
        if samples < self.next:
            return False
        while self.next <= samples:
            self.next += self.eval_every
        return True

    def finish(self, samples: int, value_fn: Callable[[], float]) -> None:
        if not self.stopped and self.points[-1][0] != samples:
            self.record(samples, value_fn())


def _regression_batches(problem: RegressionProblem, batch_size: int, budget: int):
    """Shared training stream, truncated to the budget."""
    seen = 0
    for x, y in problem.iter_train(batch_size):
        if seen >= budget:
            return
        take = min(x.shape[0], budget - seen)
        seen += take
        yield x[:take], y[:take], seen


def train_supervised_sgd(
    problem: RegressionProblem,
    lr: float,
    batch_size: int,
    budget: int,
    eval_every: int,
    momentum: float = 0.0,
) -> TrainingRun:
    w = np.zeros(problem.dim)
    velocity = np.zeros(problem.dim)
    marks = _Checkpoints(eval_every)
    marks.record(0, eval_test_mse(w, problem))
    samples = 0
    for x, y, samples in _regression_batches(problem, batch_size, budget):
        grad = (2.0 / x.shape[0]) * (x.T @ (x @ w - y))
        w, velocity = sgd_momentum_step(w, velocity, grad, lr, momentum)
        if marks.due(samples):
            marks.record(samples, eval_test_mse(w, problem))
    marks.finish(samples, lambda: eval_test_mse(w, problem))
    return TrainingRun("test_mse", marks.points, samples, w)


def train_supervised_newton(
    problem: RegressionProblem,
    batch_size: int,
    budget: int,
    eval_every: int,
    ridge: float = NEWTON_RIDGE,
) -> TrainingRun:
    """Exact minimiser of the cumulative squared loss; solved only when checkpointed."""
    gram = np.zeros((problem.dim, problem.dim))
    xty = np.zeros(problem.dim)
    w = np.zeros(problem.dim)
    marks = _Checkpoints(eval_every)
    marks.record(0, eval_test_mse(w, problem))
    samples = 0

    def solve() -> np.ndarray:
        return solve_normal_equations(gram, xty, ridge)

    for x, y, samples in _regression_batches(problem, batch_size, budget):
        gram += x.T @ x
        xty += x.T @ y
        if marks.due(samples):
            w = solve()
            marks.record(samples, eval_test_mse(w, problem))
    if samples and marks.points[-1][0] != samples:
        w = solve()
    marks.finish(samples, lambda: eval_test_mse(w, problem))
    return TrainingRun("test_mse", marks.points, samples, w)


def train_reinforce_linreg(
    problem: RegressionProblem,
    lr: float,
    batch_size: int,
    budget: int,
    eval_every: int,
    rng: RngStream,
    beta: float = REINFORCE_BETA,
) -> TrainingRun:
    """Gaussian-prediction REINFORCE with reward -(yhat - y)^2 and ADAM on the negated gradient."""
    w = np.zeros(problem.dim)
    adam = AdamState.zeros(problem.dim, lr)
    marks = _Checkpoints(eval_every)
    marks.record(0, eval_test_mse(w, problem))
    samples = 0
    for x, y, samples in _regression_batches(problem, batch_size, budget):
        sampled = x @ w + beta * rng.normal(x.shape[0])
        rewards = -((sampled - y) ** 2)
        g = reinforce_gaussian_grad(x, sampled, rewards, GaussianPolicyParams(w=w, beta=beta))
        adam, w = adam_step(adam, w, -g.g)
        if marks.due(samples):
            marks.record(samples, eval_test_mse(w, problem))
    marks.finish(samples, lambda: eval_test_mse(w, problem))
    return TrainingRun("test_mse", marks.points, samples, w)


def train_natural_reinforce_linreg(
    problem: RegressionProblem,
    lr: float,
    batch_size: int,
    budget: int,
    eval_every: int,
    rng: RngStream,
    beta: float = REINFORCE_BETA,
    damping: float = FISHER_DAMPING,
    max_shift: float = NATURAL_REINFORCE_MAX_SHIFT,
) -> TrainingRun:
    """Fisher-preconditioned REINFORCE; the step size after t batches is lr / sqrt(t).

    The Fisher is estimated from every input seen so far. A step that would move
    the predictions on those inputs by more than ``max_shift`` (RMS) is clipped.
    """
    w = np.zeros(problem.dim)
    gram = np.zeros((problem.dim, problem.dim))
    marks = _Checkpoints(eval_every)
    marks.record(0, eval_test_mse(w, problem))
    samples = 0
    for step, (x, y, samples) in enumerate(
        _regression_batches(problem, batch_size, budget), start=1
    ):
        gram += x.T @ x
        params = GaussianPolicyParams(w=w, beta=beta)
        sampled = x @ w + beta * rng.normal(x.shape[0])
        rewards = -((sampled - y) ** 2)
        direction = natural_grad(
            x,
            reinforce_gaussian_grad(x, sampled, rewards, params),
            params,
            damping,
            fisher=gram / (samples * beta**2),
        )
        update = (lr / np.sqrt(step)) * direction.g
        shift = np.sqrt(float(update @ gram @ update) / samples)
        if shift > max_shift:
            update *= max_shift / shift
        w = w + update
        if marks.due(samples):
            marks.record(samples, eval_test_mse(w, problem))
    marks.finish(samples, lambda: eval_test_mse(w, problem))
    return TrainingRun("test_mse", marks.points, samples, w)


def _from_ars(run, metric: str) -> TrainingRun:
    return TrainingRun(metric, run.curve, run.samples, run.state.w, run.stopped_early)


def train_ars_linreg(
    problem: RegressionProblem,
    config: ArsConfig,
    budget: int,
    eval_every: int,
    rng: RngStream,
    minibatch: int,
    executor: Executor | None = None,
    logger=None,
) -> TrainingRun:
    task = RegressionTask(problem, minibatch)
    run = ars_train(task, config, budget, eval_every, rng, executor=executor, logger=logger)
    return _from_ars(run, task.metric_name)


def _test_accuracy(params: SoftmaxPolicyParams, test_x: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(params.predict(test_x) == labels))


def _class_batches(problem: ClassificationProblem, batch_size: int, budget: int, rng: RngStream):
    train_x = add_bias(problem.train_x)
    seen = 0
    while seen < budget:
        take = min(batch_size, budget - seen)
        rows = rng.integers(0, train_x.shape[0], size=take)
        seen += take
        yield train_x[rows], problem.train_labels[rows], seen


def train_supervised_classifier(
    problem: ClassificationProblem,
    lr: float,
    momentum: float,
    batch_size: int,
    budget: int,
    eval_every: int,
    rng: RngStream,
) -> TrainingRun:
    """Softmax cross-entropy SGD, started from a one-vs-all least-squares fit on the first batch."""
    K, dim = problem.n_classes, problem.d + 1
    test_x = add_bias(problem.test_x)
    theta = np.zeros((K, dim))
    velocity = np.zeros(K * dim)
    marks = _Checkpoints(eval_every)
    marks.record(0, _test_accuracy(SoftmaxPolicyParams(theta), test_x, problem.test_labels))
    samples = 0
    for index, (x, labels, samples) in enumerate(_class_batches(problem, batch_size, budget, rng)):
        onehot = np.zeros((x.shape[0], K))
        onehot[np.arange(x.shape[0]), labels] = 1.0
        if index == 0:
            targets = 2.0 * onehot - 1.0
            gram = x.T @ x
            theta = np.stack(
                [solve_normal_equations(gram, x.T @ targets[:, k], NEWTON_RIDGE) for k in range(K)]
            )
        else:
            probs = SoftmaxPolicyParams(theta).probabilities(x)
            grad = (probs - onehot).T @ x / x.shape[0]
            flat, velocity = sgd_momentum_step(theta.reshape(-1), velocity, grad.reshape(-1), lr, momentum)
            theta = flat.reshape(K, dim)
        if marks.due(samples):
            marks.record(samples, _test_accuracy(SoftmaxPolicyParams(theta), test_x, problem.test_labels))
    marks.finish(
        samples, lambda: _test_accuracy(SoftmaxPolicyParams(theta), test_x, problem.test_labels)
    )
    return TrainingRun("test_accuracy", marks.points, samples, theta.reshape(-1))


def train_reinforce_classifier(
    problem: ClassificationProblem,
    lr: float,
    batch_size: int,
    budget: int,
    eval_every: int,
    rng: RngStream,
) -> TrainingRun:
    """Categorical REINFORCE with +1/-1 bandit rewards and ADAM."""
    K, dim = problem.n_classes, problem.d + 1
    test_x = add_bias(problem.test_x)
    theta = np.zeros(K * dim)
    adam = AdamState.zeros(K * dim, lr)
    batch_rng = rng.derive("batches")
    action_rng = rng.derive("actions")
    marks = _Checkpoints(eval_every)
    marks.record(0, _test_accuracy(SoftmaxPolicyParams(theta.reshape(K, dim)), test_x, problem.test_labels))
    samples = 0
    for x, labels, samples in _class_batches(problem, batch_size, budget, batch_rng):
        policy = SoftmaxPolicyParams(theta.reshape(K, dim))
        chosen = policy.sample_labels(x, action_rng)
        rewards = classification_reward(chosen, labels)
        g = reinforce_categorical_grad(x, chosen, rewards, policy)
        adam, theta = adam_step(adam, theta, -g.g)
        if marks.due(samples):
            marks.record(
                samples,
                _test_accuracy(SoftmaxPolicyParams(theta.reshape(K, dim)), test_x, problem.test_labels),
            )
    marks.finish(
        samples,
        lambda: _test_accuracy(SoftmaxPolicyParams(theta.reshape(K, dim)), test_x, problem.test_labels),
    )
    return TrainingRun("test_accuracy", marks.points, samples, theta)


def train_ars_classifier(
    problem: ClassificationProblem,
    config: ArsConfig,
    budget: int,
    eval_every: int,
    rng: RngStream,
    minibatch: int,
    executor: Executor | None = None,
    logger=None,
) -> TrainingRun:
    task = ClassificationTask(problem, minibatch)
    run = ars_train(task, config, budget, eval_every, rng, executor=executor, logger=logger)
    return _from_ars(run, task.metric_name)


def train_reinforce_lqr(
    system: LqrSystem,
    H: int,
    w0,
    lr: float,
    batch_size: int,
    budget: int,
    eval_every_iterations: int,
    rng: RngStream,
    use_cost_to_go: bool = True,
    stop_when: StopRule | None = None,
) -> TrainingRun:
    """Trajectory REINFORCE over (w, logstd); every trajectory costs H samples."""
    policy = LinearGaussianPolicy(w=np.asarray(w0, dtype=float), logstd=0.0)
    params = policy.params
    adam = AdamState.zeros(params.shape[0], lr)
    cost = batch_size * H

    def deterministic_cost() -> float:
        return float(policy_cost_batch(system, params[None, :-1], H)[0])

    marks = _Checkpoints(eval_every_iterations * cost, stop_when)
    samples = 0
    if marks.record(0, deterministic_cost()):
        return TrainingRun("cost", marks.points, 0, params[:-1], True)
    iteration = 0
    while samples + cost <= budget:
        policy = LinearGaussianPolicy.from_params(params)
        trajectories = rollout_policy_batch(
            system, policy, H, batch_size, rng.derive("iteration", iteration)
        )
        grad = reinforce_trajectory_grad(trajectories, policy, use_cost_to_go)
        adam, params = adam_step(adam, params, grad.g)
        iteration += 1
        samples += cost
        if marks.due(samples) and marks.record(samples, deterministic_cost()):
            break
    marks.finish(samples, deterministic_cost)
    return TrainingRun("cost", marks.points, samples, params[:-1], marks.stopped)


def train_ars_lqr(
    system: LqrSystem,
    H: int,
    w0,
    config: ArsConfig,
    budget: int,
    eval_every_iterations: int,
    rng: RngStream,
    stop_when: StopRule | None = None,
    executor: Executor | None = None,
    logger=None,
) -> TrainingRun:
    task = LqrTask(system, H, w0)
    eval_every = eval_every_iterations * config.evaluations_per_iteration * H
    run = ars_train(
        task, config, budget, eval_every, rng, stop_when=stop_when, executor=executor, logger=logger
    )
    return _from_ars(run, task.metric_name)
