"""Environment adapters that expose rewards over parameter vectors to ARS."""

from __future__ import annotations

import numpy as np

from core.ars import Evaluation, Evaluator, normalize_input
from core.constants import ARS_MINIBATCH
from core.data_env import ClassificationProblem, RegressionProblem, classification_reward
from core.lqr_env import LinearGaussianPolicy, LqrSystem, policy_cost_batch, rollout_policy
from core.numeric import InvalidArgumentError, RunningMoments, running_moments_from_batch
from core.rng import RngStream


def add_bias(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _normalize_features(x: np.ndarray, moments: RunningMoments | None) -> np.ndarray:
    """Normalise every column except the leading bias feature."""
    if moments is None:
        return x
    out = x.copy()
    out[:, 1:] = normalize_input(x[:, 1:], moments)
    return out


def _visited(x: np.ndarray, moments: RunningMoments | None) -> RunningMoments:
    return running_moments_from_batch(x[:, 1:]) if moments is not None else RunningMoments()


class RegressionTask:
    """Reward is the negative squared loss on a minibatch shared by the whole iteration."""

    metric_name = "test_mse"

    def __init__(self, problem: RegressionProblem, minibatch: int = ARS_MINIBATCH):
        if minibatch < 1:
            raise InvalidArgumentError("minibatch must be >= 1")
        self.problem = problem
        self.dim = problem.dim
        self.samples_per_evaluation = minibatch

    def initial_params(self) -> np.ndarray:
        return np.zeros(self.dim)

    def evaluator(self, rng: RngStream) -> Evaluator:
        x, y = self.problem.draw(self.samples_per_evaluation, rng)

        def evaluate(params, moments, _rng) -> Evaluation:
            residual = _normalize_features(x, moments) @ params - y
            return Evaluation(float(-np.mean(residual * residual)), _visited(x, moments))

        return evaluate

    def metric(self, w, moments) -> float:
        residual = _normalize_features(self.problem.test_x, moments) @ w - self.problem.test_y
        return float(np.mean(residual * residual))


class ClassificationTask:
    """Linear argmax classifier; reward is the mean +1/-1 correctness on a minibatch."""

    metric_name = "test_accuracy"

    def __init__(self, problem: ClassificationProblem, minibatch: int = ARS_MINIBATCH):
        if minibatch < 1:
            raise InvalidArgumentError("minibatch must be >= 1")
        self.problem = problem
        self.shape = (problem.n_classes, problem.d + 1)
        self.dim = self.shape[0] * self.shape[1]
        self.samples_per_evaluation = minibatch
        self._train_x = add_bias(problem.train_x)
        self._test_x = add_bias(problem.test_x)

    def initial_params(self) -> np.ndarray:
        return np.zeros(self.dim)

    def predict(self, params, x: np.ndarray, moments) -> np.ndarray:
        theta = np.asarray(params, dtype=float).reshape(self.shape)
        return np.argmax(_normalize_features(x, moments) @ theta.T, axis=1)

    def evaluator(self, rng: RngStream) -> Evaluator:
        rows = rng.integers(0, self._train_x.shape[0], size=self.samples_per_evaluation)
        x = self._train_x[rows]
        labels = self.problem.train_labels[rows]

        def evaluate(params, moments, _rng) -> Evaluation:
            rewards = classification_reward(self.predict(params, x, moments), labels)
            return Evaluation(float(np.mean(rewards)), _visited(x, moments))

        return evaluate

    def metric(self, w, moments) -> float:
        predicted = self.predict(w, self._test_x, moments)
        return float(np.mean(predicted == self.problem.test_labels))


class LqrTask:
    """Stationary linear policy a = w^T x; one evaluation is one noisy episode of H steps."""

    metric_name = "cost"

    def __init__(self, system: LqrSystem, H: int, w0, stochastic_noise: bool = True):
        self.system = system
        self.H = H
        self.w0 = np.asarray(w0, dtype=float)
        self.dim = system.d
        self.samples_per_evaluation = H
        self.stochastic_noise = stochastic_noise

    def initial_params(self) -> np.ndarray:
        return self.w0.copy()

    def evaluator(self, _rng: RngStream) -> Evaluator:
        def evaluate(params, moments, rng) -> Evaluation:
            if moments is not None:
                raise InvalidArgumentError("state normalisation is not supported for LQR")
            trajectory = rollout_policy(
                self.system,
                LinearGaussianPolicy(w=np.asarray(params, dtype=float)),
                self.H,
                rng,
                stochastic_policy=False,
                stochastic_noise=self.stochastic_noise,
            )
            return Evaluation(-trajectory.total_cost)

        return evaluate

    def metric(self, w, _moments) -> float:
        return float(policy_cost_batch(self.system, np.asarray(w, dtype=float)[None, :], self.H)[0])
