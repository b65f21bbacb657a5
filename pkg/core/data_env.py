"""Synthetic regression and bandit-classification data."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from core.constants import (
    PROBLEM_DUMP_PREFIX,
    REGRESSION_N_TEST,
    REGRESSION_N_TRAIN,
    REGRESSION_NOISE_STD,
)
from core.numeric import InvalidArgumentError, as_vector
from core.online_linreg import BoundsConfig, LinearPredictor
from core.rng import RngStream, derive_seed, rng_derive, sample_unit_sphere


@dataclass
class RegressionProblem:
    """Linear-Gaussian regression task; x = [1; z] with z ~ N(0, Cov)."""

    w_true: np.ndarray
    cov: np.ndarray
    cov_factor: np.ndarray = field(repr=False)
    noise_std: float
    test_x: np.ndarray = field(repr=False)
    test_y: np.ndarray = field(repr=False)
    n_train: int
    seed: int

    @property
    def d(self) -> int:
        return int(self.cov.shape[0])

    @property
    def dim(self) -> int:
        return self.d + 1

    def draw(self, n: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
        z = rng.normal((n, self.d)) @ self.cov_factor.T
        x = np.hstack([np.ones((n, 1)), z])
        y = x @ self.w_true + self.noise_std * rng.normal(n)
        return x, y

    def train_stream(self) -> RngStream:
        return rng_derive(self.seed, ["linreg", "train"])

    def iter_train(
        self, batch_size: int, rng: RngStream | None = None
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Stream the training set in batches; the last batch may be short."""
        stream = rng or self.train_stream()
        remaining = self.n_train
        while remaining > 0:
            n = min(batch_size, remaining)
            remaining -= n
            yield self.draw(n, stream)


@dataclass
class ClassificationProblem:
    centers: np.ndarray
    within_std: float
    train_x: np.ndarray = field(repr=False)
    train_labels: np.ndarray = field(repr=False)
    test_x: np.ndarray = field(repr=False)
    test_labels: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return int(self.centers.shape[0])

    @property
    def d(self) -> int:
        return int(self.centers.shape[1])


def gen_linreg(
    d: int,
    n_train: int = REGRESSION_N_TRAIN,
    n_test: int = REGRESSION_N_TEST,
    seed: int = 0,
    noise_std: float = REGRESSION_NOISE_STD,
) -> RegressionProblem:
    if d < 1 or n_train < 1 or n_test < 1:
        raise InvalidArgumentError("d, n_train and n_test must all be >= 1")
    weights_rng = rng_derive(seed, ["linreg", "weights"])
    w_true = weights_rng.normal(d + 1)
    G = rng_derive(seed, ["linreg", "covariance"]).normal((d, d))
    cov_factor = G / np.sqrt(d)
    cov = cov_factor @ cov_factor.T
    problem = RegressionProblem(
        w_true=w_true,
        cov=cov,
        cov_factor=cov_factor,
        noise_std=noise_std,
        test_x=np.zeros((0, d + 1)),
        test_y=np.zeros(0),
        n_train=n_train,
        seed=seed,
    )
    problem.test_x, problem.test_y = problem.draw(n_test, rng_derive(seed, ["linreg", "test"]))
    return problem


def eval_test_mse(w: LinearPredictor | np.ndarray, problem: RegressionProblem) -> float:
    weights = w.w if isinstance(w, LinearPredictor) else as_vector(w, "w")
    if weights.shape[0] != problem.dim:
        raise InvalidArgumentError(
            f"predictor has dimension {weights.shape[0]}, problem {problem.dim}"
        )
    residual = problem.test_x @ weights - problem.test_y
    return float(np.mean(residual * residual))


def gen_bounded_stream(
    d: int,
    T: int,
    bounds: BoundsConfig,
    seed: int,
    jitter: float = 0.1,
    noise_std: float = REGRESSION_NOISE_STD,
) -> tuple[np.ndarray, np.ndarray]:
    """Bounded i.i.d. stream for regret runs: one planted direction plus isotropic jitter.

    Rows are truncated to ||x|| <= feature_bound and targets clipped to
    [-target_bound, target_bound]. The planted predictor has norm radius / 2.
    """
    if d < 1 or T < 1:
        raise InvalidArgumentError("d and T must be >= 1")
    rng = rng_derive(seed, ["regret", "stream", d])
    direction = sample_unit_sphere(d, rng)
    latent = rng.normal(T)
    x = latent[:, None] * direction[None, :] + (jitter / np.sqrt(d)) * rng.normal((T, d))
    x *= bounds.feature_bound
    norms = np.linalg.norm(x, axis=1)
    scale = np.minimum(1.0, bounds.feature_bound / np.maximum(norms, 1e-300))
    x *= scale[:, None]
    w_planted = 0.5 * bounds.radius * direction
    y = x @ w_planted + noise_std * rng.normal(T)
    y = np.clip(y, -bounds.target_bound, bounds.target_bound)
    return x, y


def gen_blobs_classification(
    K: int,
    d: int,
    n_train: int,
    n_test: int,
    separation: float,
    seed: int,
) -> ClassificationProblem:
    if K < 2 or d < 1:
        raise InvalidArgumentError("need K >= 2 and d >= 1")
    if separation < 0:
        raise InvalidArgumentError("separation must be non-negative")
    centers = separation * rng_derive(seed, ["blobs", "centers"]).normal((K, d))

    def sample(n: int, label: str) -> tuple[np.ndarray, np.ndarray]:
        rng = rng_derive(seed, ["blobs", label])
        labels = rng.integers(0, K, size=n)
        # Every class appears at least once when n allows it.
        if n >= K:
            labels[:K] = np.arange(K)
            labels = labels[rng.generator.permutation(n)]
        return centers[labels] + rng.normal((n, d)), labels

    train_x, train_labels = sample(n_train, "train")
    test_x, test_labels = sample(n_test, "test")
    return ClassificationProblem(
        centers=centers,
        within_std=1.0,
        train_x=train_x,
        train_labels=train_labels,
        test_x=test_x,
        test_labels=test_labels,
    )


def classification_reward(predicted_label, true_label):
    """+1 for a correct label, -1 otherwise; works elementwise on arrays."""
    correct = np.asarray(predicted_label) == np.asarray(true_label)
    reward = 2.0 * correct - 1.0
    return float(reward) if reward.ndim == 0 else reward


def problem_seed(master_seed: int, *labels) -> int:
    return derive_seed(master_seed, ["problem", *labels])


def dump_problem_csv(problem: RegressionProblem, path: str | Path, train_rows: int = 0) -> Path:
    """Write the test set (and optionally the first streamed training rows) as CSV."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    header = [*PROBLEM_DUMP_PREFIX, *[f"x{i}" for i in range(problem.dim)]]
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        if train_rows:
            train_x, train_y = problem.draw(train_rows, problem.train_stream())
            for index, (x, y) in enumerate(zip(train_x, train_y)):
                writer.writerow(["train", index, repr(float(y)), *map(repr, x.tolist())])
        for index, (x, y) in enumerate(zip(problem.test_x, problem.test_y)):
            writer.writerow(["test", index, repr(float(y)), *map(repr, x.tolist())])
    return file_path
