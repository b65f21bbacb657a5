from __future__ import annotations

import csv

import numpy as np
import pytest

from core.data_env import (
    classification_reward,
    dump_problem_csv,
    eval_test_mse,
    gen_blobs_classification,
    gen_bounded_stream,
    gen_linreg,
    problem_seed,
)
from core.numeric import InvalidArgumentError
from core.online_linreg import BoundsConfig, LinearPredictor


def test_gen_linreg_is_deterministic_and_has_bias_column():
    first = gen_linreg(4, n_train=100, n_test=50, seed=5)
    second = gen_linreg(4, n_train=100, n_test=50, seed=5)
    np.testing.assert_array_equal(first.w_true, second.w_true)
    np.testing.assert_array_equal(first.test_x, second.test_x)
    assert first.test_x.shape == (50, 5)
    np.testing.assert_array_equal(first.test_x[:, 0], 1.0)


def test_covariance_is_gram_of_scaled_gaussian():
    problem = gen_linreg(6, n_train=10, n_test=10, seed=1)
    np.testing.assert_allclose(problem.cov, problem.cov_factor @ problem.cov_factor.T)
    assert np.all(np.linalg.eigvalsh(problem.cov) >= -1e-12)


def test_true_weights_reach_the_noise_floor():
    problem = gen_linreg(3, n_train=10, n_test=5000, seed=2, noise_std=0.1)
    assert eval_test_mse(problem.w_true, problem) == pytest.approx(0.01, rel=0.1)
    assert eval_test_mse(LinearPredictor(problem.w_true), problem) == eval_test_mse(problem.w_true, problem)


def test_zero_noise_gives_zero_test_error_for_true_weights():
    problem = gen_linreg(3, n_train=10, n_test=100, seed=2, noise_std=0.0)
    assert eval_test_mse(problem.w_true, problem) == pytest.approx(0.0, abs=1e-24)


def test_eval_test_mse_rejects_wrong_dimension():
    problem = gen_linreg(3, n_train=10, n_test=10, seed=0)
    with pytest.raises(InvalidArgumentError):
        eval_test_mse(np.zeros(3), problem)


def test_iter_train_streams_exactly_n_train_rows():
    problem = gen_linreg(2, n_train=130, n_test=10, seed=0)
    sizes = [x.shape[0] for x, _ in problem.iter_train(64)]
    assert sizes == [64, 64, 2]
    again = [y for _, y in problem.iter_train(64)]
    np.testing.assert_array_equal(
        np.concatenate(again), np.concatenate([y for _, y in problem.iter_train(64)])
    )


def test_gen_linreg_validates_sizes():
    with pytest.raises(InvalidArgumentError):
        gen_linreg(0)


def test_bounded_stream_respects_bounds():
    bounds = BoundsConfig(radius=1.0, feature_bound=2.0, target_bound=0.5)
    X, y = gen_bounded_stream(8, 500, bounds, seed=4)
    assert X.shape == (500, 8)
    assert np.linalg.norm(X, axis=1).max() <= 2.0 + 1e-12
    assert np.abs(y).max() <= 0.5


def test_bounded_stream_differs_across_dimensions_and_seeds():
    bounds = BoundsConfig(radius=1.0, feature_bound=1.0, target_bound=1.0)
    X1, _ = gen_bounded_stream(4, 10, bounds, seed=1)
    X2, _ = gen_bounded_stream(4, 10, bounds, seed=2)
    assert not np.array_equal(X1, X2)


def test_blobs_have_every_class_and_are_deterministic():
    problem = gen_blobs_classification(4, 3, 200, 50, separation=3.0, seed=7)
    again = gen_blobs_classification(4, 3, 200, 50, separation=3.0, seed=7)
    np.testing.assert_array_equal(problem.train_x, again.train_x)
    assert set(problem.train_labels.tolist()) == {0, 1, 2, 3}
    assert problem.n_classes == 4
    assert problem.d == 3


def test_zero_separation_makes_classes_indistinguishable():
    problem = gen_blobs_classification(3, 2, 10, 10, separation=0.0, seed=0)
    np.testing.assert_array_equal(problem.centers, 0.0)


def test_blobs_validate_arguments():
    with pytest.raises(InvalidArgumentError):
        gen_blobs_classification(1, 3, 10, 10, 1.0, 0)
    with pytest.raises(InvalidArgumentError):
        gen_blobs_classification(3, 3, 10, 10, -1.0, 0)


def test_classification_reward_is_plus_minus_one():
    assert classification_reward(2, 2) == 1.0
    assert classification_reward(1, 2) == -1.0
    np.testing.assert_array_equal(classification_reward(np.array([0, 1]), np.array([0, 0])), [1.0, -1.0])


def test_problem_seed_separates_label_paths():
    assert problem_seed(0, "linreg", 10, 0) != problem_seed(0, "linreg", 10, 1)
    assert problem_seed(0, "linreg", 10, 0) == problem_seed(0, "linreg", 10, 0)


def test_dump_problem_csv_writes_header_and_rows(tmp_path):
    problem = gen_linreg(2, n_train=20, n_test=4, seed=0)
    path = dump_problem_csv(problem, tmp_path / "problem.csv", train_rows=3)
    with path.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["split", "index", "y", "x0", "x1", "x2"]
    assert [row[0] for row in rows[1:]] == ["train"] * 3 + ["test"] * 4
    assert float(rows[-1][2]) == problem.test_y[-1]
