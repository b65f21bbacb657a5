from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from core.ars import (
    ArsConfig,
    ArsState,
    Evaluation,
    ars_iteration,
    ars_train,
    normalize_input,
)
from core.numeric import (
    InvalidArgumentError,
    NumericalError,
    RunningMoments,
    running_moments_from_batch,
)
from core.rng import RngStream


class QuadraticTask:
    metric_name = "distance"

    def __init__(self, target, samples_per_evaluation: int = 5):
        self.target = np.asarray(target, dtype=float)
        self.dim = self.target.shape[0]
        self.samples_per_evaluation = samples_per_evaluation

    def initial_params(self) -> np.ndarray:
        return np.zeros(self.dim)

    def evaluator(self, _rng):
        def evaluate(params, _moments, _stream):
            return Evaluation(-float(np.sum((params - self.target) ** 2)))

        return evaluate

    def metric(self, w, _moments) -> float:
        return float(np.linalg.norm(w - self.target))


def quadratic(target):
    target = np.asarray(target, dtype=float)

    def evaluate(params, _moments, _stream):
        return Evaluation(-float(np.sum((params - target) ** 2)))

    return evaluate


def test_config_validates_fields():
    with pytest.raises(InvalidArgumentError):
        ArsConfig(stepsize=0.1, n_directions=4, n_top=5, perturbation=0.1)
    with pytest.raises(InvalidArgumentError):
        ArsConfig(stepsize=0.1, n_directions=4, n_top=2, perturbation=0.1, variant="V3")
    with pytest.raises(InvalidArgumentError):
        ArsConfig(stepsize=0.0, n_directions=4, n_top=2, perturbation=0.1)
    config = ArsConfig.from_mapping(
        {"stepsize": 0.02, "n_directions": 50, "n_top": 20, "perturbation": 0.03}, "V2t"
    )
    assert config.normalizes
    assert config.evaluations_per_iteration == 100


def test_normalize_input_is_identity_until_two_inputs_are_seen():
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(normalize_input(x, None), x)
    single = running_moments_from_batch(np.array([[5.0, 5.0]]))
    np.testing.assert_array_equal(normalize_input(x, single), x)


def test_normalize_input_floors_the_standard_deviation():
    moments = running_moments_from_batch(np.array([[0.0, 1.0], [2.0, 1.0]]))
    normalized = normalize_input(np.array([[2.0, 1.5]]), moments)
    np.testing.assert_allclose(normalized, [[1.0, 0.5 / 1e-8]])


def test_iteration_improves_a_quadratic_reward():
    config = ArsConfig(stepsize=0.05, n_directions=8, n_top=4, perturbation=0.05)
    target = np.array([1.0, -1.0, 0.5])
    state = ArsState(w=np.zeros(3))
    rng = RngStream(3)
    for iteration in range(100):
        state, diagnostics = ars_iteration(quadratic(target), state, config, rng.derive("iteration", iteration))
        assert diagnostics.ok
    assert state.iteration == 100
    assert np.linalg.norm(state.w - target) < 0.75


def test_iteration_is_identical_with_a_thread_pool():
    config = ArsConfig(stepsize=0.05, n_directions=16, n_top=6, perturbation=0.05)
    state = ArsState(w=np.ones(4))
    serial, _ = ars_iteration(quadratic(np.zeros(4)), state, config, RngStream(11))
    with ThreadPoolExecutor(max_workers=4) as pool:
        pooled, _ = ars_iteration(quadratic(np.zeros(4)), state, config, RngStream(11), executor=pool)
    np.testing.assert_array_equal(serial.w, pooled.w)


def test_constant_reward_is_a_degenerate_skipped_iteration():
    config = ArsConfig(stepsize=0.1, n_directions=4, n_top=2, perturbation=0.1)
    state = ArsState(w=np.ones(2))
    new_state, diagnostics = ars_iteration(
        lambda params, moments, stream: Evaluation(1.0), state, config, RngStream(0)
    )
    assert diagnostics.degenerate
    np.testing.assert_array_equal(new_state.w, state.w)
    assert new_state.iteration == 1


def test_ties_keep_the_first_directions():
    config = ArsConfig(stepsize=0.1, n_directions=5, n_top=3, perturbation=0.1)
    _, diagnostics = ars_iteration(
        lambda params, moments, stream: Evaluation(0.0), ArsState(w=np.zeros(2)), config, RngStream(0)
    )
    np.testing.assert_array_equal(diagnostics.kept, [0, 1, 2])


def test_non_finite_reward_is_reported_and_state_kept():
    config = ArsConfig(stepsize=0.1, n_directions=3, n_top=2, perturbation=0.1)
    state = ArsState(w=np.zeros(2))
    new_state, diagnostics = ars_iteration(
        lambda params, moments, stream: Evaluation(float("nan")), state, config, RngStream(0)
    )
    assert not diagnostics.ok
    assert diagnostics.error == "non-finite reward"
    assert new_state is state


def test_v2_freezes_moments_during_the_iteration_and_merges_after():
    config = ArsConfig(stepsize=0.1, n_directions=3, n_top=2, perturbation=0.1, variant="V2t")
    frozen = running_moments_from_batch(np.array([[0.0, 0.0], [2.0, 2.0]]))
    seen = []

    def evaluate(params, moments, stream):
        seen.append(moments)
        return Evaluation(float(params.sum()), running_moments_from_batch(np.ones((4, 2))))

    new_state, _ = ars_iteration(evaluate, ArsState(w=np.zeros(2), moments=frozen), config, RngStream(1))
    assert len(seen) == 6
    assert all(moments is frozen for moments in seen)
    assert new_state.moments.count == 2 + 6 * 4


def test_v1_never_passes_moments():
    config = ArsConfig(stepsize=0.1, n_directions=2, n_top=1, perturbation=0.1)
    seen = []

    def evaluate(params, moments, stream):
        seen.append(moments)
        return Evaluation(float(params.sum()), running_moments_from_batch(np.ones((1, 2))))

    state, _ = ars_iteration(evaluate, ArsState(w=np.zeros(2)), config, RngStream(1))
    assert seen == [None] * 4
    assert state.moments.count == 0
    assert isinstance(state.moments, RunningMoments)


def test_train_charges_two_n_evaluations_per_iteration():
    config = ArsConfig(stepsize=0.05, n_directions=2, n_top=2, perturbation=0.05)
    run = ars_train(QuadraticTask([1.0, 1.0]), config, budget=100, eval_every=30, rng=RngStream(0))
    assert run.samples == 100
    assert run.state.iteration == 5
    assert [samples for samples, _ in run.curve] == [0, 40, 60, 100]


def test_train_records_final_point_when_budget_is_off_grid():
    config = ArsConfig(stepsize=0.05, n_directions=2, n_top=2, perturbation=0.05)
    run = ars_train(QuadraticTask([1.0]), config, budget=70, eval_every=50, rng=RngStream(0))
    assert [samples for samples, _ in run.curve] == [0, 60]
    zero = ars_train(QuadraticTask([1.0]), config, budget=10, eval_every=50, rng=RngStream(0))
    assert zero.curve == [(0, 1.0)]


def test_train_is_reproducible():
    config = ArsConfig(stepsize=0.05, n_directions=4, n_top=2, perturbation=0.05)
    first = ars_train(QuadraticTask([1.0, -2.0]), config, 400, 40, RngStream(5))
    second = ars_train(QuadraticTask([1.0, -2.0]), config, 400, 40, RngStream(5))
    assert first.curve == second.curve


def test_train_stops_early_when_the_rule_fires():
    config = ArsConfig(stepsize=0.05, n_directions=2, n_top=2, perturbation=0.05)
    run = ars_train(
        QuadraticTask([0.0]), config, 1000, 20, RngStream(0), stop_when=lambda samples, value: value < 1.0
    )
    assert run.stopped_early
    assert run.curve == [(0, 0.0)]


def test_train_raises_on_non_finite_rewards():
    class BrokenTask(QuadraticTask):
        def evaluator(self, _rng):
            return lambda params, moments, stream: Evaluation(float("inf"))

    config = ArsConfig(stepsize=0.05, n_directions=2, n_top=1, perturbation=0.05)
    with pytest.raises(NumericalError):
        ars_train(BrokenTask([1.0]), config, 100, 10, RngStream(0))


def test_train_validates_budget_and_cadence():
    config = ArsConfig(stepsize=0.05, n_directions=2, n_top=1, perturbation=0.05)
    with pytest.raises(InvalidArgumentError):
        ars_train(QuadraticTask([1.0]), config, -1, 10, RngStream(0))
    with pytest.raises(InvalidArgumentError):
        ars_train(QuadraticTask([1.0]), config, 10, 0, RngStream(0))
