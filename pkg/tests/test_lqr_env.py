from __future__ import annotations

import numpy as np
import pytest

from core.constants import COST_CAP
from core.lqr_env import (
    GenerationError,
    LinearGaussianPolicy,
    LqrSystem,
    embed_system,
    eval_policy_cost,
    gen_lqr_system,
    init_unstable_policy,
    load_system_json,
    open_loop_cost_batch,
    policy_cost_batch,
    riccati_optimal,
    rollout_open_loop,
    rollout_policy,
    rollout_policy_batch,
    rollout_time_varying,
    save_system_json,
)
from core.numeric import InvalidArgumentError, spectral_radius
from core.rng import RngStream


def scalar_system(noise: float = 0.0) -> LqrSystem:
    return LqrSystem(
        A=np.ones((1, 1)), B=np.ones(1), Q=np.eye(1), R=1.0, noise_scale=noise, x1=np.ones(1)
    )


def test_gen_lqr_system_hits_target_spectral_radius():
    system = gen_lqr_system(6, seed=3, target_rho=0.9)
    assert spectral_radius(system.A) == pytest.approx(0.9, rel=1e-6)
    np.testing.assert_array_equal(system.Q, np.eye(6))
    again = gen_lqr_system(6, seed=3, target_rho=0.9)
    np.testing.assert_array_equal(system.A, again.A)


def test_system_rejects_inconsistent_shapes():
    with pytest.raises(InvalidArgumentError):
        LqrSystem(A=np.eye(2), B=np.ones(3), Q=np.eye(2), R=1.0, noise_scale=0.0, x1=np.ones(2))
    with pytest.raises(InvalidArgumentError):
        LqrSystem(A=np.eye(2), B=np.ones(2), Q=np.eye(2), R=0.0, noise_scale=0.0, x1=np.ones(2))


def test_scalar_riccati_gains_and_cost():
    solution = riccati_optimal(scalar_system(), 2)
    assert solution.gains[0, 0] == pytest.approx(0.5)
    assert solution.gains[1, 0] == 0.0
    assert solution.optimal_cost == pytest.approx(1.5)
    assert solution.action(1, np.ones(1)) == pytest.approx(-0.5)


def test_riccati_cost_matches_time_varying_rollout():
    system = gen_lqr_system(4, seed=1, noise_scale=0.0)
    solution = riccati_optimal(system, 12)
    trajectory = rollout_time_varying(system, solution.gains, 12)
    assert trajectory.total_cost == pytest.approx(solution.optimal_cost, rel=1e-9)


def test_no_stationary_policy_beats_the_riccati_optimum():
    rng = RngStream(2)
    system = gen_lqr_system(3, seed=9, noise_scale=0.0)
    optimum = riccati_optimal(system, 8).optimal_cost
    costs = policy_cost_batch(system, 0.5 * rng.normal((300, 3)), 8)
    assert costs.min() >= optimum * (1 - 1e-9)


def test_horizon_one_cost_is_initial_state_cost():
    system = gen_lqr_system(3, seed=4)
    solution = riccati_optimal(system, 1)
    assert solution.optimal_cost == pytest.approx(float(system.x1 @ system.x1))


def test_deterministic_rollout_cost_matches_hand_computation():
    trajectory = rollout_policy(scalar_system(), LinearGaussianPolicy(w=np.array([2.0])), 2, None, False, False)
    # x1 = 1, a1 = 2, x2 = 3, a2 = 6.
    np.testing.assert_allclose(trajectory.states, [[1.0, 3.0]])
    np.testing.assert_allclose(trajectory.actions, [2.0, 6.0])
    assert trajectory.total_cost == pytest.approx(1 + 4 + 9 + 36)
    np.testing.assert_allclose(trajectory.cost_to_go(), [50.0, 45.0])


def test_total_cost_is_recomputable_from_the_trajectory():
    system = gen_lqr_system(3, seed=0)
    trajectory = rollout_policy(system, LinearGaussianPolicy(w=np.zeros(3)), 10, RngStream(1))
    recomputed = system.step_costs(trajectory.states.T, trajectory.actions).sum()
    assert trajectory.total_cost == pytest.approx(recomputed)


def test_policy_cost_batch_matches_single_rollouts():
    system = gen_lqr_system(3, seed=5, noise_scale=0.0)
    W = RngStream(3).normal((4, 3))
    batch = policy_cost_batch(system, W, 6)
    single = [
        rollout_policy(system, LinearGaussianPolicy(w=w), 6, None, False, False).total_cost for w in W
    ]
    np.testing.assert_allclose(batch, single)


def test_open_loop_costs_match_rollouts():
    system = scalar_system()
    plan = np.array([[2.0, 6.0], [0.0, 0.0]])
    np.testing.assert_allclose(open_loop_cost_batch(system, plan), [50.0, 1.0 + 1.0])
    cost, trajectory = rollout_open_loop(system, plan[0])
    assert cost == pytest.approx(50.0)
    assert trajectory.horizon == 2


def test_divergent_rollout_is_truncated_at_the_cost_cap():
    system = scalar_system()
    trajectory = rollout_policy(system, LinearGaussianPolicy(w=np.array([1e5])), 50, None, False, False)
    assert trajectory.truncated
    assert trajectory.total_cost == COST_CAP
    assert trajectory.horizon < 50
    np.testing.assert_array_equal(trajectory.cost_to_go(), np.full(trajectory.horizon, COST_CAP))
    assert policy_cost_batch(system, np.array([[1e5]]), 50)[0] == COST_CAP


def test_noise_requires_rng():
    with pytest.raises(InvalidArgumentError):
        rollout_policy(scalar_system(0.1), LinearGaussianPolicy(w=np.zeros(1)), 3, None, False, True)


def test_noisy_batch_rollouts_are_reproducible():
    system = gen_lqr_system(2, seed=6, noise_scale=0.1)
    policy = LinearGaussianPolicy(w=np.zeros(2), logstd=-1.0)
    first = rollout_policy_batch(system, policy, 5, 3, RngStream(4))
    second = rollout_policy_batch(system, policy, 5, 3, RngStream(4))
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.actions, b.actions)


def test_init_unstable_policy_has_unstable_closed_loop():
    system = gen_lqr_system(5, seed=8)
    policy = init_unstable_policy(system, RngStream(1))
    assert spectral_radius(system.closed_loop(policy.w)) > 1.0


def test_init_unstable_policy_fails_when_control_has_no_effect():
    system = LqrSystem(
        A=0.5 * np.eye(2), B=np.zeros(2), Q=np.eye(2), R=1.0, noise_scale=0.0, x1=np.ones(2)
    )
    with pytest.raises(GenerationError):
        init_unstable_policy(system, RngStream(0), max_doublings=3)


def test_embedding_preserves_costs():
    system = gen_lqr_system(3, seed=2, noise_scale=0.0)
    bigger = embed_system(system, 7)
    w = RngStream(0).normal(3)
    padded = np.concatenate([w, RngStream(1).normal(4)])
    assert policy_cost_batch(bigger, padded[None, :], 9)[0] == pytest.approx(
        policy_cost_batch(system, w[None, :], 9)[0]
    )
    with pytest.raises(InvalidArgumentError):
        embed_system(system, 2)


def test_eval_policy_cost_deterministic_and_stochastic():
    system = scalar_system()
    mean, std = eval_policy_cost(system, LinearGaussianPolicy(w=np.array([2.0])), 2, 1, None, deterministic=True)
    assert (mean, std) == (pytest.approx(50.0), 0.0)
    mean, std = eval_policy_cost(system, LinearGaussianPolicy(w=np.zeros(1)), 2, 200, RngStream(0))
    assert std > 0.0


def test_system_json_round_trip(tmp_path):
    system = gen_lqr_system(3, seed=12)
    loaded = load_system_json(save_system_json(system, tmp_path / "system.json"))
    np.testing.assert_array_equal(loaded.A, system.A)
    np.testing.assert_array_equal(loaded.x1, system.x1)
    assert loaded.R == system.R
    assert loaded.seed == system.seed
