from __future__ import annotations

import numpy as np
import pytest

from core.rng import (
    RNG_ALGORITHM,
    RngStream,
    derive_seed,
    rng_derive,
    sample_unit_ball,
    sample_unit_ball_batch,
    sample_unit_sphere,
    sample_unit_sphere_batch,
    splitmix64,
)


def test_splitmix64_matches_reference_first_output():
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_rng_derive_is_deterministic_per_label_path():
    first = rng_derive(7, ["linreg", "sgd", 3]).normal(5)
    second = rng_derive(7, ["linreg", "sgd", 3]).normal(5)
    np.testing.assert_array_equal(first, second)


def test_rng_derive_depends_on_label_order_and_master_seed():
    base = derive_seed(7, ["a", "b"])
    assert derive_seed(7, ["b", "a"]) != base
    assert derive_seed(8, ["a", "b"]) != base
    assert derive_seed(7, ["a", "b", 0]) != base


def test_string_and_integer_labels_do_not_collide_for_digits():
    assert derive_seed(0, ["1"]) != derive_seed(0, [1])


def test_rng_derive_requires_labels():
    with pytest.raises(ValueError):
        rng_derive(0, [])


def test_unsupported_label_type_is_rejected():
    with pytest.raises(TypeError):
        derive_seed(0, [1.5])


def test_stream_derive_matches_rng_derive_from_its_seed():
    parent = rng_derive(3, ["parent"])
    np.testing.assert_array_equal(
        parent.derive("child", 2).uniform(4),
        rng_derive(parent.seed, ["child", 2]).uniform(4),
    )


def test_signs_are_plus_or_minus_one():
    draws = RngStream(11).signs(1000)
    assert set(np.unique(draws)) == {-1.0, 1.0}


def test_algorithm_id_is_recorded():
    assert RngStream.algorithm == RNG_ALGORITHM == "pcg64+splitmix64"


def test_sphere_samples_have_unit_norm():
    rng = RngStream(5)
    for dim in (1, 2, 17):
        assert np.linalg.norm(sample_unit_sphere(dim, rng)) == pytest.approx(1.0)
    batch = sample_unit_sphere_batch(200, 6, rng)
    np.testing.assert_allclose(np.linalg.norm(batch, axis=1), 1.0)


def test_sphere_in_one_dimension_is_a_random_sign():
    rng = RngStream(9)
    values = {float(sample_unit_sphere(1, rng)[0]) for _ in range(50)}
    assert values == {-1.0, 1.0}


def test_ball_samples_stay_inside_the_ball():
    rng = RngStream(13)
    assert np.linalg.norm(sample_unit_ball(4, rng)) <= 1.0
    norms = np.linalg.norm(sample_unit_ball_batch(500, 4, rng), axis=1)
    assert norms.max() <= 1.0
    # E||v|| = d / (d + 1) for the uniform ball.
    assert norms.mean() == pytest.approx(0.8, abs=0.03)


def test_sphere_sampler_rejects_bad_dimension():
    with pytest.raises(ValueError):
        sample_unit_sphere(0, RngStream(1))
    with pytest.raises(ValueError):
        sample_unit_sphere_batch(3, 0, RngStream(1))
