"""Deterministic random streams and sphere/ball samplers.

Stream derivation mixes the master seed and every label with splitmix64:

    state = splitmix64(master_seed)
    for label in labels:
        state = splitmix64(state ^ encode(label))

where ``splitmix64(z)`` is the finaliser of Steele et al. with the constants
0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB, integers encode
as themselves modulo 2**64 and strings as the little-endian 8-byte BLAKE2b
digest of their UTF-8 bytes. The derived state seeds numpy's PCG64.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from core.constants import SPHERE_NORM_FLOOR

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULTIPLIER_1 = 0xBF58476D1CE4E5B9
MIX_MULTIPLIER_2 = 0x94D049BB133111EB
RNG_ALGORITHM = "pcg64+splitmix64"

Label = str | int


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_MULTIPLIER_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULTIPLIER_2) & MASK64
    return z ^ (z >> 31)


def _encode_label(label: Label) -> int:
    if isinstance(label, bool):
        return int(label)
    if isinstance(label, (int, np.integer)):
        return int(label) & MASK64
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"Unsupported stream label: {label!r}")


def derive_seed(master_seed: int, labels: Sequence[Label]) -> int:
    """Mix a master seed and an ordered label tuple into a 64-bit seed."""
    state = splitmix64(int(master_seed) & MASK64)
    for label in labels:
        state = splitmix64(state ^ _encode_label(label))
    return state


class RngStream:
    """Owned random stream; never shared between workers.

    Draws come from numpy's PCG64 seeded by the splitmix64 derivation, so a
    seed reproduces the same stream on any worker count, but the streams are
    not bit-compatible with a xorshift generator using polar Box-Muller normals.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed:#018x})"

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def derive(self, *labels: Label) -> "RngStream":
        return rng_derive(self.seed, list(labels))

    def next_u64(self) -> int:
        return int(self._generator.bit_generator.random_raw())

    def normal(self, size=None) -> np.ndarray | float:
        return self._generator.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray | float:
        return self._generator.random(size)

    def signs(self, size=None) -> np.ndarray | float:
        draws = self._generator.integers(0, 2, size=size)
        return 2.0 * draws - 1.0

    def integers(self, low: int, high: int, size=None):
        return self._generator.integers(low, high, size=size)


def rng_derive(master_seed: int, labels: Sequence[Label]) -> RngStream:
    if not labels:
        raise ValueError("rng_derive needs at least one label")
    return RngStream(derive_seed(master_seed, labels))


def sample_unit_sphere(dim: int, rng: RngStream) -> np.ndarray:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    while True:
        v = rng.normal(dim)
        norm = float(np.linalg.norm(v))
        if norm >= SPHERE_NORM_FLOOR:
            return v / norm


def sample_unit_sphere_batch(n: int, dim: int, rng: RngStream) -> np.ndarray:
    """Rows are independent uniform points on the unit sphere."""
    if dim < 1 or n < 0:
        raise ValueError(f"invalid batch shape ({n}, {dim})")
    v = rng.normal((n, dim))
    norms = np.linalg.norm(v, axis=1)
    small = norms < SPHERE_NORM_FLOOR
    while np.any(small):
        v[small] = rng.normal((int(small.sum()), dim))
        norms[small] = np.linalg.norm(v[small], axis=1)
        small = norms < SPHERE_NORM_FLOOR
    return v / norms[:, None]


def sample_unit_ball(dim: int, rng: RngStream) -> np.ndarray:
    direction = sample_unit_sphere(dim, rng)
    radius = rng.uniform() ** (1.0 / dim)
    return direction * radius


def sample_unit_ball_batch(n: int, dim: int, rng: RngStream) -> np.ndarray:
    directions = sample_unit_sphere_batch(n, dim, rng)
    radii = rng.uniform(n) ** (1.0 / dim)
    return directions * radii[:, None]
