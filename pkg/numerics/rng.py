#!/usr/bin/env python3
"""
Seeded random number generation

Rng wraps numpy's PCG64 bit generator. PCG64 output for a given seed is
specified by numpy and identical on every platform, so seeded runs reproduce
bit for bit. An Rng has a single owner; workers get children from spawn().
"""

import numpy as np

from utils.errors import ArgumentError

SEED_MASK = (1 << 64) - 1


class Rng:
    """Deterministic random stream"""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & SEED_MASK
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, key: int) -> 'Rng':
        """Derive an independent child stream from (seed, key)"""
        state = np.random.SeedSequence([self.seed, int(key) & SEED_MASK]).generate_state(2, np.uint32)
        return Rng((int(state[0]) << 32) | int(state[1]))

    def normal(self, shape, dtype=np.float32) -> np.ndarray:
        """Standard normal draws of the given shape"""
        return self._generator.standard_normal(shape).astype(dtype)

    def uniform(self, shape=None) -> np.ndarray:
        """Uniform draws in [0, 1)"""
        return self._generator.random(shape)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Integers in [low, high)"""
        return self._generator.integers(low, high, size=size)

    def choice(self, n: int, p: np.ndarray) -> int:
        """One index in [0, n) drawn with probabilities p"""
        return int(self._generator.choice(n, p=p))

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n)"""
        return self._generator.permutation(n)


def gaussian(rng: Rng, n: int, dtype=np.float32) -> np.ndarray:
    """n i.i.d. standard normal values"""
    if n < 0:
        raise ArgumentError(f"Sample count must be non-negative, got {n}")
    return rng.normal(n, dtype=dtype)
