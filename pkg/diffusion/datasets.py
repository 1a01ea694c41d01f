#!/usr/bin/env python3
"""
2-D toy datasets

Stand-ins for an image corpus at desk scale. Every dataset is standardized
to zero mean and unit variance per axis; mode centers and spreads are
reported in the standardized frame so samples can be scored for coverage.
"""

from dataclasses import dataclass, field

import numpy as np

from numerics.rng import Rng
from utils.errors import ArgumentError

EIGHT_GAUSSIANS_RADIUS = 2.0
EIGHT_GAUSSIANS_STD = 0.1


@dataclass
class ToyDataset:
    name: str
    points: np.ndarray  # N×2 float32, standardized
    modes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # M×2, standardized
    mode_scale: np.ndarray = field(default_factory=lambda: np.ones(2))  # per-axis std of one mode


def _eight_gaussians(n: int, rng: Rng):
    angles = np.arange(8) * (np.pi / 4.0)
    centers = EIGHT_GAUSSIANS_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    which = rng.integers(0, 8, n)
    noise = rng.normal((n, 2), dtype=np.float64) * EIGHT_GAUSSIANS_STD
    return centers[which] + noise, centers, np.full(2, EIGHT_GAUSSIANS_STD)


def _swiss_roll(n: int, rng: Rng):
    turns = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(n))
    points = np.stack([turns * np.cos(turns), turns * np.sin(turns)], axis=1)
    points += rng.normal((n, 2), dtype=np.float64) * 0.25
    return points, None, None


def _two_moons(n: int, rng: Rng):
    upper = n // 2
    theta = np.pi * rng.uniform(n)
    points = np.empty((n, 2))
    points[:upper, 0] = np.cos(theta[:upper])
    points[:upper, 1] = np.sin(theta[:upper])
    points[upper:, 0] = 1.0 - np.cos(theta[upper:])
    points[upper:, 1] = 0.5 - np.sin(theta[upper:])
    points += rng.normal((n, 2), dtype=np.float64) * 0.05
    return points, None, None


GENERATORS = {
    'eight-gaussians': _eight_gaussians,
    'swiss-roll': _swiss_roll,
    'two-moons': _two_moons,
}


def toy_dataset(name: str, n: int, rng: Rng) -> ToyDataset:
    """Draw and standardize n points of a named toy distribution"""
    if name not in GENERATORS:
        raise ArgumentError(f"Unknown dataset '{name}', expected one of {sorted(GENERATORS)}")
    if n < 2:
        raise ArgumentError(f"Dataset needs at least 2 points, got {n}")

    raw, centers, spread = GENERATORS[name](n, rng)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    points = ((raw - mean) / std).astype(np.float32)

    if centers is None:
        return ToyDataset(name=name, points=points)
    return ToyDataset(name=name, points=points, modes=(centers - mean) / std, mode_scale=spread / std)
