#!/usr/bin/env python3
"""
Distributional sample quality

The headline number is a sliced 2-Wasserstein distance (SWD) between a
sample cloud and a reference cloud. It is a desk-scale stand-in and is
labeled `swd` everywhere; it is not comparable to FID.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from numerics.rng import Rng
from utils.errors import ArgumentError, ShapeError

DEFAULT_PROJECTIONS = 128
MODE_RADIUS = 3.0  # in units of the per-mode spread
MIN_MODE_SHARE = 0.25  # of the uniform share 1/M


@dataclass
class QualityReport:
    swd: float
    n: int
    seed: int
    projections: int
    in_mode_fraction: Optional[float] = None
    modes_covered: Optional[int] = None
    mode_count: int = 0

    def rows(self) -> List[Tuple]:
        """CSV rows `metric,value,n,seed`"""
        rows = [('swd', self.swd, self.n, self.seed)]
        if self.in_mode_fraction is not None:
            rows.append(('in_mode_fraction', self.in_mode_fraction, self.n, self.seed))
            rows.append(('modes_covered', self.modes_covered, self.n, self.seed))
        return rows


def _check_cloud(points: np.ndarray, name: str) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0:
        raise ArgumentError(f"Point set {name} must be a nonempty N×D array, got shape {points.shape}")
    return points


def wasserstein_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Exact W2 between two empirical 1-D distributions

    The quantile functions are piecewise constant; integrating their squared
    difference over the union of breakpoints gives the optimal transport cost
    for any pair of sizes.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.shape[0], b.shape[0]
    if na == nb:
        return float(np.sqrt(np.mean((a - b) ** 2)))

    levels = np.union1d(np.arange(1, na + 1) / na, np.arange(1, nb + 1) / nb)
    widths = np.diff(np.concatenate([[0.0], levels]))
    mids = levels - 0.5 * widths
    qa = a[np.minimum((mids * na).astype(np.int64), na - 1)]
    qb = b[np.minimum((mids * nb).astype(np.int64), nb - 1)]
    return float(np.sqrt(np.sum(widths * (qa - qb) ** 2)))


def random_directions(dim: int, n_proj: int, rng: Rng) -> np.ndarray:
    """n_proj unit vectors, uniform on the sphere"""
    if n_proj < 1:
        raise ArgumentError(f"Need at least one projection, got {n_proj}")
    directions = rng.normal((n_proj, dim), dtype=np.float64)
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return directions / norms


def directional_terms(A: np.ndarray, B: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """1-D W2 along every direction"""
    pa = A @ directions.T
    pb = B @ directions.T
    return np.array([wasserstein_1d(pa[:, i], pb[:, i]) for i in range(directions.shape[0])])


def sliced_wasserstein(A: np.ndarray, B: np.ndarray, n_proj: int = DEFAULT_PROJECTIONS,
                       rng: Rng = None) -> float:
    """Mean over random unit directions of the projected 1-D W2 distance"""
    A = _check_cloud(A, 'A')
    B = _check_cloud(B, 'B')
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"Point sets differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    rng = Rng(0) if rng is None else rng
    directions = random_directions(A.shape[1], n_proj, rng)
    return float(np.mean(directional_terms(A, B, directions)))


def mode_coverage(points: np.ndarray, modes: np.ndarray, mode_scale: np.ndarray,
                  radius: float = MODE_RADIUS, min_share: float = MIN_MODE_SHARE) -> Tuple[float, int]:
    """Fraction of samples near some mode, and how many modes get a fair share

    A sample is in-mode when its spread-normalized distance to the nearest
    mode is at most `radius`. A mode is covered when it holds at least
    `min_share / M` of all samples.
    """
    points = _check_cloud(points, 'points')
    modes = np.asarray(modes, dtype=np.float64)
    if modes.shape[0] == 0:
        raise ArgumentError("Mode coverage needs at least one mode")
    scaled = (points[:, None, :] - modes[None, :, :]) / np.asarray(mode_scale, dtype=np.float64)
    dists = np.sqrt(np.sum(scaled * scaled, axis=2))
    nearest = np.argmin(dists, axis=1)
    inside = dists[np.arange(points.shape[0]), nearest] <= radius

    counts = np.bincount(nearest[inside], minlength=modes.shape[0])
    threshold = min_share * points.shape[0] / modes.shape[0]
    return float(np.mean(inside)), int(np.sum(counts >= threshold))


def sample_quality(samples: np.ndarray, reference: np.ndarray, n_proj: int = DEFAULT_PROJECTIONS,
                   seed: int = 0, modes: np.ndarray = None,
                   mode_scale: np.ndarray = None) -> QualityReport:
    """SWD against the reference, plus mode statistics when modes are known"""
    swd = sliced_wasserstein(samples, reference, n_proj, Rng(seed))
    report = QualityReport(swd=swd, n=int(np.asarray(samples).shape[0]), seed=seed, projections=n_proj)
    if modes is not None and len(modes):
        report.in_mode_fraction, report.modes_covered = mode_coverage(samples, modes, mode_scale)
        report.mode_count = int(len(modes))
    return report
