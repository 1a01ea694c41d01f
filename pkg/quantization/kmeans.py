#!/usr/bin/env python3
"""
Lloyd's k-means with k-means++ seeding

Used to fit every VQ and PQ codebook. Distance ties break toward the lower
centroid index; an empty cluster takes the point that is currently farthest
from its centroid, so k stays constant and the result is seed-deterministic.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from numerics.linalg import pairwise_l2_sq
from numerics.rng import Rng
from utils.errors import ArgumentError, ShapeError

CHUNK_ROWS = 4096


@dataclass
class KmeansResult:
    """Fitted centroids with the labels and distortion they induce"""
    centroids: np.ndarray  # k×d
    labels: np.ndarray  # N, int64
    distortion: float  # mean squared distance to the assigned centroid
    history: List[float] = field(default_factory=list)  # distortion after init and after each step
    iterations: int = 0


def nearest_centroids(points: np.ndarray, centroids: np.ndarray):
    """Labels and squared distances of each point's nearest centroid"""
    labels = np.empty(points.shape[0], dtype=np.int64)
    dists = np.empty(points.shape[0], dtype=np.float64)
    for start in range(0, points.shape[0], CHUNK_ROWS):
        table = pairwise_l2_sq(points[start:start + CHUNK_ROWS], centroids)
        # argmin keeps the first minimum: lower index wins ties
        chunk_labels = np.argmin(table, axis=1)
        labels[start:start + CHUNK_ROWS] = chunk_labels
        dists[start:start + CHUNK_ROWS] = table[np.arange(table.shape[0]), chunk_labels]
    return labels, dists


def kmeanspp_init(points: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    """k-means++ seeding

    Each new centroid is drawn with probability proportional to its squared
    distance from the centroids chosen so far. Once every distinct point is a
    centroid the remaining slots repeat uniformly drawn points.
    """
    if points.ndim != 2:
        raise ShapeError(f"points must be N×d, got shape {points.shape}")
    n_points = points.shape[0]
    if n_points == 0:
        raise ArgumentError("k-means needs at least one point")
    if k < 1:
        raise ArgumentError(f"k must be positive, got {k}")

    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    first = int(rng.integers(0, n_points))
    centroids[0] = points[first]
    closest = pairwise_l2_sq(points, centroids[0:1])[:, 0].astype(np.float64)

    for i in range(1, k):
        total = float(closest.sum())
        if total > 0.0:
            chosen = rng.choice(n_points, p=closest / total)
        else:
            chosen = int(rng.integers(0, n_points))
        centroids[i] = points[chosen]
        dist_new = pairwise_l2_sq(points, centroids[i:i + 1])[:, 0].astype(np.float64)
        np.minimum(closest, dist_new, out=closest)

    return centroids


def _update_centroids(points: np.ndarray, labels: np.ndarray, dists: np.ndarray,
                      centroids: np.ndarray) -> np.ndarray:
    """Cluster means, with empty clusters moved onto the farthest points"""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, points.astype(np.float64))

    updated = centroids.copy()
    filled = counts > 0
    updated[filled] = (sums[filled] / counts[filled, None]).astype(points.dtype)

    if not np.all(filled):
        remaining = dists.copy()
        for c in np.flatnonzero(~filled):
            far = int(np.argmax(remaining))
            updated[c] = points[far]
            remaining[far] = -1.0
    return updated


def lloyd(points: np.ndarray, init: np.ndarray, iters: int) -> KmeansResult:
    """Run at most `iters` Lloyd steps from `init`

    Stops early when labels no longer change. A step that would raise the
    distortion (possible only through rounding) is discarded and ends the run,
    so the recorded history is nonincreasing.
    """
    if init.ndim != 2 or init.shape[1] != points.shape[1]:
        raise ShapeError(f"init must be k×{points.shape[1]}, got {init.shape}")

    centroids = np.array(init, dtype=points.dtype, copy=True)
    labels, dists = nearest_centroids(points, centroids)
    distortion = float(dists.mean())
    history = [distortion]
    steps = 0

    for _ in range(iters):
        candidate = _update_centroids(points, labels, dists, centroids)
        new_labels, new_dists = nearest_centroids(points, candidate)
        new_distortion = float(new_dists.mean())
        if new_distortion > distortion:
            break

        steps += 1
        stable = np.array_equal(new_labels, labels) and np.array_equal(candidate, centroids)
        centroids, labels, dists, distortion = candidate, new_labels, new_dists, new_distortion
        history.append(distortion)
        if stable:
            break

    return KmeansResult(centroids=centroids, labels=labels, distortion=distortion,
                        history=history, iterations=steps)


def kmeans(points: np.ndarray, k: int, iters: int, rng: Rng) -> KmeansResult:
    """k-means++ seeding followed by Lloyd iterations"""
    return lloyd(points, kmeanspp_init(points, k, rng), iters)
