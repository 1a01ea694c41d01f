#!/usr/bin/env python3
"""
Codebook pool compression

A PQ codebook (N subspaces × k centroids) is replaced by a pool of at most
N' = m*n / (16*d^2) half-precision entries plus an N×k table of 16-bit
pool indices. Entries are chosen greedily by importance (how many
assignments point at a centroid); a centroid joins the first phase only when
it is at least tau away from every entry already pooled. Distances are
per-dimension RMS: ||a - b||_2 / sqrt(d).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from numerics.linalg import fp16_round_array, pairwise_l2_sq
from quantization.kmeans import CHUNK_ROWS, nearest_centroids
from quantization.quantizers import AssignmentGrid, PQCodebook, check_group_shape
from utils.errors import ArgumentError, CapacityError, CorruptionError, ShapeError

MAX_POOL = 65536
PROJECTION_RULES = ('nearest', 'importance_gap')


@dataclass
class Importance:
    """Assignment histogram per subspace"""
    counts: np.ndarray  # N×k int64


@dataclass
class CodebookPool:
    """Shared half-precision centroid pool of one layer"""
    d: int
    capacity: int
    entries: np.ndarray  # count×d, binary16 fixed points
    phase1_count: int
    entry_importance: np.ndarray  # importance of the centroid each entry came from

    @property
    def count(self) -> int:
        return self.entries.shape[0]


@dataclass
class Projection:
    """Pool index of every original centroid"""
    table: np.ndarray  # N×k uint16


def normalized_distance(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_2 / sqrt(d)"""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.sum(diff * diff) / diff.shape[-1]))


def pool_capacity(m: int, n: int, d: int) -> int:
    """floor(m*n / (16*d^2)), at least 1"""
    check_group_shape(n, d)
    capacity = max(1, (m * n) // (16 * d * d))
    if capacity > MAX_POOL:
        raise CapacityError(f"Pool capacity {capacity} exceeds the 16-bit projection limit {MAX_POOL}")
    return capacity


def compute_importance(a: AssignmentGrid, k: int) -> Importance:
    """Count how many sub-vectors are assigned to each centroid"""
    subspaces = a.subspaces
    if a.indices.size and int(a.indices.max()) >= k:
        raise CorruptionError(f"Assignment index {int(a.indices.max())} out of range for k={k}")
    flat = (np.arange(subspaces)[None, :] * k + a.indices.astype(np.int64)).ravel()
    counts = np.bincount(flat, minlength=subspaces * k)
    return Importance(counts.reshape(subspaces, k))


def _pool_table(flat_centroids: np.ndarray, entries: np.ndarray, d: int) -> np.ndarray:
    """Normalized distances from every centroid to every pool entry"""
    table = np.empty((flat_centroids.shape[0], entries.shape[0]), dtype=np.float64)
    for start in range(0, flat_centroids.shape[0], CHUNK_ROWS):
        sq = pairwise_l2_sq(flat_centroids[start:start + CHUNK_ROWS].astype(np.float64),
                            entries.astype(np.float64))
        table[start:start + CHUNK_ROWS] = np.sqrt(sq / d)
    return table


def project(centroids: np.ndarray, pool: CodebookPool, tau: float = None,
            rule: str = 'nearest') -> Projection:
    """Map each centroid (N×k×d) onto a pool entry

    'nearest' picks the closest entry. 'importance_gap' picks, among entries
    closer than tau, the one with the highest importance, and falls back to
    the closest entry when none is that close. Ties go to the lower pool index.
    """
    if rule not in PROJECTION_RULES:
        raise ArgumentError(f"Unknown projection rule '{rule}', expected one of {PROJECTION_RULES}")

    subspaces, k, d = centroids.shape
    flat = centroids.reshape(-1, d)
    nearest, _ = nearest_centroids(flat.astype(np.float64), pool.entries.astype(np.float64))

    if rule == 'importance_gap':
        if tau is None:
            raise ArgumentError("importance_gap projection needs tau")
        table = _pool_table(flat, pool.entries, d)
        within = table < tau
        ranked = np.where(within, pool.entry_importance[None, :].astype(np.float64), -1.0)
        best = np.argmax(ranked, axis=1)
        nearest = np.where(np.any(within, axis=1), best, nearest)

    return Projection(nearest.reshape(subspaces, k).astype(np.uint16))


def build_pool(cb: PQCodebook, imp: Importance, tau: float, capacity: int,
               rule: str = 'nearest') -> Tuple[CodebookPool, Projection]:
    """Greedy importance-ordered pool construction followed by projection"""
    if tau <= 0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    if capacity < 1:
        raise ArgumentError(f"Pool capacity must be positive, got {capacity}")
    if capacity > MAX_POOL:
        raise CapacityError(f"Pool capacity {capacity} exceeds {MAX_POOL}")
    if imp.counts.shape != cb.centroids.shape[:2]:
        raise ShapeError(f"Importance shape {imp.counts.shape} does not match codebook "
                         f"{cb.centroids.shape[:2]}")

    d = cb.d
    flat = cb.centroids.reshape(-1, d)
    flat_importance = imp.counts.ravel()
    # stable sort keeps (j, p) order among equal importance
    order = np.argsort(-flat_importance, kind='stable')
    rounded, _ = fp16_round_array(flat)

    entries = np.empty((min(capacity, flat.shape[0]), d), dtype=rounded.dtype)
    entry_importance = np.empty(entries.shape[0], dtype=np.int64)
    used = np.zeros(flat.shape[0], dtype=bool)
    count = 0

    for idx in order:
        if count >= entries.shape[0]:
            break
        candidate = rounded[idx]
        if count > 0:
            diff = entries[:count].astype(np.float64) - candidate.astype(np.float64)
            closest = np.sqrt(np.min(np.sum(diff * diff, axis=1)) / d)
            if closest < tau:
                continue
        entries[count] = candidate
        entry_importance[count] = flat_importance[idx]
        used[idx] = True
        count += 1
    phase1_count = count

    for idx in order:
        if count >= entries.shape[0]:
            break
        if used[idx]:
            continue
        entries[count] = rounded[idx]
        entry_importance[count] = flat_importance[idx]
        used[idx] = True
        count += 1

    pool = CodebookPool(d=d, capacity=capacity, entries=entries[:count].copy(),
                        phase1_count=phase1_count, entry_importance=entry_importance[:count].copy())
    return pool, project(cb.centroids, pool, tau=tau, rule=rule)


def pooled_reconstruct(pool: CodebookPool, proj: Projection, a: AssignmentGrid) -> np.ndarray:
    """W'[i, j*d:(j+1)*d] = pool[proj[j, a[i, j]]]"""
    subspaces, k = proj.table.shape
    if a.subspaces != subspaces:
        raise ShapeError(f"Assignments have {a.subspaces} subspaces, projection {subspaces}")
    if a.indices.size and int(a.indices.max()) >= k:
        raise CorruptionError(f"Assignment index {int(a.indices.max())} out of range for k={k}")
    if proj.table.size and int(proj.table.max()) >= pool.count:
        raise CorruptionError(f"Projection index {int(proj.table.max())} out of range for a pool of {pool.count}")

    slots = proj.table[np.arange(subspaces)[None, :], a.indices]
    return pool.entries[slots].reshape(a.m, subspaces * pool.d)
