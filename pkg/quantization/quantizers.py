#!/usr/bin/env python3
"""
Uniform, vector and product quantizers for dense weight matrices

A weight matrix W (m×n) is cut into sub-vectors w_ij = W[i, j*d:(j+1)*d].
VQ fits one codebook over all m*n/d sub-vectors; PQ fits one codebook per
column group j. Assignments are 8-bit indices, so k is at most 256.
"""

from dataclasses import dataclass, field
from typing import List, Union

import numpy as np

from numerics.rng import Rng
from quantization.kmeans import kmeans, nearest_centroids
from utils.errors import ArgumentError, CapacityError, CorruptionError, ShapeError

MAX_CODEWORDS = 256
DEFAULT_K = 256
PRESET_DIMS = (2, 3, 4, 8)


@dataclass
class UniformQuant:
    """Per-row asymmetric min/max quantization"""
    bits: int
    scale: np.ndarray  # m
    zero_point: np.ndarray  # m
    codes: np.ndarray  # m×n uint8

    @property
    def shape(self):
        return self.codes.shape

    def dequantize(self) -> np.ndarray:
        """scale * code + zero_point, row by row"""
        return (self.scale[:, None] * self.codes.astype(self.scale.dtype)
                + self.zero_point[:, None])


@dataclass
class VQCodebook:
    """One codebook shared by every sub-vector"""
    d: int
    k: int
    centroids: np.ndarray  # k×d
    distortion: float = 0.0


@dataclass
class PQCodebook:
    """One codebook per column group"""
    d: int
    k: int
    centroids: np.ndarray  # N×k×d
    distortions: List[float] = field(default_factory=list)

    @property
    def subspaces(self) -> int:
        return self.centroids.shape[0]


Codebook = Union[VQCodebook, PQCodebook]


@dataclass
class AssignmentGrid:
    """m × (n/d) table of codeword indices"""
    indices: np.ndarray  # uint8

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    @property
    def subspaces(self) -> int:
        return self.indices.shape[1]

    def copy(self) -> 'AssignmentGrid':
        return AssignmentGrid(self.indices.copy())


def check_group_shape(n: int, d: int) -> int:
    """Number of column groups; d must divide n"""
    if d < 1:
        raise ArgumentError(f"Sub-vector dimension must be positive, got {d}")
    if n % d != 0:
        raise ArgumentError(f"Sub-vector dimension {d} does not divide {n} columns")
    return n // d


def check_codeword_count(k: int):
    """k must address with 8-bit indices"""
    if k < 1:
        raise ArgumentError(f"Codeword count must be positive, got {k}")
    if k > MAX_CODEWORDS:
        raise CapacityError(f"k={k} exceeds {MAX_CODEWORDS} codewords addressable by 8-bit indices")


def uniform_quantize(W: np.ndarray, bits: int) -> UniformQuant:
    """Quantize each row onto 2^bits evenly spaced levels between its min and max"""
    if not 1 <= bits <= 8:
        raise ArgumentError(f"Uniform bit-width must be in [1, 8], got {bits}")

    levels = (1 << bits) - 1
    work = W.astype(np.float64)
    row_min = work.min(axis=1)
    row_max = work.max(axis=1)
    step = (row_max - row_min) / levels

    codes = np.zeros(W.shape, dtype=np.uint8)
    ranged = step > 0
    if np.any(ranged):
        scaled = (work[ranged] - row_min[ranged, None]) / step[ranged, None]
        codes[ranged] = np.clip(np.rint(scaled), 0, levels).astype(np.uint8)

    return UniformQuant(bits=bits, scale=step.astype(W.dtype), zero_point=row_min.astype(W.dtype),
                        codes=codes)


def subvectors(W: np.ndarray, d: int) -> np.ndarray:
    """All row sub-vectors as an (m*n/d)×d array, row-major"""
    check_group_shape(W.shape[1], d)
    return np.ascontiguousarray(W).reshape(-1, d)


def vq_fit(W: np.ndarray, d: int, k: int, iters: int, rng: Rng) -> VQCodebook:
    """Fit a shared codebook with k-means over every sub-vector of W"""
    check_group_shape(W.shape[1], d)
    check_codeword_count(k)
    result = kmeans(subvectors(W, d), k, iters, rng)
    return VQCodebook(d=d, k=k, centroids=result.centroids, distortion=result.distortion)


def vq_assign(W: np.ndarray, cb: VQCodebook) -> AssignmentGrid:
    """Nearest shared codeword for every sub-vector"""
    subspaces = check_group_shape(W.shape[1], cb.d)
    labels, _ = nearest_centroids(subvectors(W, cb.d), cb.centroids)
    return AssignmentGrid(labels.reshape(W.shape[0], subspaces).astype(np.uint8))


def pq_fit(W: np.ndarray, d: int, k: int, iters: int, rng: Rng) -> PQCodebook:
    """Fit one codebook per column group

    Subspaces are fitted in order and share the rng stream, so a single group
    (d == n) reproduces vq_fit for the same seed.
    """
    subspaces = check_group_shape(W.shape[1], d)
    check_codeword_count(k)

    centroids = np.empty((subspaces, k, d), dtype=W.dtype)
    distortions = []
    for j in range(subspaces):
        result = kmeans(np.ascontiguousarray(W[:, j * d:(j + 1) * d]), k, iters, rng)
        centroids[j] = result.centroids
        distortions.append(result.distortion)
    return PQCodebook(d=d, k=k, centroids=centroids, distortions=distortions)


def pq_assign(W: np.ndarray, cb: PQCodebook) -> AssignmentGrid:
    """Nearest codeword of each sub-vector within its own subspace"""
    subspaces = check_group_shape(W.shape[1], cb.d)
    if subspaces != cb.subspaces:
        raise ShapeError(f"Codebook has {cb.subspaces} subspaces, weight needs {subspaces}")

    indices = np.empty((W.shape[0], subspaces), dtype=np.uint8)
    for j in range(subspaces):
        labels, _ = nearest_centroids(np.ascontiguousarray(W[:, j * cb.d:(j + 1) * cb.d]),
                                      cb.centroids[j])
        indices[:, j] = labels
    return AssignmentGrid(indices)


def reconstruct(cb: Codebook, a: AssignmentGrid) -> np.ndarray:
    """Rebuild W' from a codebook and its assignments"""
    if a.indices.size and int(a.indices.max()) >= cb.k:
        raise CorruptionError(f"Assignment index {int(a.indices.max())} out of range for k={cb.k}")

    if isinstance(cb, PQCodebook):
        if a.subspaces != cb.subspaces:
            raise ShapeError(f"Assignments have {a.subspaces} subspaces, codebook {cb.subspaces}")
        blocks = cb.centroids[np.arange(cb.subspaces)[None, :], a.indices]
    else:
        blocks = cb.centroids[a.indices]
    return blocks.reshape(a.m, a.subspaces * cb.d)
