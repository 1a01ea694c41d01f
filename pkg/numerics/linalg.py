#!/usr/bin/env python3
"""
Dense linear algebra helpers

Matrices are numpy arrays in row-major (C) order. Single precision is the
working type; float64 inputs are kept as float64 so finite-difference checks
have headroom.
"""

from typing import Tuple, Union

import numpy as np

from utils.errors import ShapeError, ArgumentError

HALF_MAX = 65504.0

Number = Union[float, np.floating]


def as_matrix(data, rows: int = None, cols: int = None, dtype=None) -> np.ndarray:
    """Validate and return a finite 2-D C-ordered array"""
    matrix = np.ascontiguousarray(data, dtype=dtype)
    if matrix.dtype.kind != 'f':
        matrix = matrix.astype(np.float32)
    if matrix.ndim != 2:
        raise ShapeError(f"Matrix must be 2-D, got {matrix.ndim}-D")
    if rows is not None and matrix.shape[0] != rows:
        raise ShapeError(f"Expected {rows} rows, got {matrix.shape[0]}")
    if cols is not None and matrix.shape[1] != cols:
        raise ShapeError(f"Expected {cols} columns, got {matrix.shape[1]}")
    if not np.all(np.isfinite(matrix)):
        raise ArgumentError("Matrix contains non-finite values")
    return matrix


def identity(n: int, dtype=np.float32) -> np.ndarray:
    """n×n identity"""
    return np.eye(n, dtype=dtype)


def matmul(a: np.ndarray, b: np.ndarray, accumulate_double: bool = False) -> np.ndarray:
    """Matrix product a @ b

    With accumulate_double the product is formed in float64 and cast back to
    the promoted input type.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Inner dimensions differ: {a.shape} @ {b.shape}")

    out_dtype = np.result_type(a.dtype, b.dtype)
    if accumulate_double:
        return (a.astype(np.float64) @ b.astype(np.float64)).astype(out_dtype)
    return a @ b


def l2_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance between two vectors"""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"Vector lengths differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sum(diff * diff))


def pairwise_l2_sq(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """N×k table of squared distances, summed in the same order as l2_sq"""
    if points.shape[-1] != centroids.shape[-1]:
        raise ShapeError(f"Dimension mismatch: {points.shape} vs {centroids.shape}")
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def fp16_round_array(values) -> Tuple[np.ndarray, bool]:
    """Round single-precision values through IEEE binary16

    Returns the rounded values (same dtype as the input, float32 when the input
    is not floating) and whether any value saturated at the half range.
    """
    values = np.asarray(values)
    out_dtype = values.dtype if values.dtype.kind == 'f' else np.float32
    single = values.astype(np.float32)
    with np.errstate(over='ignore'):
        half = single.astype(np.float16)
    overflowed = np.isinf(half) & np.isfinite(single)
    if np.any(overflowed):
        half = np.where(overflowed, np.copysign(np.float16(HALF_MAX), single), half).astype(np.float16)
    return half.astype(out_dtype), bool(np.any(overflowed))


def fp16_round(x: Number, return_flag: bool = False):
    """Round a scalar through binary16 (round-to-nearest-even)"""
    rounded, overflowed = fp16_round_array(np.float32(x))
    if return_flag:
        return float(rounded), overflowed
    return float(rounded)


def is_fp16_exact(values) -> bool:
    """True when every value is a binary16 fixed point"""
    values = np.asarray(values)
    rounded, _ = fp16_round_array(values)
    return bool(np.array_equal(rounded, values))
