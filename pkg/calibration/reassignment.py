#!/usr/bin/env python3
"""
Forward-pass codeword reassignment and the codebook gradient

Reassignment picks, for each sub-vector, the candidate codeword minimizing
the activation-space error ||(w_ij - c) x_j||^2, where x_j holds the input
rows of column group j. The per-term loss is evaluated through the d×d Gram
matrix x_j x_j^T. Groups whose activations are all zero keep their index.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from quantization.quantized_layer import LayerTag, QuantizedLayer, require_capture
from quantization.quantizers import AssignmentGrid
from utils.errors import ShapeError, StateError


@dataclass
class ReassignResult:
    grid: AssignmentGrid
    changed_fraction: float
    loss_before: float  # ||Wx - W'x||^2 with the previous assignments
    loss_after: float


def _group_losses(w_block: np.ndarray, candidates: np.ndarray, x_block: np.ndarray) -> np.ndarray:
    """m×k table of ||(w_i - c_p) x||^2"""
    gram = x_block.astype(np.float64) @ x_block.astype(np.float64).T
    diff = w_block.astype(np.float64)[:, None, :] - candidates.astype(np.float64)[None, :, :]
    return np.sum((diff @ gram) * diff, axis=2)


def _resolve_inputs(layer: QuantizedLayer, W_original: Optional[np.ndarray],
                    x: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    if x is None:
        x = require_capture(layer)
    if W_original is None:
        W_original = layer.original_weight
    if W_original is None:
        raise StateError("Reassignment needs the original floating weight")
    m, n = layer.shape
    if W_original.shape != (m, n):
        raise ShapeError(f"Original weight {W_original.shape} does not match layer {(m, n)}")
    if x.ndim != 2 or x.shape[0] != n:
        raise ShapeError(f"Activations must be {n}×B, got {x.shape}")
    return W_original, x


def reassign(layer: QuantizedLayer, W_original: np.ndarray = None, x: np.ndarray = None) -> AssignmentGrid:
    """Activation-aware assignments; x defaults to the captured input"""
    W_original, x = _resolve_inputs(layer, W_original, x)
    d = layer.d
    indices = layer.assignments.indices.copy()
    for j in range(layer.assignments.subspaces):
        x_block = x[j * d:(j + 1) * d]
        if not np.any(x_block):
            continue
        losses = _group_losses(W_original[:, j * d:(j + 1) * d], layer.candidates(j), x_block)
        indices[:, j] = np.argmin(losses, axis=1)
    return AssignmentGrid(indices)


def reconstruction_loss(W: np.ndarray, W_prime: np.ndarray, x: np.ndarray) -> float:
    """||W x - W' x||^2"""
    diff = (W.astype(np.float64) - W_prime.astype(np.float64)) @ x.astype(np.float64)
    return float(np.sum(diff * diff))


def reassign_layer(layer: QuantizedLayer, x: np.ndarray = None) -> ReassignResult:
    """Reassign in place and report the change and the coupled loss before/after"""
    W_original, x = _resolve_inputs(layer, None, x)
    before = reconstruction_loss(W_original, layer.weight(), x)
    grid = reassign(layer, W_original, x)
    changed = float(np.mean(grid.indices != layer.assignments.indices)) if grid.indices.size else 0.0
    layer.assignments = grid
    after = reconstruction_loss(W_original, layer.weight(), x)
    return ReassignResult(grid=grid, changed_fraction=changed, loss_before=before, loss_after=after)


def pool_search_gap(layer: QuantizedLayer, W_original: np.ndarray = None,
                    x: np.ndarray = None) -> Tuple[float, float]:
    """Mean best per-term loss searching the whole pool vs the k projected entries"""
    if layer.mode != LayerTag.PQ_POOL:
        raise StateError("pool_search_gap applies to PQ+pool layers only")
    W_original, x = _resolve_inputs(layer, W_original, x)
    d = layer.d
    whole, projected = [], []
    for j in range(layer.assignments.subspaces):
        w_block = W_original[:, j * d:(j + 1) * d]
        x_block = x[j * d:(j + 1) * d]
        whole.append(_group_losses(w_block, layer.pool.entries, x_block).min(axis=1))
        projected.append(_group_losses(w_block, layer.candidates(j), x_block).min(axis=1))
    return float(np.mean(whole)), float(np.mean(projected))


def codebook_grad(layer: QuantizedLayer, upstream: np.ndarray, x: np.ndarray = None) -> np.ndarray:
    """dL/d(codebook or pool) from dL/d(layer output)

    grad(W') = upstream @ x^T; each codeword collects the gradient blocks of
    the sub-vectors assigned to it (through the projection for pooled layers).
    """
    if x is None:
        x = require_capture(layer)
    m, n = layer.shape
    if upstream.shape[0] != m or x.shape[0] != n or upstream.shape[1] != x.shape[1]:
        raise ShapeError(f"Upstream {upstream.shape} and input {x.shape} do not fit layer {(m, n)}")

    d = layer.d
    subspaces = layer.assignments.subspaces
    blocks = (upstream @ x.T).reshape(m * subspaces, d)
    indices = layer.assignments.indices.astype(np.int64)
    params = layer.parameters()

    if layer.mode == LayerTag.PQ_POOL:
        slots = layer.projection.table[np.arange(subspaces)[None, :], indices].astype(np.int64)
        target = slots.ravel()
        grad = np.zeros((params.shape[0], d), dtype=blocks.dtype)
    elif layer.mode == LayerTag.PQ:
        target = (np.arange(subspaces)[None, :] * layer.k + indices).ravel()
        grad = np.zeros((subspaces * layer.k, d), dtype=blocks.dtype)
    else:
        target = indices.ravel()
        grad = np.zeros((layer.k, d), dtype=blocks.dtype)

    np.add.at(grad, target, blocks)
    return grad.reshape(params.shape).astype(params.dtype)
