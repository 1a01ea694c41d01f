#!/usr/bin/env python3
"""
Whole-model quantization

Layers strictly between the input and output layers are replaced by
quantized layers; the first and last layers (and every bias) stay in single
precision. Methods:

    uniform - per-row min/max scalar quantization at `bits` bits
    vq      - one shared k-means codebook (stored in single precision)
    pq      - one codebook per column group, stored in half precision
    dpq     - pq followed by codebook-pool compression
"""

from typing import Any, Dict

from diffusion.denoiser import DenseLayer, Denoiser
from numerics.linalg import fp16_round_array
from numerics.rng import Rng
from quantization.codebook_pool import build_pool, compute_importance, pool_capacity
from quantization.quantized_layer import LayerTag, QuantizedLayer, UniformLayer
from quantization.quantizers import (DEFAULT_K, PQCodebook, check_codeword_count, check_group_shape,
                                     pq_assign, pq_fit, uniform_quantize, vq_assign, vq_fit)
from utils.errors import ArgumentError

METHODS = ('uniform', 'vq', 'pq', 'dpq')
DEFAULT_D = 4
DEFAULT_TAU = 0.05
DEFAULT_KMEANS_ITERS = 20
DEFAULT_VQ_ITERS = 1000
BITS_TO_D = {1: 8, 2: 4, 3: 3, 4: 2}


def quantizable_indices(model: Denoiser):
    """Indices of the hidden-to-hidden layers"""
    return list(range(1, len(model.layers) - 1))


def _half_precision_codebook(cb: PQCodebook) -> PQCodebook:
    """Copy of a PQ codebook with centroids rounded to binary16"""
    rounded, _ = fp16_round_array(cb.centroids)
    return PQCodebook(d=cb.d, k=cb.k, centroids=rounded, distortions=cb.distortions)


def quantize_layer(layer: DenseLayer, method: str, d: int, k: int, tau: float, rng: Rng,
                   kmeans_iters: int = DEFAULT_KMEANS_ITERS, vq_iters: int = DEFAULT_VQ_ITERS,
                   capacity: int = None, projection: str = 'nearest', bits: int = 2):
    W = layer.weight_matrix
    bias = None if layer.bias is None else layer.bias.copy()

    if method == 'uniform':
        return UniformLayer(uniform_quantize(W, bits), bias)
    if method == 'vq':
        cb = vq_fit(W, d, k, vq_iters, rng)
        return QuantizedLayer(LayerTag.VQ, vq_assign(W, cb), bias, codebook=cb)

    cb = _half_precision_codebook(pq_fit(W, d, k, kmeans_iters, rng))
    assignments = pq_assign(W, cb)
    if method == 'pq':
        return QuantizedLayer(LayerTag.PQ, assignments, bias, codebook=cb)

    m, n = W.shape
    capacity = pool_capacity(m, n, d) if capacity is None else capacity
    pool, proj = build_pool(cb, compute_importance(assignments, k), tau, capacity, rule=projection)
    return QuantizedLayer(LayerTag.PQ_POOL, assignments, bias, pool=pool, projection=proj)


def quantize_model(model: Denoiser, method: str, d: int = DEFAULT_D, k: int = DEFAULT_K,
                   tau: float = DEFAULT_TAU, rng: Rng = None,
                   kmeans_iters: int = DEFAULT_KMEANS_ITERS, vq_iters: int = DEFAULT_VQ_ITERS,
                   capacity: int = None, projection: str = 'nearest', bits: int = 2,
                   verbose: bool = False) -> Denoiser:
    """Quantize a floating model; the input model is left untouched

    Every quantized layer fits its codebooks on its own child stream
    rng.spawn(layer_index).
    """
    if method not in METHODS:
        raise ArgumentError(f"Unknown quantization method '{method}', expected one of {METHODS}")
    if method != 'uniform':
        check_codeword_count(k)
    rng = Rng(0) if rng is None else rng

    out = model.copy()
    capacities = []
    for i in quantizable_indices(out):
        layer = out.layers[i]
        if not isinstance(layer, DenseLayer):
            raise ArgumentError(f"Layer {i} is already quantized ({layer.tag.name})")
        if method != 'uniform':
            check_group_shape(layer.shape[1], d)
        quantized = quantize_layer(layer, method, d, k, tau, rng.spawn(i), kmeans_iters, vq_iters,
                                   capacity, projection, bits)
        out.layers[i] = quantized
        if method == 'dpq':
            capacities.append(quantized.pool.capacity)
        if verbose:
            print(f"layer {i}: {method} {layer.shape[0]}x{layer.shape[1]} "
                  f"-> {quantized.storage().size_ratio:.2f}x")

    config: Dict[str, Any] = {'method': method}
    if method == 'uniform':
        config['bits'] = bits
    else:
        config.update({'d': d, 'k': k})
    if method == 'dpq':
        config.update({'tau': tau, 'pool_capacity': capacities, 'projection': projection})
    out.metadata['quantization'] = config
    return out
