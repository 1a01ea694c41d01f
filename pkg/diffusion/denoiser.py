#!/usr/bin/env python3
"""
Fully-connected noise predictor eps_theta(x_t, t)

Activations are laid out feature-major (n×B): a layer computes W x + b. The
network is 2 -> H -> ... -> H -> 2 with SiLU between layers and a fixed
sinusoidal time embedding added to the first hidden pre-activation. Backward
is written out by hand; it is what calibration differentiates through.
"""

import copy
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from numerics.rng import Rng
from quantization.quantized_layer import LayerTag, affine_forward, bias_bits
from quantization.storage import StorageReport, fp_storage_report
from utils.errors import ArgumentError

DATA_DIM = 2
DEFAULT_HIDDEN = 192
DEFAULT_DEPTH = 3
WIDTH_MULTIPLE = 24  # divisible by every preset sub-vector dimension 2, 3, 4, 8

LayerHook = Callable[[int, Any, np.ndarray], None]


@dataclass
class DenseLayer:
    """Floating affine layer"""
    weight_matrix: np.ndarray  # m×n
    bias: Optional[np.ndarray] = None

    @property
    def tag(self) -> LayerTag:
        return LayerTag.FP

    @property
    def shape(self):
        return self.weight_matrix.shape

    def weight(self) -> np.ndarray:
        return self.weight_matrix

    def forward(self, x: np.ndarray) -> np.ndarray:
        return affine_forward(self.weight_matrix, self.bias, x)

    def storage(self) -> StorageReport:
        """Single-precision weight and bias bits"""
        m, n = self.shape
        return fp_storage_report(m, n, extra_uncompressed_bits=bias_bits(self.bias))


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations of one forward pass"""
    inputs: List[np.ndarray]
    outputs: List[np.ndarray]
    result: np.ndarray


@dataclass
class LayerGrad:
    upstream: np.ndarray  # dL/d(layer output), m×B
    weight_grad: np.ndarray  # dL/dW', m×n
    bias_grad: np.ndarray  # m


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function, stable for large |z|"""
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def silu(z: np.ndarray) -> np.ndarray:
    """z * sigmoid(z)"""
    return z * sigmoid(z)


def silu_grad(z: np.ndarray) -> np.ndarray:
    """Derivative of silu"""
    s = sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def time_embedding(t, dim: int, dtype=np.float32) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, dim×B"""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / max(half, 1))
    args = freqs[:, None] * t[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=0)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((1, t.shape[0]))], axis=0)
    return emb.astype(dtype)


@dataclass
class Denoiser:
    """Ordered layers plus the metadata needed to sample and serialize

    Layers may be DenseLayer, QuantizedLayer or UniformLayer; a model with
    quantized layers is what the rest of the code calls a compressed model.
    """
    layers: List[Any]
    time_dim: int
    metadata: Dict[str, Any] = field(default_factory=dict)
    training_curve: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def dtype(self):
        return self.layers[0].weight().dtype

    def copy(self) -> 'Denoiser':
        """Deep copy of every layer and the metadata"""
        return copy.deepcopy(self)

    def architecture(self) -> List[Tuple[int, int]]:
        """(rows, cols) of each layer in order"""
        return [tuple(layer.shape) for layer in self.layers]

    def forward(self, x: np.ndarray, t, hook: Optional[LayerHook] = None) -> ForwardCache:
        """Run the network on x (2×B) at timesteps t (B,)

        `hook(index, layer, input)` is called before each layer runs.
        """
        t = np.broadcast_to(np.asarray(t), (x.shape[1],))
        inputs, outputs = [], []
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            if hook is not None:
                hook(i, layer, h)
            inputs.append(h)
            z = layer.forward(h)
            if i == 0:
                z = z + time_embedding(t, self.time_dim, dtype=z.dtype)
            outputs.append(z)
            h = z if i == last else silu(z)
        return ForwardCache(inputs=inputs, outputs=outputs, result=h)

    def backward(self, cache: ForwardCache, grad_out: np.ndarray) -> List[LayerGrad]:
        """Gradients of every layer given dL/d(output), 2×B"""
        grads: List[Optional[LayerGrad]] = [None] * len(self.layers)
        g = grad_out
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            if i != last:
                g = g * silu_grad(cache.outputs[i])
            grads[i] = LayerGrad(upstream=g,
                                 weight_grad=g @ cache.inputs[i].T,
                                 bias_grad=g.sum(axis=1))
            if i > 0:
                g = self.layers[i].weight().T @ g
        return grads

    def predict_noise(self, points: np.ndarray, t) -> np.ndarray:
        """eps_theta for row-major points (B×2)"""
        return self.forward(np.ascontiguousarray(points.T), t).result.T


# A model whose layers may be quantized
CompressedModel = Denoiser


def init_denoiser(rng: Rng, hidden: int = DEFAULT_HIDDEN, depth: int = DEFAULT_DEPTH,
                  time_dim: int = None, dtype=np.float32) -> Denoiser:
    """Uniform(-1/sqrt(n), 1/sqrt(n)) weights, zero biases"""
    time_dim = hidden if time_dim is None else time_dim
    if hidden % WIDTH_MULTIPLE != 0:
        raise ArgumentError(f"Hidden width {hidden} must be a multiple of {WIDTH_MULTIPLE}")
    if time_dim != hidden:
        raise ArgumentError(f"Time embedding dimension {time_dim} must equal the hidden width {hidden}")
    if depth < 1:
        raise ArgumentError(f"Depth must be at least 1, got {depth}")

    widths = [DATA_DIM] + [hidden] * depth + [DATA_DIM]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = 1.0 / math.sqrt(fan_in)
        weight = (rng.uniform((fan_out, fan_in)) * 2.0 - 1.0) * limit
        layers.append(DenseLayer(weight.astype(dtype), np.zeros(fan_out, dtype=dtype)))

    metadata = {'architecture': {'hidden': hidden, 'depth': depth, 'time_dim': time_dim}}
    return Denoiser(layers=layers, time_dim=time_dim, metadata=metadata)
