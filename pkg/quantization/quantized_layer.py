#!/usr/bin/env python3
"""
Layer types holding quantized weights

Every layer exposes the same small surface as the floating DenseLayer:
`tag`, `shape`, `bias`, `weight()` and `forward(x)` with x laid out n×B.
During calibration a QuantizedLayer also keeps the original floating weight
and captures the input of its last forward pass.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

import numpy as np

from numerics.linalg import fp16_round_array, matmul
from quantization.codebook_pool import CodebookPool, Projection, pooled_reconstruct
from quantization.quantizers import AssignmentGrid, PQCodebook, UniformQuant, VQCodebook, reconstruct
from quantization.storage import StorageReport, storage_report, uniform_storage_report
from utils.errors import ArgumentError, ShapeError, StateError


class LayerTag(IntEnum):
    """Checkpoint layer tags"""
    FP = 0
    VQ = 1
    PQ = 2
    PQ_POOL = 3
    UNIFORM = 4


def bias_bits(bias: Optional[np.ndarray]) -> int:
    """Single-precision bits of an optional bias"""
    return 0 if bias is None else bias.shape[0] * 32


def affine_forward(weight: np.ndarray, bias: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
    """weight @ x + bias broadcast over the batch"""
    if x.ndim != 2 or x.shape[0] != weight.shape[1]:
        raise ShapeError(f"Layer expects {weight.shape[1]}×B input, got {x.shape}")
    y = matmul(weight, x)
    if bias is not None:
        y = y + bias[:, None]
    return y


@dataclass
class QuantizedLayer:
    """VQ, PQ or PQ+pool layer"""
    mode: LayerTag
    assignments: AssignmentGrid
    bias: Optional[np.ndarray] = None
    codebook: Optional[Union[VQCodebook, PQCodebook]] = None
    pool: Optional[CodebookPool] = None
    projection: Optional[Projection] = None
    capture: Optional[np.ndarray] = None
    original_weight: Optional[np.ndarray] = None
    calibrating: bool = False

    def __post_init__(self):
        if self.mode == LayerTag.PQ_POOL:
            if self.pool is None or self.projection is None:
                raise ArgumentError("PQ+pool layer needs a pool and a projection")
        elif self.mode in (LayerTag.VQ, LayerTag.PQ):
            if self.codebook is None:
                raise ArgumentError(f"{self.mode.name} layer needs a codebook")
        else:
            raise ArgumentError(f"QuantizedLayer cannot hold mode {self.mode!r}")

    @property
    def tag(self) -> LayerTag:
        """Checkpoint tag matching the layer mode"""
        return self.mode

    @property
    def d(self) -> int:
        """Sub-vector dimension"""
        return self.pool.d if self.mode == LayerTag.PQ_POOL else self.codebook.d

    @property
    def k(self) -> int:
        """Codewords per codebook"""
        return self.projection.table.shape[1] if self.mode == LayerTag.PQ_POOL else self.codebook.k

    @property
    def shape(self):
        """(m, n) of the reconstructed weight"""
        return self.assignments.m, self.assignments.subspaces * self.d

    def weight(self) -> np.ndarray:
        """Current reconstruction W'"""
        if self.mode == LayerTag.PQ_POOL:
            return pooled_reconstruct(self.pool, self.projection, self.assignments)
        return reconstruct(self.codebook, self.assignments)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """W'x + b; captures x while calibrating"""
        return quantized_forward(self, x)

    def candidates(self, j: int) -> np.ndarray:
        """The k codewords selectable for column group j"""
        if self.mode == LayerTag.PQ_POOL:
            return self.pool.entries[self.projection.table[j]]
        if self.mode == LayerTag.PQ:
            return self.codebook.centroids[j]
        return self.codebook.centroids

    def parameters(self) -> np.ndarray:
        """The trainable tensor: pool entries or codebook centroids"""
        if self.mode == LayerTag.PQ_POOL:
            return self.pool.entries
        return self.codebook.centroids

    def set_parameters(self, values: np.ndarray, round_fp16: bool = False):
        """Replace the trainable tensor, optionally rounding through binary16"""
        if values.shape != self.parameters().shape:
            raise ShapeError(f"Parameter shape {values.shape} differs from {self.parameters().shape}")
        if round_fp16:
            values, _ = fp16_round_array(values)
        if self.mode == LayerTag.PQ_POOL:
            self.pool.entries = values
        else:
            self.codebook.centroids = values

    def begin_calibration(self, original_weight: np.ndarray):
        """Retain the floating weight and start capturing inputs"""
        if original_weight.shape != self.shape:
            raise ShapeError(f"Original weight {original_weight.shape} does not match layer {self.shape}")
        self.original_weight = original_weight
        self.calibrating = True

    def end_calibration(self):
        """Drop the captured input and the original weight"""
        self.original_weight = None
        self.capture = None
        self.calibrating = False

    def storage(self) -> StorageReport:
        """Bit accounting of this layer, bias included"""
        m, n = self.shape
        if self.mode == LayerTag.PQ_POOL:
            return storage_report(m, n, self.d, self.k, pooled=True,
                                  extra_uncompressed_bits=bias_bits(self.bias),
                                  pool_entries=self.pool.count)
        mode = 'vq' if self.mode == LayerTag.VQ else 'pq'
        return storage_report(m, n, self.d, self.k, pooled=False,
                              extra_uncompressed_bits=bias_bits(self.bias), mode=mode)


@dataclass
class UniformLayer:
    """Uniform scalar baseline layer"""
    quant: UniformQuant
    bias: Optional[np.ndarray] = None

    @property
    def tag(self) -> LayerTag:
        """Always LayerTag.UNIFORM"""
        return LayerTag.UNIFORM

    @property
    def shape(self):
        return self.quant.shape

    def weight(self) -> np.ndarray:
        """Dequantized m×n weight"""
        return self.quant.dequantize()

    def forward(self, x: np.ndarray) -> np.ndarray:
        return affine_forward(self.weight(), self.bias, x)

    def storage(self) -> StorageReport:
        """Codes, per-row scale and zero-point, and the bias"""
        m, n = self.shape
        return uniform_storage_report(m, n, self.quant.bits, extra_uncompressed_bits=bias_bits(self.bias))


def quantized_forward(layer: QuantizedLayer, x: np.ndarray) -> np.ndarray:
    """y = W'x + bias; the input is captured while calibrating"""
    y = affine_forward(layer.weight(), layer.bias, x)
    if layer.calibrating:
        layer.capture = x
    return y


def require_capture(layer: QuantizedLayer) -> np.ndarray:
    """The input captured by the last forward, or StateError"""
    if layer.capture is None:
        raise StateError("Layer has no captured activations; run a calibrating forward pass first")
    return layer.capture
