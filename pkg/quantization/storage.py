#!/usr/bin/env python3
"""
Storage accounting for quantized layers

Accounting follows the theoretical sizes: assignments cost ceil(log2 k) bits
per sub-vector and half-precision codebooks 16 bits per value. The checkpoint
stores assignments byte-aligned; `serialized_bits` reports that figure, which
together with per-layer headers equals the checkpoint payload exactly.
"""

from dataclasses import dataclass, fields
from typing import Iterable

from quantization.codebook_pool import pool_capacity
from quantization.quantizers import check_group_shape

FLOAT_BITS = 32
HALF_BITS = 16
INDEX_BITS_STORED = 8
PROJECTION_BITS = 16
LAYER_HEADER_BITS = 13 * 8  # tag u8, m u32, n u32, d u16, k u16
BIAS_FLAG_BITS = 8
POOL_COUNT_BITS = 32


@dataclass
class StorageReport:
    """Bit counts of one layer (or a sum of layers)"""
    assignment_bits: int = 0
    codebook_bits: int = 0
    pool_bits: int = 0
    projection_bits: int = 0
    uncompressed_bits: int = 0
    overhead_bits: int = 0
    original_bits: int = 0
    serialized_bits: int = 0
    weight_count: int = 0
    quantized_count: int = 0

    @property
    def compressed_bits(self) -> int:
        """All component bits, excluding container overhead"""
        return (self.assignment_bits + self.codebook_bits + self.pool_bits
                + self.projection_bits + self.uncompressed_bits)

    @property
    def size_ratio(self) -> float:
        if self.compressed_bits == 0:
            return 1.0
        return self.original_bits / self.compressed_bits

    @property
    def bits_per_value(self) -> float:
        """Assignment payload bits per quantized weight (32 when nothing is quantized)"""
        if self.quantized_count == 0:
            return float(FLOAT_BITS)
        return self.assignment_bits / self.quantized_count

    @property
    def assignment_ratio(self) -> float:
        """FP32 weight bits over assignment bits"""
        if self.assignment_bits == 0:
            return 1.0
        return FLOAT_BITS * self.quantized_count / self.assignment_bits

    @property
    def codebook_side_bits(self) -> int:
        """Codebook, pool and projection bits together"""
        return self.codebook_bits + self.pool_bits + self.projection_bits

    @property
    def codebook_ratio(self) -> float:
        """Original bits over codebook-side bits (1.0 when there is no codebook)"""
        if self.codebook_side_bits == 0:
            return 1.0
        return self.original_bits / self.codebook_side_bits

    def __add__(self, other: 'StorageReport') -> 'StorageReport':
        return StorageReport(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                                for f in fields(self)})


def index_bits(k: int) -> int:
    """ceil(log2 k) for k >= 1"""
    return (k - 1).bit_length()


def storage_report(m: int, n: int, d: int, k: int, pooled: bool,
                   extra_uncompressed_bits: int = 0, mode: str = 'pq',
                   pool_entries: int = None) -> StorageReport:
    """Account one VQ / PQ / PQ+pool layer

    `extra_uncompressed_bits` covers parameters kept in float (the bias).
    `pool_entries` is the stored pool size; it defaults to the pool capacity.
    """
    subspaces = check_group_shape(n, d)
    report = StorageReport(
        assignment_bits=m * subspaces * index_bits(k),
        uncompressed_bits=extra_uncompressed_bits,
        overhead_bits=LAYER_HEADER_BITS + BIAS_FLAG_BITS,
        original_bits=m * n * FLOAT_BITS + extra_uncompressed_bits,
        weight_count=m * n,
        quantized_count=m * n,
    )

    if pooled:
        if pool_entries is None:
            pool_entries = pool_capacity(m, n, d)
        report.pool_bits = pool_entries * d * HALF_BITS
        report.projection_bits = subspaces * k * PROJECTION_BITS
        report.overhead_bits += POOL_COUNT_BITS
    elif mode == 'vq':
        report.codebook_bits = k * d * FLOAT_BITS
    else:
        report.codebook_bits = subspaces * k * d * HALF_BITS

    report.serialized_bits = (m * subspaces * INDEX_BITS_STORED + report.codebook_bits
                              + report.pool_bits + report.projection_bits
                              + report.uncompressed_bits + report.overhead_bits)
    return report


def uniform_storage_report(m: int, n: int, bits: int,
                           extra_uncompressed_bits: int = 0) -> StorageReport:
    """Account a uniformly quantized layer: codes plus per-row scale and zero-point"""
    report = StorageReport(
        assignment_bits=m * n * bits,
        codebook_bits=2 * m * FLOAT_BITS,
        uncompressed_bits=extra_uncompressed_bits,
        overhead_bits=LAYER_HEADER_BITS + BIAS_FLAG_BITS,
        original_bits=m * n * FLOAT_BITS + extra_uncompressed_bits,
        weight_count=m * n,
        quantized_count=m * n,
    )
    report.serialized_bits = (m * n * INDEX_BITS_STORED + report.codebook_bits
                              + report.uncompressed_bits + report.overhead_bits)
    return report


def fp_storage_report(m: int, n: int, extra_uncompressed_bits: int = 0) -> StorageReport:
    """Account a layer kept in single precision"""
    weight_bits = m * n * FLOAT_BITS
    report = StorageReport(
        uncompressed_bits=weight_bits + extra_uncompressed_bits,
        overhead_bits=LAYER_HEADER_BITS + BIAS_FLAG_BITS,
        original_bits=weight_bits + extra_uncompressed_bits,
        weight_count=m * n,
    )
    report.serialized_bits = report.uncompressed_bits + report.overhead_bits
    return report


def total_report(reports: Iterable[StorageReport]) -> StorageReport:
    """Sum of several layer reports"""
    total = StorageReport()
    for report in reports:
        total = total + report
    return total
