#!/usr/bin/env python3
"""
Model-level storage accounting

Sums the per-layer storage reports. Biases, the input/output layers and any
other floating parameters stay in the denominator exactly as serialized, so
the ratio is the effective one. `file_bytes` predicts the checkpoint length.
"""

from dataclasses import dataclass
from typing import List, Tuple

from checkpoint.checkpoint_format import header_bytes
from diffusion.denoiser import Denoiser
from quantization.storage import StorageReport, total_report

COMPONENTS = ('assignment', 'codebook', 'pool', 'projection', 'uncompressed', 'overhead')


@dataclass
class ModelSizeReport:
    layers: List[StorageReport]
    total: StorageReport
    header_bytes: int

    @property
    def file_bytes(self) -> int:
        """Predicted checkpoint length in bytes"""
        return self.header_bytes + self.total.serialized_bits // 8

    @property
    def size_ratio(self) -> float:
        return self.total.size_ratio

    @property
    def bits_per_value(self) -> float:
        return self.total.bits_per_value

    def rows(self) -> List[Tuple]:
        """CSV rows `layer,component,bits,ratio`"""
        rows = []
        named = [(str(i), report) for i, report in enumerate(self.layers)] + [('total', self.total)]
        for name, report in named:
            for component in COMPONENTS:
                rows.append((name, component, getattr(report, f'{component}_bits'), report.size_ratio))
            stored = report.serialized_bits - (report.compressed_bits - report.assignment_bits
                                               + report.overhead_bits)
            rows.append((name, 'assignment_stored', stored, report.size_ratio))
            rows.append((name, 'bits_per_value', report.bits_per_value, report.size_ratio))
            rows.append((name, 'codebook_ratio', report.codebook_ratio, report.size_ratio))
            rows.append((name, 'assignment_ratio', report.assignment_ratio, report.size_ratio))
            rows.append((name, 'serialized', report.serialized_bits, report.size_ratio))
        rows.append(('file', 'bytes', self.file_bytes, self.size_ratio))
        return rows


def size_report(model: Denoiser) -> ModelSizeReport:
    """Storage breakdown of every layer of a model"""
    layers = [layer.storage() for layer in model.layers]
    return ModelSizeReport(layers=layers, total=total_report(layers), header_bytes=header_bytes(model))
