#!/usr/bin/env python3
"""
DPQ1 checkpoint codec

Little-endian, unpadded. A file is the header (magic, version, layer count,
metadata block) followed by one record per layer; docs/DPQ1_FORMAT.md
gives the byte layout. Encoding is deterministic, so save -> load -> save
reproduces the same bytes.
"""

import json
import struct
from typing import Any, Dict, List, Tuple

import numpy as np

from diffusion.denoiser import DenseLayer, Denoiser
from quantization.codebook_pool import CodebookPool, Projection
from quantization.quantized_layer import LayerTag, QuantizedLayer, UniformLayer
from quantization.quantizers import AssignmentGrid, PQCodebook, UniformQuant, VQCodebook
from utils.errors import CorruptionError, FormatError

MAGIC = b'DPQ1'
VERSION = 1
FILE_HEADER = struct.Struct('<4sHI')
LAYER_HEADER = struct.Struct('<BIIHH')  # tag, m, n, d, k
U8 = struct.Struct('<B')
U32 = struct.Struct('<I')


def _metadata_block(model: Denoiser) -> bytes:
    """Sorted compact JSON of the metadata, time_dim included"""
    metadata = dict(model.metadata)
    architecture = dict(metadata.get('architecture', {}))
    architecture['time_dim'] = model.time_dim
    metadata['architecture'] = architecture
    text = json.dumps(metadata, sort_keys=True, separators=(',', ':'))
    return text.encode('utf-8')


def header_bytes(model: Denoiser) -> int:
    """Length of the file header including the metadata block"""
    return FILE_HEADER.size + U32.size + len(_metadata_block(model))


def _f32(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype='<f4').tobytes()


def _f16(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype='<f2').tobytes()


def _u8(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype=np.uint8).tobytes()


def _encode_layer(layer) -> bytes:
    """Layer header, bias flag and payload of one layer"""
    m, n = layer.shape
    tag = layer.tag
    parts: List[bytes] = []

    if tag == LayerTag.FP:
        parts.append(LAYER_HEADER.pack(tag, m, n, 0, 0))
        parts.append(_f32(layer.weight_matrix))
    elif tag == LayerTag.UNIFORM:
        quant = layer.quant
        parts.append(LAYER_HEADER.pack(tag, m, n, 1, 1 << quant.bits))
        parts.append(_f32(quant.scale))
        parts.append(_f32(quant.zero_point))
        parts.append(_u8(quant.codes))
    else:
        parts.append(LAYER_HEADER.pack(tag, m, n, layer.d, layer.k))
        if tag == LayerTag.VQ:
            parts.append(_f32(layer.codebook.centroids))
        elif tag == LayerTag.PQ:
            parts.append(_f16(layer.codebook.centroids))
        else:
            parts.append(U32.pack(layer.pool.count))
            parts.append(_f16(layer.pool.entries))
            parts.append(np.ascontiguousarray(layer.projection.table, dtype='<u2').tobytes())
        parts.append(_u8(layer.assignments.indices))

    if layer.bias is None:
        parts.append(U8.pack(0))
    else:
        parts.append(U8.pack(1))
        parts.append(_f32(layer.bias))
    return b''.join(parts)


def encode(model: Denoiser) -> bytes:
    """Serialize a model to DPQ1 bytes"""
    metadata = _metadata_block(model)
    parts = [FILE_HEADER.pack(MAGIC, VERSION, len(model.layers)), U32.pack(len(metadata)), metadata]
    parts.extend(_encode_layer(layer) for layer in model.layers)
    return b''.join(parts)


def save(model: Denoiser, path: str) -> int:
    """Write a checkpoint and return its byte count"""
    data = encode(model)
    with open(path, 'wb') as f:
        f.write(data)
    return len(data)


class _Reader:
    """Bounds-checked cursor over checkpoint bytes"""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int) -> bytes:
        """Next count bytes; CorruptionError when the buffer runs short"""
        end = self.offset + count
        if end > len(self.data):
            raise CorruptionError(f"Checkpoint truncated: need {count} bytes at offset {self.offset}, "
                                  f"{len(self.data) - self.offset} left")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct) -> Tuple:
        return fmt.unpack(self.take(fmt.size))

    def array(self, dtype: str, count: int, shape) -> np.ndarray:
        """Little-endian array of count values reshaped to shape"""
        dtype = np.dtype(dtype)
        raw = self.take(dtype.itemsize * count)
        return np.frombuffer(raw, dtype=dtype).reshape(shape)


def _check_codebook_header(tag: LayerTag, m: int, n: int, d: int, k: int):
    """Validate the header fields of a VQ/PQ/pool layer"""
    if d < 1 or n % d != 0:
        raise CorruptionError(f"{tag.name} layer: sub-vector dimension {d} does not divide n={n}")
    if not 1 <= k <= 256:
        raise CorruptionError(f"{tag.name} layer: codeword count {k} outside [1, 256]")


def _read_assignments(reader: _Reader, m: int, subspaces: int, k: int) -> AssignmentGrid:
    """m×subspaces u8 grid, every index below k"""
    indices = reader.array('u1', m * subspaces, (m, subspaces)).copy()
    if indices.size and int(indices.max()) >= k:
        raise CorruptionError(f"Assignment index {int(indices.max())} out of range for k={k}")
    return AssignmentGrid(indices)


def _decode_layer(reader: _Reader):
    """Inverse of _encode_layer"""
    raw_tag, m, n, d, k = reader.unpack(LAYER_HEADER)
    try:
        tag = LayerTag(raw_tag)
    except ValueError:
        raise FormatError(f"Unknown layer tag {raw_tag}")

    if tag == LayerTag.FP:
        weight = reader.array('<f4', m * n, (m, n)).astype(np.float32)
        layer = DenseLayer(weight)
    elif tag == LayerTag.UNIFORM:
        bits = k.bit_length() - 1
        if d != 1 or k != 1 << bits or not 1 <= bits <= 8:
            raise CorruptionError(f"Uniform layer header d={d}, k={k} is not d=1, k=2^bits")
        scale = reader.array('<f4', m, (m,)).astype(np.float32)
        zero_point = reader.array('<f4', m, (m,)).astype(np.float32)
        codes = reader.array('u1', m * n, (m, n)).copy()
        if codes.size and int(codes.max()) >= k:
            raise CorruptionError(f"Uniform code {int(codes.max())} out of range for {bits} bits")
        layer = UniformLayer(UniformQuant(bits=bits, scale=scale, zero_point=zero_point, codes=codes))
    else:
        _check_codebook_header(tag, m, n, d, k)
        subspaces = n // d
        if tag == LayerTag.VQ:
            centroids = reader.array('<f4', k * d, (k, d)).astype(np.float32)
            assignments = _read_assignments(reader, m, subspaces, k)
            layer = QuantizedLayer(tag, assignments, codebook=VQCodebook(d=d, k=k, centroids=centroids))
        elif tag == LayerTag.PQ:
            centroids = reader.array('<f2', subspaces * k * d, (subspaces, k, d)).astype(np.float32)
            assignments = _read_assignments(reader, m, subspaces, k)
            layer = QuantizedLayer(tag, assignments, codebook=PQCodebook(d=d, k=k, centroids=centroids))
        else:
            (count,) = reader.unpack(U32)
            if count < 1:
                raise CorruptionError("Pool layer stores an empty pool")
            entries = reader.array('<f2', count * d, (count, d)).astype(np.float32)
            table = reader.array('<u2', subspaces * k, (subspaces, k)).astype(np.uint16)
            if int(table.max()) >= count:
                raise CorruptionError(f"Projection index {int(table.max())} out of range for a pool of {count}")
            assignments = _read_assignments(reader, m, subspaces, k)
            pool = CodebookPool(d=d, capacity=count, entries=entries, phase1_count=count,
                                entry_importance=np.zeros(count, dtype=np.int64))
            layer = QuantizedLayer(tag, assignments, pool=pool, projection=Projection(table))

    (flag,) = reader.unpack(U8)
    if flag not in (0, 1):
        raise CorruptionError(f"Bias flag must be 0 or 1, got {flag}")
    if flag:
        layer.bias = reader.array('<f4', m, (m,)).astype(np.float32)
    return layer


def decode(data: bytes) -> Denoiser:
    """Parse DPQ1 bytes; raises FormatError or CorruptionError on bad input"""
    reader = _Reader(data)
    magic, version, layer_count = reader.unpack(FILE_HEADER)
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"Unsupported checkpoint version {version}")

    (meta_len,) = reader.unpack(U32)
    try:
        metadata: Dict[str, Any] = json.loads(reader.take(meta_len).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptionError(f"Unreadable metadata block: {e}")
    if not isinstance(metadata, dict):
        raise CorruptionError("Metadata block is not a JSON object")

    layers = [_decode_layer(reader) for _ in range(layer_count)]
    if reader.offset != len(data):
        raise CorruptionError(f"{len(data) - reader.offset} trailing bytes after the last layer")

    architecture = metadata.get('architecture', {})
    time_dim = architecture.get('time_dim', layers[0].shape[0] if layers else 0)
    return Denoiser(layers=layers, time_dim=int(time_dim), metadata=metadata)


def load(path: str) -> Denoiser:
    """Read a checkpoint written by save"""
    with open(path, 'rb') as f:
        data = f.read()
    return decode(data)
