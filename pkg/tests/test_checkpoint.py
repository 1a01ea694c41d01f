#!/usr/bin/env python3
"""
Unit tests for the DPQ1 checkpoint codec
"""

import unittest
import struct
import tempfile
import sys
import os

import numpy as np

# Add project root to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from checkpoint.checkpoint_format import MAGIC, decode, encode, header_bytes, load, save
from diffusion.denoiser import Denoiser, init_denoiser
from numerics.rng import Rng
from quantization.model_quantizer import METHODS, quantize_model
from quantization.quantized_layer import LayerTag, QuantizedLayer
from quantization.quantizers import AssignmentGrid, VQCodebook
from utils.errors import CorruptionError, FormatError


def mixed_model(seed: int) -> Denoiser:
    """Hidden layers quantized with independently drawn methods and group sizes"""
    rng = Rng(seed)
    fp = init_denoiser(rng.spawn(0), hidden=24, depth=3)
    for layer in fp.layers:
        layer.bias = rng.normal(layer.shape[0], dtype=np.float32) * 0.1
    model = fp.copy()
    for i in (1, 2):
        method = METHODS[int(rng.integers(0, len(METHODS)))]
        d = (2, 3, 4, 8)[int(rng.integers(0, 4))]
        q = quantize_model(fp, method, d=d, k=8, rng=rng.spawn(i), kmeans_iters=3, vq_iters=3, bits=3)
        model.layers[i] = q.layers[i]
    if rng.uniform() < 0.5:
        model.layers[2].bias = None
    model.metadata = {'seed': seed, 'note': 'mixed'}
    return model


def single_vq_model() -> Denoiser:
    cb = VQCodebook(d=2, k=4, centroids=np.arange(8, dtype=np.float32).reshape(4, 2))
    grid = AssignmentGrid(np.array([[0, 1], [2, 3]], dtype=np.uint8))
    return Denoiser(layers=[QuantizedLayer(LayerTag.VQ, grid, codebook=cb)], time_dim=2)


class TestCheckpointRoundTrip(unittest.TestCase):
    """Test suite for save/load fidelity"""

    def test_reencoding_is_byte_identical(self):
        for seed in range(20):
            model = mixed_model(seed)
            data = encode(model)
            restored = decode(data)
            self.assertEqual(encode(restored), data)
            self.assertEqual([layer.tag for layer in restored.layers], [layer.tag for layer in model.layers])
            for original, loaded in zip(model.layers, restored.layers):
                np.testing.assert_array_equal(loaded.weight(), original.weight())
                if original.bias is None:
                    self.assertIsNone(loaded.bias)
                else:
                    np.testing.assert_array_equal(loaded.bias, original.bias)

    def test_metadata_and_time_dim_survive(self):
        model = mixed_model(3)
        restored = decode(encode(model))
        self.assertEqual(restored.time_dim, 24)
        self.assertEqual(restored.metadata['seed'], 3)
        self.assertEqual(restored.metadata['architecture']['time_dim'], 24)

    def test_file_round_trip(self):
        model = mixed_model(7)
        with tempfile.TemporaryDirectory() as tmp:
            first = os.path.join(tmp, 'a.dpq')
            second = os.path.join(tmp, 'b.dpq')
            written = save(model, first)
            self.assertEqual(written, os.path.getsize(first))
            save(load(first), second)
            with open(first, 'rb') as f, open(second, 'rb') as g:
                self.assertEqual(f.read(), g.read())

    def test_empty_model_is_header_only(self):
        model = Denoiser(layers=[], time_dim=0)
        data = encode(model)
        self.assertEqual(len(data), header_bytes(model))
        self.assertEqual(data[:4], MAGIC)
        restored = decode(data)
        self.assertEqual(restored.layers, [])

    def test_layer_payload_size(self):
        data = encode(single_vq_model())
        # layer header, 4×2 f32 centroids, 2×2 u8 indices, bias flag
        self.assertEqual(len(data) - header_bytes(single_vq_model()), 13 + 32 + 4 + 1)


class TestCheckpointErrors(unittest.TestCase):
    """Test suite for malformed checkpoint detection"""

    def setUp(self):
        self.data = bytearray(encode(single_vq_model()))

    def test_bad_magic(self):
        self.data[0:4] = b'XXXX'
        with self.assertRaises(FormatError):
            decode(bytes(self.data))

    def test_bad_version(self):
        self.data[4:6] = struct.pack('<H', 2)
        with self.assertRaises(FormatError):
            decode(bytes(self.data))

    def test_unknown_layer_tag(self):
        self.data[header_bytes(single_vq_model())] = 9
        with self.assertRaises(FormatError):
            decode(bytes(self.data))

    def test_assignment_out_of_range(self):
        self.data[-2] = 4
        with self.assertRaises(CorruptionError):
            decode(bytes(self.data))

    def test_bad_bias_flag(self):
        self.data[-1] = 2
        with self.assertRaises(CorruptionError):
            decode(bytes(self.data))

    def test_truncated(self):
        for cut in (3, 12, len(self.data) - 1):
            with self.assertRaises(CorruptionError):
                decode(bytes(self.data[:cut]))

    def test_trailing_bytes(self):
        with self.assertRaises(CorruptionError):
            decode(bytes(self.data) + b'\x00')

    def test_projection_out_of_range(self):
        fp = init_denoiser(Rng(4), hidden=24, depth=3)
        model = quantize_model(fp, 'dpq', d=4, k=8, rng=Rng(1), kmeans_iters=2)
        layer = model.layers[1]
        layer.projection.table[0, 0] = layer.pool.count
        with self.assertRaises(CorruptionError):
            decode(encode(model))


if __name__ == '__main__':
    unittest.main()
