#!/usr/bin/env python3
"""
Unit tests for configuration resolution and the command line launcher
"""

import unittest
import csv
import io
import tempfile
import sys
import os
from contextlib import redirect_stderr

# Add project root to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli.launcher import run
from cli.run_config import check_group_dim, load_config, parse_key_values, resolve
from utils.errors import UsageError

SMALL_MODEL = ['--hidden', '24', '--depth', '2', '--timesteps', '20', '--dataset-size', '256']


def quiet_run(argv):
    """Run the launcher with stderr captured; returns (code, stderr text)"""
    buffer = io.StringIO()
    with redirect_stderr(buffer):
        code = run(argv)
    return code, buffer.getvalue()


def read_csv(path):
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.reader(f))


class TestRunConfig(unittest.TestCase):
    """Test suite for layered settings"""

    def setUp(self):
        self.defaults = load_config()

    def test_defaults(self):
        cfg = resolve('quantize', {}, env={})
        self.assertEqual(cfg['d'], 4)
        self.assertEqual(cfg['k'], 256)
        self.assertEqual(cfg['tau'], 0.05)
        self.assertEqual(cfg['seed'], 0)

    def test_key_value_parsing(self):
        values = parse_key_values(['# comment', 'k = 64', 'tau=0.1  # inline', '', 'round_fp16=no'],
                                  self.defaults)
        self.assertEqual(values, {'k': 64, 'tau': 0.1, 'round_fp16': False})

    def test_unknown_key(self):
        with self.assertRaises(UsageError):
            parse_key_values(['colour=blue'], self.defaults)
        with self.assertRaises(UsageError):
            resolve('quantize', {'colour': 'blue'}, env={})

    def test_bad_value(self):
        with self.assertRaises(UsageError):
            parse_key_values(['k=many'], self.defaults)

    def test_config_file_then_flags(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.cfg')
            with open(path, 'w', encoding='utf-8') as f:
                f.write('k=32\ntau=0.2\n')
            cfg = resolve('quantize', {'k': 16}, config_file=path, env={})
        self.assertEqual(cfg['k'], 16)
        self.assertEqual(cfg['tau'], 0.2)

    def test_seed_environment_fallback(self):
        self.assertEqual(resolve('sample', {}, env={'DPQ_SEED': '17'})['seed'], 17)
        self.assertEqual(resolve('sample', {'seed': 3}, env={'DPQ_SEED': '17'})['seed'], 3)
        with self.assertRaises(UsageError):
            resolve('sample', {}, env={'DPQ_SEED': 'seventeen'})

    def test_bit_presets(self):
        cfg = resolve('quantize', {'bits': 1, 'method': 'dpq'}, env={})
        self.assertEqual((cfg['d'], cfg['k']), (8, 256))
        cfg = resolve('quantize', {'bits': 3, 'method': 'pq'}, env={})
        self.assertEqual(cfg['d'], 3)
        cfg = resolve('quantize', {'bits': 1, 'd': 2, 'method': 'pq'}, env={})
        self.assertEqual(cfg['d'], 2)
        cfg = resolve('quantize', {'bits': 4, 'method': 'uniform'}, env={})
        self.assertEqual(cfg['d'], 4)
        with self.assertRaises(UsageError):
            resolve('quantize', {'bits': 5, 'method': 'dpq'}, env={})

    def test_uniform_bit_width_range(self):
        self.assertEqual(resolve('quantize', {'bits': 8, 'method': 'uniform'}, env={})['bits'], 8)
        self.assertEqual(resolve('quantize', {'bits': 1, 'method': 'uniform'}, env={})['bits'], 1)
        for bits in (0, 9, 16):
            with self.assertRaises(UsageError):
                resolve('quantize', {'bits': bits, 'method': 'uniform'}, env={})

    def test_group_dim_check(self):
        check_group_dim(4, 24)
        check_group_dim(6, 24)
        with self.assertRaises(UsageError):
            check_group_dim(5, 24)
        with self.assertRaises(UsageError):
            check_group_dim(0, 24)


class TestLauncher(unittest.TestCase):
    """Test suite for exit codes and the end-to-end pipeline"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name, root=None):
        return os.path.join(root or self.dir, name)

    def train(self, root=None):
        code, err = quiet_run(['train-toy', '--seed', '5', '--epochs', '1', '--batch-size', '128',
                               '--out', self.path('fp.dpq', root), '--data-out', self.path('data.csv', root)]
                              + SMALL_MODEL)
        self.assertEqual(code, 0, err)

    def test_usage_errors(self):
        self.assertEqual(quiet_run(['transmogrify'])[0], 1)
        self.assertEqual(quiet_run([])[0], 1)
        self.assertEqual(quiet_run(['report', 'x.dpq'])[0], 1)
        self.assertEqual(quiet_run(['sample', 'x.dpq', '--out', 'y.csv', '--bogus'])[0], 1)

    def test_missing_input_is_runtime_error(self):
        code, err = quiet_run(['report', self.path('missing.dpq'), '--out', self.path('size.csv')])
        self.assertEqual(code, 2)
        self.assertIn('❌', err)

    def test_malformed_points_csv_is_runtime_error(self):
        bad = self.path('bad.csv')
        with open(bad, 'w', encoding='utf-8') as f:
            f.write('x,y\n1.0,abc\n')
        code, err = quiet_run(['eval', bad, bad, '--out', self.path('eval.csv')])
        self.assertEqual(code, 2)
        self.assertIn('bad.csv:2', err)
        self.assertFalse(os.path.exists(self.path('eval.csv')))

    def test_uniform_bits_out_of_range_is_usage_error(self):
        code, err = quiet_run(['quantize', self.path('fp.dpq'), '--method', 'uniform', '--bits', '9',
                               '--out', self.path('q.dpq')])
        self.assertEqual(code, 1)
        self.assertIn('[1, 8]', err)
        self.assertFalse(os.path.exists(self.path('q.dpq')))

    def test_bad_group_dim(self):
        self.train()
        code, _ = quiet_run(['quantize', self.path('fp.dpq'), '--d', '5', '--out', self.path('q.dpq')])
        self.assertEqual(code, 1)

    def test_resolved_config_is_logged(self):
        self.train()
        code, err = quiet_run(['report', self.path('fp.dpq'), '--out', self.path('size.csv')])
        self.assertEqual(code, 0)
        self.assertIn('resolved config: ', err)
        rows = read_csv(self.path('size.csv'))
        self.assertEqual(rows[0], ['layer', 'component', 'bits', 'ratio'])
        self.assertIn(['total', 'bits_per_value', '32.0', '1.0'], rows)

    def pipeline(self, root):
        self.train(root)
        steps = [
            ['quantize', self.path('fp.dpq', root), '--method', 'dpq', '--d', '4', '--k', '16',
             '--kmeans-iters', '3', '--out', self.path('q.dpq', root)],
            ['calibrate', self.path('q.dpq', root), self.path('fp.dpq', root), '--epochs', '1',
             '--dataset-size', '256', '--eval-samples', '64', '--eval-steps', '5',
             '--out', self.path('qc.dpq', root), '--log', self.path('log.csv', root),
             '--quality', self.path('quality.csv', root)],
            ['sample', self.path('qc.dpq', root), '--steps', '5', '--n', '64',
             '--out', self.path('samples.csv', root)],
            ['eval', self.path('samples.csv', root), self.path('data.csv', root), '--modes',
             '--swd-projections', '16', '--out', self.path('eval.csv', root)],
            ['report', self.path('qc.dpq', root), '--out', self.path('size.csv', root)],
            ['trace', self.path('fp.dpq', root), self.path('qc.dpq', root), '--steps', '5',
             '--chains', '8', '--out', self.path('trace.csv', root)],
        ]
        for argv in steps:
            code, err = quiet_run(argv + ['--seed', '5'])
            self.assertEqual(code, 0, f"{argv[0]}: {err}")

    def test_pipeline(self):
        self.pipeline(self.dir)
        self.assertIn(['total', 'bits_per_value', '1.0'], [row[:3] for row in read_csv(self.path('size.csv'))])
        samples = read_csv(self.path('samples.csv'))
        self.assertEqual(samples[0], ['x', 'y'])
        self.assertEqual(len(samples), 65)
        metrics = [row[0] for row in read_csv(self.path('eval.csv'))[1:]]
        self.assertEqual(metrics, ['swd', 'in_mode_fraction', 'modes_covered'])
        self.assertEqual(len(read_csv(self.path('trace.csv'))), 1 + 3 * 5)
        quality_epochs = {row[0] for row in read_csv(self.path('quality.csv'))[1:]}
        self.assertEqual(quality_epochs, {'0', '1'})

    def test_calibrate_logs_pool_search_gap(self):
        self.train()
        steps = [
            ['quantize', self.path('fp.dpq'), '--method', 'dpq', '--d', '4', '--k', '16',
             '--kmeans-iters', '3', '--out', self.path('q.dpq')],
            ['calibrate', self.path('q.dpq'), self.path('fp.dpq'), '--epochs', '1', '--pool-search',
             '--dataset-size', '256', '--eval-samples', '16', '--eval-steps', '2',
             '--out', self.path('qc.dpq'), '--log', self.path('log.csv')],
        ]
        for argv in steps:
            code, err = quiet_run(argv + ['--seed', '5'])
            self.assertEqual(code, 0, f"{argv[0]}: {err}")
        log = read_csv(self.path('log.csv'))
        self.assertEqual(log[0][-1], 'pool_search_gap')
        self.assertEqual(len(log), 1 + 1)
        for row in log[1:]:
            self.assertGreaterEqual(float(row[-1]), -1e-9)

    def test_same_seed_same_bytes(self):
        second = self.path('second')
        os.makedirs(second)
        self.pipeline(self.dir)
        self.pipeline(second)
        for name in ('fp.dpq', 'q.dpq', 'qc.dpq', 'log.csv', 'samples.csv', 'eval.csv', 'size.csv', 'trace.csv'):
            with open(self.path(name), 'rb') as f, open(self.path(name, second), 'rb') as g:
                self.assertEqual(f.read(), g.read(), name)


if __name__ == '__main__':
    unittest.main()
