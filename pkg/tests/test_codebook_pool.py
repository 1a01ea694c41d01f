#!/usr/bin/env python3
"""
Unit tests for codebook-pool construction and projection
"""

import unittest
import sys
import os

import numpy as np

# Add project root to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from numerics.linalg import fp16_round_array, is_fp16_exact
from numerics.rng import Rng
from quantization.codebook_pool import (CodebookPool, Importance, Projection, build_pool,
                                        compute_importance, normalized_distance, pool_capacity,
                                        pooled_reconstruct, project)
from quantization.quantizers import AssignmentGrid, PQCodebook, reconstruct
from utils.errors import ArgumentError, CapacityError, CorruptionError


def random_setup(rng: Rng, m=16, subspaces=4, k=8, d=2):
    cb = PQCodebook(d=d, k=k, centroids=rng.normal((subspaces, k, d)))
    grid = AssignmentGrid(rng.integers(0, k, (m, subspaces)).astype(np.uint8))
    W = rng.normal((m, subspaces * d))
    return cb, grid, W


class TestPoolConstruction(unittest.TestCase):
    """Test suite for greedy pool building"""

    def test_invariants_on_random_codebooks(self):
        """Capacity, phase-1 separation, nearest projection and the pooled error bound"""
        tau = 0.3
        for seed in range(50):
            rng = Rng(seed)
            cb, grid, W = random_setup(rng)
            imp = compute_importance(grid, cb.k)

            small, _ = build_pool(cb, imp, tau, capacity=5)
            self.assertLessEqual(small.count, 5)

            capacity = cb.subspaces * cb.k
            pool, proj = build_pool(cb, imp, tau, capacity=capacity)
            self.assertLessEqual(pool.count, capacity)
            self.assertTrue(is_fp16_exact(pool.entries))

            head = pool.entries[:pool.phase1_count]
            for a in range(head.shape[0]):
                for b in range(a):
                    self.assertGreaterEqual(normalized_distance(head[a], head[b]), tau)

            for j in range(cb.subspaces):
                for p in range(cb.k):
                    dists = [np.sum((cb.centroids[j, p].astype(np.float64) - e) ** 2) for e in pool.entries]
                    self.assertEqual(proj.table[j, p], int(np.argmin(dists)))

            pooled = pooled_reconstruct(pool, proj, grid)
            plain = reconstruct(cb, grid)
            rounded, _ = fp16_round_array(plain)
            d = cb.d
            for i in range(W.shape[0]):
                for j in range(cb.subspaces):
                    cols = slice(j * d, (j + 1) * d)
                    e_pool = np.linalg.norm(W[i, cols] - pooled[i, cols])
                    e_pq = np.linalg.norm(W[i, cols] - plain[i, cols])
                    fp16_error = np.linalg.norm(plain[i, cols] - rounded[i, cols])
                    self.assertLessEqual(e_pool, e_pq + tau * np.sqrt(d) + fp16_error + 1e-5)

    def test_most_important_centroid_enters_first(self):
        rng = Rng(3)
        cb, grid, _ = random_setup(rng)
        grid.indices[:, 2] = 5
        imp = compute_importance(grid, cb.k)
        pool, _ = build_pool(cb, imp, 0.05, capacity=10)
        rounded, _ = fp16_round_array(cb.centroids[2, 5])
        np.testing.assert_array_equal(pool.entries[0], rounded)
        self.assertEqual(pool.entry_importance[0], grid.m)

    def test_phase_two_fills_remaining_slots(self):
        cb, grid, _ = random_setup(Rng(4))
        pool, proj = build_pool(cb, compute_importance(grid, cb.k), tau=100.0, capacity=7)
        self.assertEqual(pool.phase1_count, 1)
        self.assertEqual(pool.count, 7)
        self.assertLess(int(proj.table.max()), 7)

    def test_importance_counts(self):
        grid = AssignmentGrid(np.array([[0, 1], [0, 1], [2, 1]], dtype=np.uint8))
        imp = compute_importance(grid, 3)
        np.testing.assert_array_equal(imp.counts, [[2, 0, 1], [0, 3, 0]])

    def test_invariants_at_default_tau_and_capacity(self):
        tau = 0.05
        for seed in range(20):
            cb, grid, _ = random_setup(Rng(100 + seed), m=64, subspaces=4, k=8, d=2)
            capacity = pool_capacity(grid.m, cb.subspaces * cb.d, cb.d)
            self.assertEqual(capacity, 8)
            pool, proj = build_pool(cb, compute_importance(grid, cb.k), tau, capacity=capacity)
            self.assertEqual(pool.count, capacity)
            self.assertTrue(is_fp16_exact(pool.entries))
            head = pool.entries[:pool.phase1_count]
            for a in range(head.shape[0]):
                for b in range(a):
                    self.assertGreaterEqual(normalized_distance(head[a], head[b]), tau)
            flat = cb.centroids.reshape(-1, cb.d).astype(np.float64)
            dists = ((flat[:, None, :] - pool.entries[None, :, :].astype(np.float64)) ** 2).sum(axis=2)
            np.testing.assert_array_equal(proj.table.ravel(), np.argmin(dists, axis=1))

    def test_identical_centroids_share_the_more_important_entry(self):
        cb = PQCodebook(d=2, k=2, centroids=np.array([[[1.0, 2.0], [1.0, 2.0]]], dtype=np.float32))
        imp = Importance(np.array([[3, 5]], dtype=np.int64))
        for rule in ('nearest', 'importance_gap'):
            pool, proj = build_pool(cb, imp, 0.05, capacity=2, rule=rule)
            self.assertEqual(pool.phase1_count, 1)
            self.assertEqual(pool.entry_importance[0], 5)
            np.testing.assert_array_equal(proj.table, [[0, 0]])

    def test_out_of_range_assignment_rejected(self):
        grid = AssignmentGrid(np.array([[5, 0]], dtype=np.uint8))
        with self.assertRaises(CorruptionError):
            compute_importance(grid, 4)
        np.testing.assert_array_equal(compute_importance(grid, 6).counts[0], [0, 0, 0, 0, 0, 1])

    def test_validation(self):
        cb, grid, _ = random_setup(Rng(5))
        imp = compute_importance(grid, cb.k)
        with self.assertRaises(ArgumentError):
            build_pool(cb, imp, 0.0, capacity=4)
        with self.assertRaises(CapacityError):
            build_pool(cb, imp, 0.05, capacity=70000)
        with self.assertRaises(CapacityError):
            pool_capacity(4096, 4096, 2)


class TestProjection(unittest.TestCase):
    """Test suite for centroid-to-pool projection rules"""

    def setUp(self):
        self.pool = CodebookPool(d=2, capacity=2, entries=np.array([[0.0, 0.0], [0.01, 0.0]], dtype=np.float32),
                                 phase1_count=2, entry_importance=np.array([1, 5]))
        self.centroids = np.array([[[0.004, 0.0], [5.0, 5.0]]], dtype=np.float32)

    def test_nearest_rule(self):
        proj = project(self.centroids, self.pool, rule='nearest')
        np.testing.assert_array_equal(proj.table, [[0, 1]])

    def test_importance_gap_rule(self):
        proj = project(self.centroids, self.pool, tau=0.05, rule='importance_gap')
        np.testing.assert_array_equal(proj.table, [[1, 1]])

    def test_rule_validation(self):
        with self.assertRaises(ArgumentError):
            project(self.centroids, self.pool, rule='farthest')
        with self.assertRaises(ArgumentError):
            project(self.centroids, self.pool, rule='importance_gap')

    def test_corrupt_projection_rejected(self):
        grid = AssignmentGrid(np.zeros((1, 1), dtype=np.uint8))
        with self.assertRaises(CorruptionError):
            pooled_reconstruct(self.pool, Projection(np.array([[2, 0]], dtype=np.uint16)), grid)


if __name__ == '__main__':
    unittest.main()
