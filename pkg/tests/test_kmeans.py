#!/usr/bin/env python3
"""
Unit tests for k-means codebook fitting
"""

import unittest
import sys
import os

import numpy as np

# Add project root to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from numerics.rng import Rng
from quantization.kmeans import kmeans, kmeanspp_init, lloyd, nearest_centroids
from utils.errors import ArgumentError, ShapeError


class TestKmeans(unittest.TestCase):
    """Test suite for Lloyd iterations and k-means++ seeding"""

    def test_distortion_nonincreasing_across_seeds(self):
        """Lloyd distortion never rises, and final labels are nearest-centroid labels"""
        for seed in range(100):
            rng = Rng(seed)
            points = rng.normal((60, 2))
            result = kmeans(points, 5, 20, rng)
            for before, after in zip(result.history, result.history[1:]):
                self.assertLessEqual(after, before)
            labels, _ = nearest_centroids(points, result.centroids)
            np.testing.assert_array_equal(labels, result.labels)

    def test_separated_clusters_recovered(self):
        rng = Rng(4)
        left = rng.normal((40, 2)) * 0.1 + np.array([-5.0, 0.0], dtype=np.float32)
        right = rng.normal((40, 2)) * 0.1 + np.array([5.0, 0.0], dtype=np.float32)
        points = np.concatenate([left, right])
        result = kmeans(points, 2, 50, Rng(1))
        centers = result.centroids[np.argsort(result.centroids[:, 0])]
        np.testing.assert_allclose(centers[0], left.mean(axis=0), atol=1e-4)
        np.testing.assert_allclose(centers[1], right.mean(axis=0), atol=1e-4)

    def test_more_centroids_than_points(self):
        points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], dtype=np.float32)
        result = kmeans(points, 5, 10, Rng(0))
        self.assertEqual(result.centroids.shape, (5, 2))
        self.assertEqual(result.distortion, 0.0)

    def test_identical_points(self):
        points = np.ones((10, 3), dtype=np.float32)
        init = kmeanspp_init(points, 4, Rng(2))
        np.testing.assert_array_equal(init, np.ones((4, 3), dtype=np.float32))
        self.assertEqual(kmeans(points, 4, 5, Rng(2)).distortion, 0.0)

    def test_ties_go_to_lower_index(self):
        labels, dists = nearest_centroids(np.array([[0.5]]), np.array([[0.0], [1.0]]))
        self.assertEqual(labels[0], 0)
        self.assertEqual(dists[0], 0.25)

    def test_zero_iterations_keeps_init(self):
        points = Rng(3).normal((20, 2))
        init = points[:4].copy()
        result = lloyd(points, init, 0)
        np.testing.assert_array_equal(result.centroids, init)
        self.assertEqual(result.iterations, 0)

    def test_single_centroid_is_the_mean(self):
        points = Rng(12).normal((30, 3), dtype=np.float64)
        result = lloyd(points, points[7:8].copy(), 5)
        np.testing.assert_allclose(result.centroids[0], points.mean(axis=0), rtol=1e-12, atol=1e-12)
        self.assertTrue(np.all(result.labels == 0))

    def test_one_dimensional_two_partition_optimum(self):
        """On sorted 1-D data the optimal 2-partition is a contiguous split"""
        points = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.3]])
        best = min(
            (np.sum((points[:s] - points[:s].mean()) ** 2) + np.sum((points[s:] - points[s:].mean()) ** 2))
            / points.shape[0]
            for s in range(1, points.shape[0])
        )
        for seed in range(20):
            result = kmeans(points, 2, 20, Rng(seed))
            self.assertAlmostEqual(result.distortion, best, places=10)

    def test_seeding_spreads_over_blobs(self):
        rng = Rng(6)
        left = rng.normal((40, 2), dtype=np.float64) * 0.01 + np.array([-5.0, 0.0])
        right = rng.normal((40, 2), dtype=np.float64) * 0.01 + np.array([5.0, 0.0])
        points = np.concatenate([left, right])
        for seed in range(5):
            init = kmeanspp_init(points, 2, Rng(seed))
            self.assertEqual(sorted(np.sign(init[:, 0])), [-1.0, 1.0])

    def test_seed_determinism(self):
        points = Rng(8).normal((100, 4))
        a = kmeans(points, 8, 20, Rng(42))
        b = kmeans(points, 8, 20, Rng(42))
        np.testing.assert_array_equal(a.centroids, b.centroids)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_invalid_arguments(self):
        with self.assertRaises(ArgumentError):
            kmeanspp_init(np.zeros((0, 2)), 3, Rng(0))
        with self.assertRaises(ArgumentError):
            kmeanspp_init(np.zeros((5, 2)), 0, Rng(0))
        with self.assertRaises(ShapeError):
            lloyd(np.zeros((5, 2)), np.zeros((2, 3)), 1)


if __name__ == '__main__':
    unittest.main()
