#!/usr/bin/env python

"""Tests for `stabilipy.embedding`."""

import unittest

import numpy as np

from stabilipy.embedding import (
    approx_resistance,
    approx_resistances,
    augment_features,
    eigengap_report,
    resistance_correlation,
    sample_pairs,
    spectral_embed,
)
from stabilipy.exceptions import DimensionMismatch, FormatError
from stabilipy.resistance import exact_resistances

from .fixtures import path_graph, random_connected, three_cliques


class TestSpectralEmbedding(unittest.TestCase):
    def test_full_spectrum_is_exact(self):
        for seed in range(3):
            g = random_connected(20, seed=seed)
            U = spectral_embed(g, g.n_nodes - 1)
            rows, cols = np.triu_indices(g.n_nodes, k=1)
            pairs = np.column_stack([rows, cols])
            np.testing.assert_allclose(approx_resistances(U, pairs), exact_resistances(g, pairs), rtol=1e-6)

    def test_more_dimensions_refine_resistances(self):
        g = random_connected(30, seed=2)
        rows, cols = np.triu_indices(g.n_nodes, k=1)
        pairs = np.column_stack([rows, cols])
        exact = exact_resistances(g, pairs)
        errors = []
        for k in (2, 5, 10, 20, 29):
            approx = approx_resistances(spectral_embed(g, k), pairs)
            self.assertTrue(np.all(approx <= exact * (1 + 1e-8)))
            errors.append(np.mean(np.abs(approx - exact)))
        self.assertTrue(all(b <= a * 1.05 for a, b in zip(errors, errors[1:])), errors)
        self.assertLess(errors[-1], 1e-8)

    def test_shape_and_ascending_eigenvalues(self):
        U = spectral_embed(random_connected(30, seed=1), 6)
        self.assertEqual(U.U.shape, (30, 6))
        self.assertTrue(np.all(np.diff(U.eigenvalues) >= 0))

    def test_single_pair(self):
        U = spectral_embed(path_graph(2), 1)
        self.assertAlmostEqual(approx_resistance(U, 0, 1), 1.0)
        with self.assertRaises(ValueError):
            approx_resistance(U, 0, 0)


class TestCorrelation(unittest.TestCase):
    def test_sample_pairs_distinct(self):
        pairs = sample_pairs(10, 20, np.random.default_rng(0))
        self.assertEqual(len({tuple(p) for p in pairs.tolist()}), 20)
        self.assertTrue(np.all(pairs[:, 0] < pairs[:, 1]))
        self.assertEqual(len(sample_pairs(5, 100, np.random.default_rng(0))), 10)

    def test_full_spectrum_correlation_is_one(self):
        g = random_connected(15, seed=4)
        U = spectral_embed(g, 14)
        self.assertAlmostEqual(resistance_correlation(g, U, n_pairs=30), 1.0, places=6)

    def test_row_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            resistance_correlation(path_graph(5), spectral_embed(path_graph(4), 2))


class TestEigengap(unittest.TestCase):
    def test_three_clusters_suggest_two_dimensions(self):
        report = eigengap_report(three_cliques(), 5, n_classes=3)
        self.assertEqual(report.suggested_k, 2)
        self.assertEqual(report.heuristic_k, 30)
        self.assertEqual(len(report.ratios), 5)
        self.assertEqual(report.to_dict()["suggested_k"], 2)

    def test_k_max_out_of_range(self):
        with self.assertRaises(ValueError):
            eigengap_report(path_graph(4), 4)


class TestAugmentFeatures(unittest.TestCase):
    def setUp(self):
        self.U = spectral_embed(random_connected(12, seed=2), 3)

    def test_blocks_have_equal_scale(self):
        X = 1000.0 * np.random.default_rng(0).standard_normal((12, 4))
        rows = augment_features(self.U, X)
        self.assertEqual(rows.shape, (12, 7))
        np.testing.assert_allclose(np.linalg.norm(rows[:, :3]), np.sqrt(12))
        np.testing.assert_allclose(np.linalg.norm(rows[:, 3:]), np.sqrt(12))
        np.testing.assert_allclose(rows.mean(axis=0), 0.0, atol=1e-10)

    def test_no_features(self):
        rows = augment_features(self.U, np.zeros((12, 0)))
        np.testing.assert_allclose(rows, augment_features(self.U))

    def test_errors(self):
        with self.assertRaises(DimensionMismatch):
            augment_features(self.U, np.ones((11, 2)))
        X = np.ones((12, 2))
        X[3, 1] = np.nan
        with self.assertRaises(FormatError):
            augment_features(self.U, X)


if __name__ == "__main__":
    unittest.main()
