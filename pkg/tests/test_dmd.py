#!/usr/bin/env python

"""Tests for `stabilipy.dmd`."""

import itertools
import json
import unittest

import numpy as np

from stabilipy.dmd import (
    StabilityReport,
    cmd,
    dense_lambda_max,
    dmd_pair,
    edge_stability,
    eigensubspace,
    lipschitz_bound,
    max_dmd,
    node_score,
    rank_and_select,
    score_nodes,
    subspace_sensitivity,
)
from stabilipy.eigen import GeneralizedSpectrum, dense_pseudoinverse, generalized_eigenpairs
from stabilipy.exceptions import IsolatedNode, NodeSetMismatch, ZeroCut
from stabilipy.graph import SparseGraph, laplacian
from stabilipy.manifold import Manifold

from .fixtures import path_graph, random_connected, reweighted


def scaled(g, factor):
    return SparseGraph(g.adjacency * factor)


class TestDistortion(unittest.TestCase):
    def setUp(self):
        self.g = random_connected(20, seed=1)

    def test_identity_and_halved(self):
        self.assertAlmostEqual(dmd_pair(self.g, self.g, 0, 13), 1.0, places=8)
        self.assertAlmostEqual(dmd_pair(self.g, scaled(self.g, 0.5), 0, 13), 2.0, places=8)

    def test_matches_pseudoinverse_ratio(self):
        g_y = random_connected(20, seed=2)
        px, py = dense_pseudoinverse(laplacian(self.g)), dense_pseudoinverse(laplacian(g_y))
        for p, q in [(0, 19), (4, 7), (11, 2)]:
            expected = (py[p, p] + py[q, q] - 2 * py[p, q]) / (px[p, p] + px[q, q] - 2 * px[p, q])
            self.assertAlmostEqual(dmd_pair(self.g, g_y, p, q), expected, places=6)

    def test_accepts_manifolds(self):
        m = Manifold.from_graph(self.g)
        self.assertAlmostEqual(dmd_pair(m, m, 1, 2), 1.0, places=8)

    def test_node_set_mismatch(self):
        with self.assertRaises(NodeSetMismatch):
            dmd_pair(path_graph(4), path_graph(5), 0, 1)


class TestSubspace(unittest.TestCase):
    def test_column_norms(self):
        v = np.array([[1.0], [-1.0]]) / np.sqrt(2)
        V = eigensubspace(GeneralizedSpectrum(values=np.array([4.0]), vectors=v))
        self.assertAlmostEqual(np.linalg.norm(V[:, 0]), 2.0)
        ones = GeneralizedSpectrum(values=np.ones(1), vectors=v)
        np.testing.assert_allclose(eigensubspace(ones), v)

    def test_gram_diagonal_equals_eigenvalues(self):
        g_x = random_connected(12, seed=3)
        spectrum = generalized_eigenpairs(laplacian(g_x), laplacian(reweighted(g_x, 3)), 4)
        V = eigensubspace(spectrum)
        np.testing.assert_allclose(np.diag(V.T @ V), spectrum.values, rtol=1e-10)

    def test_edge_stability(self):
        V = np.array([[1.0], [-1.0], [1.0]])
        self.assertAlmostEqual(edge_stability(V, 0, 1), 4.0)
        self.assertAlmostEqual(edge_stability(V, 0, 2), 0.0)
        with self.assertRaises(IndexError):
            edge_stability(V, 0, 3)
        with self.assertRaises(ValueError):
            edge_stability(V, 1, 1)

    def test_edge_stability_term_by_term(self):
        g_x = random_connected(12, seed=4)
        spectrum = generalized_eigenpairs(laplacian(g_x), laplacian(reweighted(g_x, 4)), 5)
        expected = sum(z * (v[2] - v[9]) ** 2 for z, v in zip(spectrum.values, spectrum.vectors.T))
        self.assertAlmostEqual(edge_stability(eigensubspace(spectrum), 2, 9), expected, places=10)


class TestScores(unittest.TestCase):
    def setUp(self):
        self.g_x = random_connected(30, seed=5)
        self.g_y = reweighted(self.g_x, 5)

    def test_node_scores_match_brute_force(self):
        scores = score_nodes(self.g_x, self.g_y, s=6)
        V = eigensubspace(scores.spectrum)
        A = self.g_x.adjacency.toarray()
        for p in range(30):
            neighbors = np.flatnonzero(A[p])
            expected = np.mean([edge_stability(V, p, q) for q in neighbors])
            self.assertAlmostEqual(scores.node_scores[p], expected, places=10)
            self.assertAlmostEqual(node_score(V, self.g_x, p), expected, places=10)
        self.assertTrue(np.all(scores.node_scores >= 0))

    def test_single_neighbor_and_isolated(self):
        V = np.array([[0.0], [2.0], [5.0]])
        g = SparseGraph.from_edges(3, [0], [1])
        self.assertAlmostEqual(node_score(V, g, 0), 4.0)
        with self.assertRaises(IsolatedNode):
            node_score(V, g, 2)

    def test_output_rescaling_scales_scores(self):
        n = self.g_x.n_nodes
        base = score_nodes(self.g_x, self.g_y, s=n - 1)
        tripled = score_nodes(self.g_x, scaled(self.g_y, 3.0), s=n - 1)
        np.testing.assert_allclose(tripled.node_scores, base.node_scores / 3.0, rtol=1e-6)
        self.assertEqual(
            rank_and_select(base, 0.1).ranking.tolist(), rank_and_select(tripled, 0.1).ranking.tolist()
        )

    def test_subspace_sensitivity(self):
        df = subspace_sensitivity(self.g_x, self.g_y, [2, 5, 10])
        self.assertEqual(df["s"].tolist(), [2, 5, 10])
        self.assertAlmostEqual(df["spearman"].iloc[-1], 1.0)


class TestRanking(unittest.TestCase):
    def test_equal_scores_follow_node_ids(self):
        report = rank_and_select(np.ones(10), 0.1)
        self.assertEqual(report.ranking.tolist(), list(range(10)))
        self.assertEqual(report.unstable.tolist(), [0])
        self.assertEqual(report.stable.tolist(), [9])

    def test_one_percent_of_hundred(self):
        report = rank_and_select(np.random.default_rng(0).random(100), 0.01)
        self.assertEqual(len(report.stable), 1)
        self.assertEqual(len(report.unstable), 1)

    def test_half_of_odd_count_stays_disjoint(self):
        report = rank_and_select(np.arange(5.0), 0.5)
        self.assertEqual(report.unstable.tolist(), [4, 3])
        self.assertEqual(report.stable.tolist(), [0, 1])

    def test_infinite_scores_excluded(self):
        report = rank_and_select(np.array([1.0, np.inf, 3.0, 2.0]), 0.25)
        self.assertEqual(report.ranking.tolist(), [2, 3, 0])
        self.assertEqual(report.excluded.tolist(), [1])

    def test_fraction_range(self):
        with self.assertRaises(ValueError):
            rank_and_select(np.ones(4), 0.0)
        with self.assertRaises(ValueError):
            rank_and_select(np.ones(4), 0.6)

    def test_segments(self):
        report = rank_and_select(np.arange(10.0), 0.1)
        segments = report.segments((0.2, 0.6, 0.2))
        self.assertEqual(segments["unstable"].tolist(), [9, 8])
        self.assertEqual(segments["stable"].tolist(), [0, 1])
        self.assertEqual(sorted(segments["mid"].tolist()), list(range(2, 8)))
        default = report.segments()
        self.assertEqual(len(default["mid"]), 8)

    def test_json_is_deterministic_and_round_trips(self):
        report = rank_and_select(
            np.array([0.5, 2.0, 1.0, 3.0]), 0.25, node_ids=np.array([10, 20, 30, 40]), config={"seed": 0, "k": 5}
        )
        text = report.to_json()
        self.assertEqual(text, report.to_json())
        data = json.loads(text)
        self.assertEqual(
            list(data), ["nodes", "stable", "unstable", "lambda_max", "dmd_max", "fraction", "n_excluded", "config"]
        )
        self.assertEqual(data["unstable"], [40])
        self.assertEqual(data["stable"], [10])
        self.assertEqual(list(data["config"]), ["k", "seed"])
        again = StabilityReport.from_dict(data)
        self.assertEqual(again.ranking.tolist(), report.ranking.tolist())
        self.assertEqual(again.unstable.tolist(), report.unstable.tolist())

    def test_frame(self):
        df = rank_and_select(np.array([1.0, 3.0, 2.0]), 0.3).to_frame()
        self.assertEqual(df["id"].tolist(), [1, 2, 0])
        self.assertEqual(df["rank"].tolist(), [1, 2, 3])
        self.assertEqual(df.attrs["fraction"], 0.3)


class TestCutAndBounds(unittest.TestCase):
    def test_cut_distortion(self):
        g = random_connected(10, seed=6)
        self.assertAlmostEqual(cmd(g, g, [0, 3]), 1.0)
        self.assertAlmostEqual(cmd(g, scaled(g, 2.0), [0, 3]), 2.0)
        with self.assertRaises(ZeroCut):
            cmd(SparseGraph.from_edges(4, [0, 2], [1, 3]), path_graph(4), [0, 1])
        with self.assertRaises(ValueError):
            cmd(g, g, [])

    def test_cut_bound_exhaustive(self):
        for seed in range(10):
            g_x = random_connected(10, seed=seed)
            g_y = random_connected(10, seed=seed + 50)
            bound = 1.0 / dense_lambda_max(g_x, g_y)
            ratios = [
                cmd(g_x, g_y, S)
                for size in range(1, 10)
                for S in itertools.combinations(range(10), size)
            ]
            self.assertGreaterEqual(min(ratios), bound - 1e-9)

    def test_lipschitz_bound(self):
        g = random_connected(15, seed=7)
        identity = generalized_eigenpairs(laplacian(g), laplacian(g), 3)
        self.assertAlmostEqual(lipschitz_bound(identity), 1.0, places=8)
        halved = generalized_eigenpairs(laplacian(g), laplacian(scaled(g, 0.5)), 3)
        self.assertAlmostEqual(lipschitz_bound(halved), 2.0, places=8)

    def test_distortion_never_exceeds_bound(self):
        for seed in range(20):
            g_x = random_connected(15, seed=seed)
            g_y = random_connected(15, seed=seed + 100)
            spectrum = generalized_eigenpairs(laplacian(g_x), laplacian(g_y), 3)
            bound = lipschitz_bound(spectrum)
            self.assertAlmostEqual(bound, dense_lambda_max(g_x, g_y), places=6)
            worst = max_dmd(g_x, g_y)
            self.assertEqual(worst["mode"], "exhaustive")
            self.assertEqual(worst["n_pairs"], 105)
            self.assertLessEqual(worst["value"], bound + 1e-6)
            p, q = worst["pair"]
            self.assertAlmostEqual(worst["value"], dmd_pair(g_x, g_y, p, q), places=6)

    def test_sampled_mode(self):
        g_x = random_connected(15, seed=8)
        g_y = random_connected(15, seed=9)
        sampled = max_dmd(g_x, g_y, cap=5, n_samples=10)
        self.assertEqual(sampled["mode"], "sampled")
        self.assertEqual(sampled["n_pairs"], 15)
        self.assertLessEqual(sampled["value"], max_dmd(g_x, g_y)["value"] + 1e-9)


if __name__ == "__main__":
    unittest.main()
