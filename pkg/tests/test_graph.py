#!/usr/bin/env python

"""Tests for `stabilipy.graph`."""

import os
import tempfile
import unittest

import numpy as np

from stabilipy.exceptions import EmptyGraph, FormatError, InvalidGraph, SelfLoopWarning
from stabilipy.graph import (
    SparseGraph,
    connected_components,
    induced_subgraph,
    is_connected,
    laplacian,
    largest_component,
    quadratic_form,
    read_edgelist,
    smoothness,
    write_edgelist,
)

from .fixtures import path_graph, random_connected


class TestSparseGraph(unittest.TestCase):
    def test_duplicate_edges_are_summed(self):
        g = SparseGraph.from_edges(2, [0, 1], [1, 0], [1.0, 2.0])
        u, v, w = g.edges()
        self.assertEqual(g.n_edges, 1)
        self.assertEqual((u[0], v[0]), (0, 1))
        self.assertAlmostEqual(w[0], 3.0)

    def test_self_loops_dropped_with_warning(self):
        with self.assertWarns(SelfLoopWarning):
            g = SparseGraph.from_edges(3, [0, 1, 2], [1, 1, 0])
        self.assertEqual(g.n_edges, 2)
        self.assertEqual(g.attrs["self_loops_dropped"], 1)

    def test_invalid_weights_and_endpoints(self):
        with self.assertRaises(InvalidGraph):
            SparseGraph.from_edges(2, [0], [1], [-1.0])
        with self.assertRaises(IndexError):
            SparseGraph.from_edges(2, [0], [2])

    def test_edges_sorted_and_degree(self):
        g = SparseGraph.from_edges(4, [3, 2, 0], [0, 1, 1], [1.0, 2.0, 3.0])
        u, v, w = g.edges()
        self.assertEqual(list(zip(u.tolist(), v.tolist())), [(0, 1), (0, 3), (1, 2)])
        np.testing.assert_allclose(w, [3.0, 1.0, 2.0])
        np.testing.assert_allclose(g.degree, [4.0, 5.0, 2.0, 1.0])
        self.assertEqual(sorted(g.neighbors(0).tolist()), [1, 3])


class TestLaplacian(unittest.TestCase):
    def test_rows_sum_to_zero(self):
        L = laplacian(random_connected(12, seed=3))
        np.testing.assert_allclose(L.toarray().sum(axis=1), 0.0, atol=1e-12)

    def test_quadratic_form_on_path(self):
        L = laplacian(path_graph(3))
        self.assertAlmostEqual(quadratic_form(L, np.array([0.0, 1.0, 3.0])), 5.0)

    def test_smoothness_matches_trace(self):
        g = random_connected(10, seed=1)
        L = laplacian(g)
        X = np.random.default_rng(0).standard_normal((10, 3))
        self.assertAlmostEqual(smoothness(L, X), np.trace(X.T @ L.toarray() @ X), places=10)


class TestComponents(unittest.TestCase):
    def setUp(self):
        self.g = SparseGraph.from_edges(5, [0, 2], [1, 3])

    def test_components_ordered_by_min_id(self):
        components = connected_components(self.g)
        self.assertEqual([c.tolist() for c in components], [[0, 1], [2, 3], [4]])
        self.assertFalse(is_connected(self.g))
        self.assertTrue(is_connected(path_graph(4)))

    def test_largest_component_tie_goes_to_smallest_id(self):
        sub, remap = largest_component(self.g)
        self.assertEqual(sub.n_nodes, 2)
        self.assertEqual(remap, {0: 0, 1: 1})

    def test_empty_graph(self):
        with self.assertRaises(EmptyGraph):
            largest_component(SparseGraph.from_edges(0, [], []))

    def test_induced_subgraph_keeps_ids(self):
        sub = induced_subgraph(path_graph(5), [2, 3, 4])
        self.assertEqual(sub.n_edges, 2)
        self.assertEqual(sub.node_ids.tolist(), [2, 3, 4])


class TestEdgeListFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "graph.tsv")

    def tearDown(self):
        self.tmp.cleanup()

    def test_read_sparse_ids_and_default_weight(self):
        with open(self.path, "w") as fh:
            fh.write("# comment\n10\t20\t2.5\n20\t30\n")
        g = read_edgelist(self.path)
        self.assertEqual(g.node_ids.tolist(), [10, 20, 30])
        u, v, w = g.edges()
        np.testing.assert_allclose(w, [2.5, 1.0])

    def test_write_then_read_keeps_edges(self):
        g = read_edgelist(self._write("5\t7\t0.125\n7\t9\t3\n"))
        write_edgelist(g, self.path)
        again = read_edgelist(self.path)
        self.assertEqual(again.node_ids.tolist(), [5, 7, 9])
        np.testing.assert_allclose(again.edges()[2], g.edges()[2])

    def test_bad_ids(self):
        with self.assertRaises(FormatError):
            read_edgelist(self._write("a\tb\n"))
        with self.assertRaises(FormatError):
            read_edgelist(self._write("-1\t2\n"))

    def test_fractional_ids_are_rejected(self):
        with self.assertRaises(FormatError):
            read_edgelist(self._write("0\t1\n1.5\t2\n"))
        g = read_edgelist(self._write("0\t1.0\n1\t2\n"))
        self.assertEqual(g.node_ids.tolist(), [0, 1, 2])

    def _write(self, text):
        with open(self.path, "w") as fh:
            fh.write(text)
        return self.path


if __name__ == "__main__":
    unittest.main()
