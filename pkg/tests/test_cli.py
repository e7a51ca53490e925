#!/usr/bin/env python

"""Tests for the `stabilipy` command line."""

import json
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
from click.testing import CliRunner

from stabilipy import cli
from stabilipy.formats import read_matrix
from stabilipy.manifold import load_manifold


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.runner = CliRunner()
        self.fs = self.runner.isolated_filesystem()
        self.fs.__enter__()
        self.invoke("gen", "--sizes", "20,20,20", "--p-in", "0.3", "--p-out", "0.03", "--n-features", "6",
                    "--seed", "1", "--out", "data")
        self.data = ["--graph", "data/graph.tsv", "--features", "data/features.csv", "--labels", "data/labels.txt"]

    def tearDown(self):
        self.fs.__exit__(None, None, None)

    def invoke(self, *args, code=0):
        result = self.runner.invoke(cli.main, list(args))
        self.assertEqual(result.exit_code, code, msg=result.output)
        return result

    def build_manifolds(self):
        self.invoke("manifold", *self.data, "--k", "10", "--knn", "5", "--out", "input.tsv")
        self.invoke("forward", *self.data, "--out", "outputs.sgmx")
        self.invoke("manifold", "--graph", "data/graph.tsv", "--outputs", "outputs.sgmx", "--labels",
                    "data/labels.txt", "--knn", "5", "--out", "output.tsv")

    def score(self, output_manifold, out, s="10"):
        self.invoke("score", "--input-manifold", "input.tsv", "--output-manifold", output_manifold,
                    "--s", s, "--fraction", "0.1", "--out", out)
        return json.loads(Path(out).read_text())

    def test_help_and_version(self):
        result = self.invoke("--help")
        self.assertIn("Stability analysis", result.output)
        self.assertIn("0.1.0", self.invoke("--version").output)

    def test_embed(self):
        self.invoke("embed", "--graph", "data/graph.tsv", "--labels", "data/labels.txt", "--k", "5",
                    "--correlation-pairs", "20", "--out", "embedding.sgmx")
        n = len(Path("data/labels.txt").read_text().split())
        self.assertEqual(read_matrix("embedding.sgmx").shape, (n, 5))
        report = json.loads(Path("embedding.sgmx.json").read_text())
        self.assertIn("suggested_k", report)
        self.assertIn("resistance_correlation", report)
        self.assertEqual(report["config"]["k"], 5)

    def test_score_is_deterministic(self):
        self.build_manifolds()
        first = self.score("output.tsv", "report1.json")
        self.score("output.tsv", "report2.json")
        self.assertEqual(Path("report1.json").read_bytes(), Path("report2.json").read_bytes())
        self.assertEqual(len(first["unstable"]), len(first["stable"]))
        self.assertGreater(first["lambda_max"], 0)

    def test_identical_manifolds_have_unit_distortion(self):
        self.invoke("manifold", *self.data, "--k", "10", "--knn", "5", "--out", "input.tsv")
        report = self.score("input.tsv", "report.json", s="5")
        self.assertAlmostEqual(report["lambda_max"], 1.0, places=6)

    def test_score_from_outputs(self):
        self.build_manifolds()
        self.invoke("score", "--input-manifold", "input.tsv", "--outputs", "outputs.sgmx", "--knn", "5",
                    "--s", "10", "--estimate-dmd", "--out", "report.json")
        report = json.loads(Path("report.json").read_text())
        self.assertEqual(report["dmd_max"]["mode"], "exhaustive")
        self.assertLessEqual(report["dmd_max"]["value"], report["lambda_max"] * (1 + 1e-6))

    def test_score_shapes_the_output_manifold(self):
        self.build_manifolds()
        self.invoke("score", "--input-manifold", "input.tsv", "--outputs", "outputs.sgmx", "--knn", "5",
                    "--clusters", "3", "--rho-threshold", "0.5", "--s", "5", "--out", "report.json")
        config = json.loads(Path("report.json").read_text())["config"]
        self.assertEqual(config["clusters"], 3)
        self.assertEqual(config["rho_threshold"], 0.5)
        self.invoke("score", "--input-manifold", "input.tsv", "--outputs", "outputs.sgmx", "--knn", "5",
                    "--diameter", "0.5", "--s", "5", "--out", "report2.json")
        self.assertEqual(json.loads(Path("report2.json").read_text())["config"]["diameter"], 0.5)

    def test_output_manifold_of_disconnected_graph(self):
        self.invoke("forward", *self.data, "--out", "outputs.csv")
        n = len(Path("data/labels.txt").read_text().split())
        Path("split.tsv").write_text(Path("data/graph.tsv").read_text() + "1000\t1001\n")
        Path("split.csv").write_text(Path("outputs.csv").read_text() + "0.5,0.25,0.25\n0.25,0.5,0.25\n")
        self.invoke("manifold", "--graph", "split.tsv", "--outputs", "split.csv", "--knn", "5", "--out", "output.tsv")
        m = load_manifold("output.tsv")
        self.assertEqual(m.n_nodes, n)
        self.assertNotIn(1000, m.graph.node_ids.tolist())

    def test_perturb_and_eval(self):
        self.build_manifolds()
        self.score("output.tsv", "report.json")
        self.invoke("perturb", *self.data, "--kind", "gaussian", "--level", "0.5", "--out", "noisy.csv")
        self.invoke("forward", "--graph", "data/graph.tsv", "--features", "noisy.csv", "--labels",
                    "data/labels.txt", "--out", "noisy.sgmx")
        self.invoke("eval", "--report", "report.json", "--clean", "outputs.sgmx", "--perturbed", "noisy.sgmx",
                    "--level", "0.5", "--fractions", "0.2,0.6,0.2", "--out", "table.csv")
        table = pd.read_csv("table.csv")
        self.assertEqual(table["segment"].tolist(), ["stable", "mid", "unstable"])
        self.assertTrue((table["level"] == 0.5).all())
        self.assertTrue(Path("table.csv.json").exists())

    def test_dice_perturbation(self):
        self.invoke("perturb", *self.data, "--kind", "dice", "--level", "5", "--out", "attacked.tsv")
        provenance = json.loads(Path("attacked.tsv.json").read_text())
        self.assertEqual(provenance["added"], 5)
        self.assertEqual(provenance["requested"], 5)

    def test_enhance(self):
        self.invoke("manifold", *self.data, "--k", "10", "--knn", "5", "--out", "input.tsv")
        self.invoke("enhance", "--graph", "data/graph.tsv", "--manifold", "input.tsv", "--out", "enhanced.tsv")
        provenance = json.loads(Path("enhanced.tsv.json").read_text())
        self.assertEqual(provenance["inserted"], len(load_manifold("input.tsv").inter_edges))

    def test_experiment(self):
        Path("run.cfg").write_text("k = 10\ns = 10\nknn = 5\nfraction = 0.1\n")
        self.invoke("experiment", *self.data, "--levels", "0.0,1.0", "--config", "run.cfg", "--out", "sep.csv")
        table = pd.read_csv("sep.csv")
        self.assertEqual(len(table), 6)
        zero = table[table["level"] == 0.0]
        np.testing.assert_allclose(zero["mean_cos"], 1.0)

    def test_validation_errors_exit_2(self):
        self.invoke("score", "--input-manifold", "missing.tsv", "--outputs", "missing.sgmx", "--out", "r.json",
                    code=2)
        Path("bad.cfg").write_text("magic = 1\n")
        self.invoke("forward", *self.data, "--config", "bad.cfg", "--out", "y.sgmx", code=2)
        self.invoke("manifold", *self.data, "--k", "10", "--knn", "5", "--out", "input.tsv")
        self.invoke("score", "--input-manifold", "input.tsv", "--out", "r.json", code=2)
        Path("short.csv").write_text("0.5,0.5\n")
        self.invoke("score", "--input-manifold", "input.tsv", "--outputs", "short.csv", "--out", "r.json", code=2)

    def test_selftest(self):
        result = self.invoke("selftest")
        self.assertNotIn("FAIL", result.output)


if __name__ == "__main__":
    unittest.main()
