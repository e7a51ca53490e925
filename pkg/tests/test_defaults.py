#!/usr/bin/env python

"""Tests for `stabilipy.defaults`."""

import os
import tempfile
import unittest

from stabilipy.defaults import DEFAULTS, read_config, resolve_config, rng
from stabilipy.exceptions import ConfigError


class TestConfig(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "run.cfg")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.path, "w") as fh:
            fh.write(text)

    def test_read_and_coerce(self):
        self.write("# run settings\n\nk = 20\nrho-threshold=0.8\ndiameter = 1.5\nclusters=none\noracle_cap=1e3\n")
        values = read_config(self.path)
        self.assertEqual(values, {"k": 20, "rho_threshold": 0.8, "diameter": 1.5, "clusters": None, "oracle_cap": 1000})
        self.assertIsInstance(values["k"], int)

    def test_unknown_key(self):
        self.write("k=20\nmagic=1\n")
        with self.assertRaises(ConfigError) as ctx:
            read_config(self.path)
        self.assertIn(":2:", str(ctx.exception))

    def test_bad_line_and_value(self):
        self.write("k 20\n")
        with self.assertRaises(ConfigError):
            read_config(self.path)
        self.write("k=twenty\n")
        with self.assertRaises(ConfigError):
            read_config(self.path)

    def test_precedence(self):
        config = resolve_config({"k": 20, "seed": 3}, {"k": 30, "seed": None})
        self.assertEqual(config["k"], 30)
        self.assertEqual(config["seed"], 3)
        self.assertEqual(config["s"], DEFAULTS["s"])
        with self.assertRaises(ConfigError):
            resolve_config(None, {"nope": 1})

    def test_defaults(self):
        self.assertEqual(DEFAULTS["k"], 50)
        self.assertEqual(DEFAULTS["knn"], 10)
        self.assertEqual(DEFAULTS["fraction"], 0.01)
        self.assertEqual(DEFAULTS["oracle_cap"], 2000)


class TestRandomStreams(unittest.TestCase):
    def test_streams_are_reproducible_and_independent(self):
        self.assertEqual(rng(5, "knn").random(3).tolist(), rng(5, "knn").random(3).tolist())
        self.assertNotEqual(rng(5, "knn").random(3).tolist(), rng(5, "model").random(3).tolist())
        self.assertNotEqual(rng(5, "knn").random(3).tolist(), rng(6, "knn").random(3).tolist())

    def test_unknown_stream(self):
        with self.assertRaises(ConfigError):
            rng(0, "weather")


if __name__ == "__main__":
    unittest.main()
