#!/usr/bin/env python3
"""
Configuration Tests
YAML parsing, validation errors with field and line, canonical rendering
"""

import os
import sys
import tempfile
import textwrap
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError
from src.model.system import SystemSpec, basic_example
from src.simulation.simulator import SimConfig
from src.utils.config import (CONFIG_ENV, DEFAULT_CONFIG, ExperimentConfig, SweepConfig,
                              config_hash, find_config_path, load_config, parse_config,
                              render_config)

BAD_R = textwrap.dedent("""\
    system:
      A: [[0.0]]
      B: [[1.0]]
      C: [[1.0]]
      F: [[1.0]]
      G: [[1.0]]
      H: [[1.0]]
      Q: [[1.0]]
      R: [[-1.0]]
    """)


class TestLoading(unittest.TestCase):
    """Test the shipped config and file lookup"""

    def test_default_config(self):
        config = load_config(str(DEFAULT_CONFIG))
        self.assertEqual(config.system, basic_example(epsilon=0.1))
        self.assertEqual(config.sweep.n, tuple(range(1, 9)))
        self.assertEqual(config.sweep.theta, (0.0, 0.97))
        self.assertEqual(config.sim.evader_mode, "model")
        self.assertIsNone(config.sim.burn_in)
        self.assertEqual(config.trajectories.evader_mode, "frozen")
        self.assertEqual(config.trajectories.epsilon, 0.0)

    def test_environment_override(self):
        with patch.dict(os.environ, {CONFIG_ENV: "/tmp/other.yaml"}):
            self.assertEqual(find_config_path(), Path("/tmp/other.yaml"))
            self.assertEqual(find_config_path("given.yaml"), Path("given.yaml"))
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(find_config_path(), DEFAULT_CONFIG)

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigError) as ctx:
                load_config(os.path.join(tmp, "absent.yaml"))
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_empty_document_uses_defaults(self):
        self.assertEqual(parse_config(""), ExperimentConfig())


class TestRoundTrip(unittest.TestCase):
    """Test parse_config(render_config(c)) == c"""

    def test_default_round_trip(self):
        config = ExperimentConfig()
        self.assertEqual(parse_config(render_config(config)), config)

    def test_custom_round_trip(self):
        spec = SystemSpec(A=np.array([[0.0, 1.0], [-2.0, -0.5]]), B=np.array([[0.0], [1.0]]),
                          C=np.array([[1.0, 0.0]]), F=np.eye(2), G=0.5 * np.eye(2),
                          H=np.array([[0.2]]), Q=np.diag([1.0, 0.1]), R=np.array([[2.0]]),
                          epsilon=1e-8)
        config = ExperimentConfig(
            system=spec,
            sweep=SweepConfig(n=(1, 2, 16), theta=(-0.5, 0.0, 0.5), epsilon=(0.0, 1e-6),
                              modes=("perfect", "imperfect"), monte_carlo=True,
                              solver="dense", workers=2, tolerance=1e-8),
            sim=SimConfig(dt=0.01, horizon=50.0, trials=200, seed=7, burn_in=5.0,
                          evader_mode="frozen", measurement_noise=False),
        )
        self.assertEqual(parse_config(render_config(config)), config)

    def test_hash_tracks_content(self):
        config = ExperimentConfig()
        self.assertEqual(config_hash(config), config_hash(parse_config(render_config(config))))
        reseeded = config.replace(sim=config.sim.replace(seed=1))
        self.assertNotEqual(config_hash(config), config_hash(reseeded))
        self.assertEqual(len(config_hash(config)), 64)


class TestValidation(unittest.TestCase):
    """Test that errors name the field and the line"""

    def test_R_not_positive_definite(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(BAD_R)
        self.assertEqual(ctx.exception.field, "system.R")
        self.assertEqual(ctx.exception.line, 9)
        self.assertIn("positive definite", str(ctx.exception))

    def test_malformed_yaml(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("sim:\n  dt: 0.01\n  horizon: [1, 2\n")
        self.assertIsNotNone(ctx.exception.line)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("sim:\n  dt: 0.01\n  speed: 3\n")
        self.assertEqual(ctx.exception.field, "sim.speed")
        self.assertEqual(ctx.exception.line, 3)
        with self.assertRaises(ConfigError) as ctx:
            parse_config("colour: blue\n")
        self.assertEqual(ctx.exception.field, "colour")

    def test_bad_values(self):
        cases = {
            "sim:\n  dt: -0.1\n": "sim.dt",
            "sim:\n  trials: 2.5\n": "sim.trials",
            "sim:\n  measurement_noise: 1\n": "sim.measurement_noise",
            "sweep:\n  modes: [sideways]\n": "sweep.modes[0]",
            "sweep:\n  n: [0, 1]\n": "sweep.n",
            "sweep:\n  solver: magic\n": "sweep.solver",
            "system:\n  preset: basic\n  epsilon: -1.0\n": "system.epsilon",
            "output:\n  format: xml\n": "output.format",
            "trajectories:\n  fraction: 1.5\n": "trajectories.fraction",
            "trajectories:\n  epsilon: -0.1\n": "trajectories.epsilon",
        }
        for text, field in cases.items():
            with self.assertRaises(ConfigError, msg=text) as ctx:
                parse_config(text)
            self.assertEqual(ctx.exception.field, field, msg=text)

    def test_preset_with_dimension(self):
        config = parse_config("system:\n  preset: basic\n  d: 3\n  epsilon: 0.5\n")
        self.assertEqual(config.system, basic_example(d=3, epsilon=0.5))

    def test_n_range(self):
        config = parse_config("sweep:\n  n: {min: 2, max: 5}\n")
        self.assertEqual(config.sweep.n, (2, 3, 4, 5))

    def test_burn_in_clipped(self):
        config = parse_config("sim:\n  horizon: 5.0\n  burn_in: 8.0\n")
        self.assertAlmostEqual(config.sim.burn_in_time, 0.5)


if __name__ == "__main__":
    unittest.main(verbosity=2)
