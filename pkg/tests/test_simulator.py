#!/usr/bin/env python3
"""
Simulator Tests
Determinism, noise handling, filter behaviour and closed-loop trajectory shapes
"""

import dataclasses
import os
import sys
import unittest
import warnings

import numpy as np
from numpy.testing import assert_allclose

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError, NumericalBlowup, SigmaExceedsYWarning
from src.model.system import assemble, basic_example
from src.simulation.simulator import (SimConfig, estimation_error_covariance, simulate,
                                      simulate_ensemble)
from src.synthesis.leqg import (default_initial_condition, full_info_synthesis,
                                output_feedback_synthesis)


def full_info(n=1, theta=0.0, epsilon=0.0, d=1):
    sys_ = assemble(basic_example(d=d, epsilon=epsilon), n)
    return sys_, full_info_synthesis(sys_, theta)


def crosses_zero(states: np.ndarray) -> bool:
    return bool(np.any(states[1:] * states[:-1] < 0))


class TestSimConfig(unittest.TestCase):
    """Test SimConfig validation and derived values"""

    def test_defaults(self):
        cfg = SimConfig()
        self.assertEqual(cfg.steps, 10000)
        self.assertAlmostEqual(cfg.burn_in_time, 1.0)
        self.assertEqual(cfg.burn_in_steps, 1000)
        self.assertAlmostEqual(SimConfig(horizon=500.0).burn_in_time, 10.0)

    def test_invalid_values(self):
        for kwargs, field in (({"dt": 0.0}, "sim.dt"), ({"horizon": 1e-4}, "sim.horizon"),
                              ({"trials": 0}, "sim.trials"), ({"seed": -1}, "sim.seed"),
                              ({"evader_mode": "hidden"}, "sim.evader_mode"),
                              ({"burn_in": -1.0}, "sim.burn_in")):
            with self.assertRaises(ConfigError) as ctx:
                SimConfig(**kwargs)
            self.assertEqual(ctx.exception.field, field)

    def test_burn_in_beyond_horizon_is_clipped(self):
        with self.assertLogs("risktrack.simulator", level="WARNING"):
            cfg = SimConfig(horizon=2.0, burn_in=3.0)
        self.assertAlmostEqual(cfg.burn_in_time, 0.2)


class TestDeterminism(unittest.TestCase):
    """Test seeding and batch independence"""

    def setUp(self):
        self.sys, self.controller = full_info(n=2, epsilon=0.1)
        self.cfg = SimConfig(dt=1e-2, horizon=5.0)

    def test_same_seed_same_path(self):
        first = simulate(self.sys, self.controller, self.cfg)
        second = simulate(self.sys, self.controller, self.cfg)
        self.assertTrue(np.array_equal(first.x, second.x))
        self.assertTrue(np.array_equal(first.running_cost, second.running_cost))

    def test_different_seed_different_path(self):
        first = simulate(self.sys, self.controller, self.cfg)
        other = simulate(self.sys, self.controller, self.cfg.replace(seed=1))
        self.assertFalse(np.allclose(first.x, other.x))

    def test_batch_size_does_not_change_trials(self):
        cfg = self.cfg.replace(trials=8)
        whole = simulate_ensemble(self.sys, self.controller, cfg.replace(batch_size=8))
        split = simulate_ensemble(self.sys, self.controller, cfg.replace(batch_size=3))
        assert_allclose(whole.total_cost, split.total_cost, rtol=1e-12)
        single = simulate(self.sys, self.controller, self.cfg, trial=5)
        assert_allclose(whole.total_cost[5], single.total_cost, rtol=1e-12)
        self.assertIsNone(whole.log_likelihood_ratio)


class TestTiltedSampling(unittest.TestCase):
    """Test ensembles drawn under a tilted noise measure"""

    def test_likelihood_ratios_average_to_one(self):
        sys_, controller = full_info(theta=0.5)
        cfg = SimConfig(dt=1e-2, horizon=1.0, trials=2000, seed=6)
        result = simulate_ensemble(sys_, controller, cfg, x0=np.zeros(1),
                                   tilt=0.5 * controller.X_n.X)
        self.assertEqual(result.log_likelihood_ratio.shape, (2000,))
        self.assertAlmostEqual(float(np.mean(np.exp(result.log_likelihood_ratio))), 1.0,
                               delta=0.05)

    def test_tilt_pushes_states_outward(self):
        sys_, controller = full_info(theta=0.5)
        cfg = SimConfig(dt=1e-2, horizon=20.0, trials=200, seed=6)
        plain = simulate_ensemble(sys_, controller, cfg, x0=np.zeros(1))
        tilted = simulate_ensemble(sys_, controller, cfg, x0=np.zeros(1),
                                   tilt=0.5 * controller.X_n.X)
        self.assertGreater(np.mean(tilted.settled_cost), np.mean(plain.settled_cost))

    def test_tilted_trials_do_not_depend_on_batching(self):
        sys_, controller = full_info(n=2, theta=0.3, epsilon=0.1)
        cfg = SimConfig(dt=1e-2, horizon=2.0, trials=6)
        tilt = 0.3 * controller.X_n.X
        whole = simulate_ensemble(sys_, controller, cfg, tilt=tilt)
        split = simulate_ensemble(sys_, controller, cfg.replace(batch_size=4), tilt=tilt)
        assert_allclose(whole.log_likelihood_ratio, split.log_likelihood_ratio, rtol=1e-12)


class TestNoiselessDynamics(unittest.TestCase):
    """Test deterministic closed loops"""

    def test_equilibrium_stays_at_origin(self):
        sys_, controller = full_info(n=3)
        cfg = SimConfig(dt=1e-2, horizon=2.0, evader_mode="frozen")
        trajectory = simulate(sys_, controller, cfg, x0=np.zeros(3))
        self.assertTrue(np.all(trajectory.x == 0))
        self.assertEqual(trajectory.total_cost, 0.0)

    def test_output_feedback_equilibrium(self):
        sys_ = assemble(basic_example(), 1)
        controller = output_feedback_synthesis(sys_, 0.0)
        cfg = SimConfig(dt=1e-2, horizon=2.0, evader_mode="frozen", measurement_noise=False)
        trajectory = simulate(sys_, controller, cfg, x0=np.zeros(1))
        self.assertTrue(np.all(trajectory.x == 0))
        self.assertTrue(np.all(trajectory.x_hat == 0))

    def test_sampling_grid(self):
        sys_, controller = full_info()
        trajectory = simulate(sys_, controller, SimConfig(horizon=1.0), x0=np.ones(1))
        self.assertEqual(len(trajectory), 101)
        self.assertAlmostEqual(trajectory.times[-1], 1.0)
        self.assertTrue(np.all(np.diff(trajectory.running_cost) >= 0))

    def test_exponential_decay(self):
        sys_, controller = full_info()
        cfg = SimConfig(dt=1e-3, horizon=2.0, evader_mode="frozen")
        trajectory = simulate(sys_, controller, cfg, x0=np.ones(1))
        # Euler factor (1 - dt)^k for u = -x
        expected = (1 - cfg.dt) ** np.round(trajectory.times / cfg.dt)
        assert_allclose(trajectory.x[:, 0], expected, rtol=1e-10)

    def test_unstable_loop_blows_up(self):
        sys_, controller = full_info()
        unstable = dataclasses.replace(controller, K=np.array([[-5.0]]))
        cfg = SimConfig(dt=1e-3, horizon=10.0, evader_mode="frozen")
        with self.assertRaises(NumericalBlowup) as ctx:
            simulate(sys_, unstable, cfg, x0=np.ones(1))
        self.assertGreater(ctx.exception.t, 3.0)
        self.assertLess(ctx.exception.t, 4.5)
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_wrong_initial_state_size(self):
        sys_, controller = full_info(n=2)
        with self.assertRaises(ValueError):
            simulate(sys_, controller, SimConfig(horizon=0.1), x0=np.zeros(3))


class TestRiskAttitudeTrajectories(unittest.TestCase):
    """Test the qualitative shapes of frozen-evader trajectories"""

    def run_attitude(self, theta):
        sys_, controller = full_info(n=4, theta=theta)
        cfg = SimConfig(dt=1e-3, horizon=10.0, evader_mode="frozen")
        x0 = default_initial_condition(sys_).x_bar_0
        trajectory = simulate(sys_, controller, cfg, x0=x0)
        return [trajectory.agent_states(i)[:, 0] for i in range(4)]

    def test_risk_neutral_decouples(self):
        for agent, states in enumerate(self.run_attitude(0.0)):
            self.assertFalse(crosses_zero(states))
            self.assertTrue(np.all(np.diff(states) < 0))
            self.assertAlmostEqual(states[0], 1.0 + 2.0 * agent / 3.0)

    def test_risk_averse_overshoots(self):
        agents = self.run_attitude(0.8)
        self.assertTrue(any(crosses_zero(states) for states in agents))
        self.assertTrue(crosses_zero(agents[0]))

    def test_risk_seeking_does_not_overshoot(self):
        for states in self.run_attitude(-0.8):
            self.assertFalse(crosses_zero(states))
            self.assertTrue(np.all(states > 0))


class TestFilter(unittest.TestCase):
    """Test the risk-sensitive filter in simulation"""

    def test_error_covariance_matches_riccati(self):
        sys_ = assemble(basic_example(), 1)
        controller = output_feedback_synthesis(sys_, 0.0)
        cfg = SimConfig(dt=1e-2, horizon=100.0, record_every=5)
        trajectories = [simulate(sys_, controller, cfg, trial=k) for k in range(40)]
        covariance = estimation_error_covariance(trajectories, burn_in=5.0)
        self.assertAlmostEqual(covariance[0, 0], controller.Y_n.X[0, 0], delta=0.1)

    def test_x_tilde_recursion_tracks_scaled_estimate(self):
        sys_ = assemble(basic_example(epsilon=0.05), 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SigmaExceedsYWarning)
            controller = output_feedback_synthesis(sys_, 0.3)
        cfg = SimConfig(dt=1e-3, horizon=2.0, track_x_tilde=True)
        trajectory = simulate(sys_, controller, cfg)
        assert_allclose(trajectory.x_tilde, trajectory.x_hat @ controller.M_inv.T,
                        rtol=1e-8, atol=1e-8)

    def test_covariance_requires_estimates(self):
        sys_, controller = full_info()
        trajectory = simulate(sys_, controller, SimConfig(horizon=0.1))
        with self.assertRaises(ValueError):
            estimation_error_covariance([trajectory])


if __name__ == "__main__":
    unittest.main(verbosity=2)
