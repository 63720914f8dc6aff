#!/usr/bin/env python3
"""
Monte Carlo Cost Tests
Simulated LEQG costs against the trace formulas
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy.special import logsumexp

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import EstimatorOverflow
from src.model.system import assemble, basic_example
from src.simulation.montecarlo import (CostReport, exponential_estimate, mc_cost,
                                       risk_neutral_estimate)
from src.simulation.simulator import EnsembleResult, SimConfig, simulate
from src.synthesis.leqg import full_info_synthesis


def basic_controller(theta, n=1):
    sys_ = assemble(basic_example(), n)
    return sys_, full_info_synthesis(sys_, theta)


class TestEstimators(unittest.TestCase):
    """Test the estimators on hand-built ensembles"""

    def ensemble(self, total, settled=None, horizon=1.0, burn_in=0.0):
        total = np.asarray(total, dtype=float)
        return EnsembleResult(trials=np.arange(total.size), total_cost=total,
                              settled_cost=total if settled is None else np.asarray(settled),
                              horizon=horizon, burn_in=burn_in)

    def test_risk_neutral(self):
        result = self.ensemble([10.0, 12.0, 14.0], settled=[8.0, 9.0, 10.0],
                               horizon=10.0, burn_in=2.0)
        estimate, std_error = risk_neutral_estimate(result)
        self.assertAlmostEqual(estimate, 9.0 / 8.0)
        self.assertAlmostEqual(std_error, np.std([1.0, 9 / 8, 10 / 8], ddof=1) / math.sqrt(3))

    def test_single_trial_has_no_error_bar(self):
        _, std_error = risk_neutral_estimate(self.ensemble([1.0]))
        self.assertTrue(math.isnan(std_error))

    def test_log_mean_exp(self):
        result = self.ensemble([1.0, 2.0, 3.0], horizon=1.0)
        estimate, _ = exponential_estimate(result, 2.0)
        expected = (logsumexp([1.0, 2.0, 3.0]) - math.log(3)) / 1.0
        self.assertAlmostEqual(estimate, expected, places=12)
        self.assertAlmostEqual(estimate, math.log(np.mean(np.exp([1.0, 2.0, 3.0]))), places=12)

    def test_large_exponents_stay_finite(self):
        result = self.ensemble([2000.0, 2001.0], horizon=100.0)
        estimate, std_error = exponential_estimate(result, 1.0)
        self.assertTrue(np.isfinite(estimate))
        self.assertTrue(np.isfinite(std_error))

    def test_likelihood_ratios_enter_the_exponent(self):
        result = EnsembleResult(trials=np.arange(3), total_cost=np.array([2.0, 4.0, 6.0]),
                                settled_cost=np.array([2.0, 4.0, 6.0]), horizon=1.0,
                                burn_in=0.0, log_likelihood_ratio=np.array([-1.0, -2.0, -3.0]))
        estimate, std_error = exponential_estimate(result, 1.0)
        self.assertAlmostEqual(estimate, 0.0, places=12)
        self.assertAlmostEqual(std_error, 0.0, places=12)

    def test_overflow(self):
        with self.assertRaises(EstimatorOverflow):
            exponential_estimate(self.ensemble([1.0, np.inf]), 1.0)

    def test_report_within(self):
        report = CostReport(analytic=1.0, mc_estimate=1.02, std_error=0.01, theta=0.0)
        self.assertTrue(report.within(3))
        self.assertFalse(report.within(1))
        self.assertFalse(CostReport(None, 1.0, 0.1, 0.0).within(3))


class TestNoiselessEnsembles(unittest.TestCase):
    """Test that deterministic runs reproduce the single-trajectory cost"""

    def test_zero_noise_risk_neutral(self):
        sys_, controller = basic_controller(0.0)
        cfg = SimConfig(dt=1e-3, horizon=10.0, trials=4, evader_mode="frozen")
        report = mc_cost(sys_, controller, 0.0, cfg, x0=np.ones(1))
        trajectory = simulate(sys_, controller, cfg, x0=np.ones(1))
        burn_in_index = int(np.flatnonzero(np.isclose(trajectory.times, 1.0))[0])
        settled = trajectory.total_cost - trajectory.running_cost[burn_in_index]
        self.assertAlmostEqual(report.mc_estimate, settled / 9.0, places=10)
        self.assertAlmostEqual(report.std_error, 0.0, places=12)

    def test_zero_noise_exponential(self):
        sys_, controller = basic_controller(0.5)
        cfg = SimConfig(dt=1e-3, horizon=10.0, trials=3, evader_mode="frozen")
        report = mc_cost(sys_, controller, 0.5, cfg, x0=np.ones(1))
        trajectory = simulate(sys_, controller, cfg, x0=np.ones(1))
        self.assertAlmostEqual(report.mc_estimate, trajectory.total_cost / 10.0, places=10)
        self.assertAlmostEqual(report.analytic, math.sqrt(2.0), places=8)


class TestAgainstAnalytic(unittest.TestCase):
    """Test simulated costs against J*(θ, 1) for the basic example"""

    def test_risk_neutral_cost(self):
        sys_, controller = basic_controller(0.0)
        cfg = SimConfig(dt=1e-3, horizon=100.0, trials=200, seed=3)
        report = mc_cost(sys_, controller, 0.0, cfg)
        self.assertAlmostEqual(report.analytic, 1.0, places=8)
        self.assertTrue(report.within(3), msg=str(report.to_dict()))
        self.assertAlmostEqual(report.mc_estimate, 1.0, delta=0.05)

    def test_risk_averse_cost(self):
        sys_, controller = basic_controller(0.5)
        cfg = SimConfig(dt=1e-3, horizon=200.0, trials=2000, seed=11)
        report = mc_cost(sys_, controller, 0.5, cfg, x0=np.zeros(1))
        self.assertAlmostEqual(report.mc_estimate, math.sqrt(2.0), delta=0.03 * math.sqrt(2.0),
                               msg=str(report.to_dict()))
        self.assertLess(report.std_error, 0.01)
        self.assertEqual(report.trials, 2000)

    def test_risk_seeking_cost(self):
        sys_, controller = basic_controller(-0.5)
        self.assertAlmostEqual(controller.cost_per_agent, 1.0 / math.sqrt(1.5), places=8)
        cfg = SimConfig(dt=1e-3, horizon=50.0, trials=200, seed=4)
        report = mc_cost(sys_, controller, -0.5, cfg, x0=np.zeros(1))
        self.assertAlmostEqual(report.mc_estimate, report.analytic, delta=0.03 * report.analytic,
                               msg=str(report.to_dict()))

    def test_step_size_convergence(self):
        sys_, controller = basic_controller(0.0)
        coarse = mc_cost(sys_, controller, 0.0, SimConfig(dt=1e-2, horizon=50.0, trials=40))
        fine = mc_cost(sys_, controller, 0.0, SimConfig(dt=5e-3, horizon=50.0, trials=40))
        combined = math.hypot(coarse.std_error, fine.std_error)
        self.assertLess(abs(coarse.mc_estimate - fine.mc_estimate), 3 * combined)


if __name__ == "__main__":
    unittest.main(verbosity=2)
