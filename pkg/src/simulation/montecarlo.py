"""
Monte Carlo estimation of the per-agent LEQG cost

θ = 0: average over trials of the post-burn-in time-averaged cost.
θ ≠ 0: J = 2/(θT) · log mean_k exp(θ/2 · I_k) with I_k the integrated cost of
trial k over the whole window, evaluated with logsumexp.

Full-information ensembles with θ ≠ 0 are drawn under the worst-case
disturbance w* = θΓ'X_n x and reweighted by their likelihood ratios. With the
stabilizing X_n the reweighted exponent is θ/2·Tr((W_n + εZ_n)X_n)·T up to
boundary terms in x(0) and x(T).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from src.errors import EstimatorOverflow
from src.model.system import MultiAgentSystem
from src.simulation.simulator import Controller, EnsembleResult, SimConfig, simulate_ensemble
from src.synthesis.leqg import FullInfoController, Theta, as_theta
from src.utils.logger import setup_logger

logger = setup_logger("montecarlo")


@dataclass(frozen=True)
class CostReport:
    """Analytic trace-formula cost next to its simulated estimate"""
    analytic: Optional[float]
    mc_estimate: float
    std_error: float
    theta: float
    trials: int = 0

    def within(self, standard_errors: float) -> bool:
        """|mc_estimate - analytic| <= standard_errors · std_error"""
        if self.analytic is None:
            return False
        return abs(self.mc_estimate - self.analytic) <= standard_errors * self.std_error

    def to_dict(self) -> dict:
        return {"analytic": self.analytic, "mc_estimate": self.mc_estimate,
                "std_error": self.std_error, "theta": self.theta, "trials": self.trials}


def _sample_std(values: np.ndarray) -> float:
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1))


def risk_neutral_estimate(result: EnsembleResult):
    """Mean and standard error of the time-averaged cost"""
    averages = result.time_averaged_cost
    return float(np.mean(averages)), _sample_std(averages) / math.sqrt(averages.size)


def exponential_estimate(result: EnsembleResult, theta: float):
    """
    Log-mean-exp estimate and its delta-method standard error

    With a_k = θ/2·I_k + log L_k (L_k the trial's likelihood ratio, 1 for
    untilted ensembles) and w_k = exp(a_k - max a), the estimate is
    2/(θT)·(logsumexp(a) - log N) and its standard error
    2/(|θ|T) · sd(w) / (mean(w)·√N).
    """
    T = result.horizon
    exponents = 0.5 * theta * result.total_cost
    if result.log_likelihood_ratio is not None:
        exponents = exponents + result.log_likelihood_ratio
    if not np.all(np.isfinite(exponents)):
        raise EstimatorOverflow(max_exponent=float(np.nanmax(exponents)))
    N = exponents.size
    log_mean = logsumexp(exponents) - math.log(N)
    if not np.isfinite(log_mean):
        raise EstimatorOverflow(max_exponent=float(np.max(exponents)))
    estimate = 2.0 / (theta * T) * log_mean

    weights = np.exp(exponents - np.max(exponents))
    std_error = 2.0 / (abs(theta) * T) * _sample_std(weights) / (np.mean(weights) * math.sqrt(N))
    logger.debug(f"log-mean-exp: max exponent {np.max(exponents):.4g}, "
                 f"effective sample size {np.sum(weights) ** 2 / np.sum(weights ** 2):.1f}")
    return float(estimate), float(std_error)


def mc_cost(sys: MultiAgentSystem, controller: Controller, theta: Theta, cfg: SimConfig,
            x0: Optional[np.ndarray] = None, tilted: bool = True) -> CostReport:
    """
    Simulate cfg.trials trajectories and estimate the cost per agent

    Args:
        sys: assembled n-agent system
        controller: synthesized controller (closed loop must be stable)
        theta: risk parameter of the exponential criterion
        cfg: integration settings
        x0: fixed initial state; drawn per trial when omitted
        tilted: for θ ≠ 0 and a full-information controller, sample under
            the worst-case disturbance and reweight

    Returns:
        CostReport with the controller's analytic cost

    Raises:
        NumericalBlowup: a trajectory left the overflow guard
        EstimatorOverflow: the exponential criterion left floating range
    """
    theta = as_theta(theta)
    tilt = None
    if theta != 0 and tilted:
        if isinstance(controller, FullInfoController):
            tilt = theta * controller.X_n.X
        else:
            logger.debug("output-feedback ensemble: sampling without a tilt")
    result = simulate_ensemble(sys, controller, cfg, x0=x0, tilt=tilt)
    if theta == 0:
        estimate, std_error = risk_neutral_estimate(result)
    else:
        estimate, std_error = exponential_estimate(result, theta)

    analytic = getattr(controller, "cost_per_agent", None)
    logger.info(f"mc_cost n={sys.n} theta={theta:g} trials={cfg.trials}: "
                f"{estimate:.6g} ± {std_error:.2g} (analytic {analytic})")
    return CostReport(analytic=analytic, mc_estimate=estimate, std_error=std_error,
                      theta=theta, trials=cfg.trials)
