"""
RiskTrack experiment commands
synth, sweep-n, theta-star and trajectories, each writing its results and a
run manifest through ResultWriter
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from src.errors import AssumptionViolated, RiskTrackError, ThetaAboveCritical
from src.experiments.output import ResultWriter
from src.model.system import SystemSpec, assemble
from src.simulation.montecarlo import mc_cost
from src.simulation.simulator import simulate
from src.synthesis.leqg import (default_initial_condition, full_info_synthesis,
                                output_feedback_synthesis, theta_star_full, theta_star_output)
from src.synthesis.structured import (lqg_structured_X, rs_structured_X, structured_output_cost,
                                      theta_star_structured)
from src.utils.config import ExperimentConfig
from src.utils.logger import setup_logger

logger = setup_logger("commands")

SWEEP_COLUMNS = ("n", "theta", "epsilon", "mode", "analytic_cost", "mc_cost", "mc_stderr", "status")
THETA_STAR_COLUMNS = ("n", "theta_star", "theta_I_star")
TRAJECTORY_COLUMNS = ("t", "agent", "dim", "x", "u")

TRAJECTORY_MODES = ("risk_averse", "risk_neutral", "risk_seeking")

# Largest ε for which the ε→0 output-feedback closed form stands in for the dense solve
STRUCTURED_EPSILON_LIMIT = 1e-6


@dataclass(frozen=True)
class SweepRow:
    """One (n, θ, ε, mode) point; above_critical rows carry no analytic cost"""
    n: int
    theta: float
    epsilon: float
    mode: str
    analytic_cost: Optional[float] = None
    mc_cost: Optional[float] = None
    mc_stderr: Optional[float] = None
    status: str = "ok"
    message: str = ""

    @property
    def sort_key(self):
        return (self.n, self.theta, self.epsilon, self.mode)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _writer(config: ExperimentConfig, command: str, arguments: Dict[str, Any],
            run_name: Optional[str] = None) -> ResultWriter:
    return ResultWriter(config.output.directory, config.output.format, config, command, arguments,
                        run_name=run_name)


def _synthesize(spec: SystemSpec, n: int, theta: float, mode: str):
    sys = assemble(spec, n)
    if mode == "perfect":
        return sys, full_info_synthesis(sys, theta)
    return sys, output_feedback_synthesis(sys, theta)


def _critical_value(spec: SystemSpec, n: int, mode: str, tol: float) -> Optional[float]:
    sys = assemble(spec, n)
    try:
        return theta_star_full(sys, tol) if mode == "perfect" else theta_star_output(sys, tol)
    except RiskTrackError as e:
        logger.warning(f"critical value for n={n} unavailable: {e}")
        return None


def cmd_synth(config: ExperimentConfig, n: int, theta: float,
              mode: str = "perfect") -> Dict[str, Any]:
    """
    Synthesize one controller and write synth.json

    Returns:
        The written summary (gains, Riccati solutions, costs, diagnostics)

    Raises:
        ThetaAboveCritical: carrying the bisected critical value θ*(n) or θ_I*(n)
    """
    spec = config.system
    try:
        sys, controller = _synthesize(spec, n, theta, mode)
    except ThetaAboveCritical as e:
        critical = _critical_value(spec, n, mode, config.sweep.tolerance)
        raise ThetaAboveCritical(theta, n=n, critical=critical, reason=e.reason) from None

    summary: Dict[str, Any] = {
        "n": n, "theta": controller.theta, "epsilon": spec.epsilon, "mode": mode,
        "X": controller.X_n.X, "cost_per_agent": controller.cost_per_agent,
        "diagnostics": {"X": controller.X_n.diagnostics()},
    }
    if mode == "perfect":
        summary["K"] = controller.K
        summary["closed_loop_eigenvalues"] = np.sort(np.real(np.linalg.eigvals(controller.closed_loop)))
    else:
        summary.update({
            "Y": controller.Y_n.X, "gain": controller.gain, "M_inv": controller.M_inv,
            "filter_A": controller.filter_A, "filter_L": controller.filter_L,
            "sigma_exceeds_y": controller.sigma_exceeds_y,
        })
        summary["diagnostics"]["Y"] = controller.Y_n.diagnostics()

    writer = _writer(config, "synth", {"n": n, "theta": theta, "measurement": mode})
    writer.write_document("synth.json", summary)
    writer.write_manifest()
    return summary


def _structured_applicable(spec: SystemSpec, theta: float, mode: str) -> bool:
    if mode == "perfect":
        return theta == 0 or spec.epsilon == 0
    return not np.any(spec.A) and spec.epsilon <= STRUCTURED_EPSILON_LIMIT


def _structured_cost(spec: SystemSpec, n: int, theta: float, mode: str) -> float:
    if mode == "imperfect":
        return structured_output_cost(spec, n, theta)
    if theta == 0:
        return lqg_structured_X(spec, n).cost_per_agent
    return rs_structured_X(spec, n, theta).cost_per_agent


def evaluate_row(config: ExperimentConfig, n: int, theta: float, epsilon: float,
                 mode: str) -> SweepRow:
    """Analytic (and optionally Monte Carlo) cost per agent of one sweep point"""
    spec = config.system.with_epsilon(epsilon)
    solver = config.sweep.solver
    row = dict(n=n, theta=theta, epsilon=epsilon, mode=mode)
    controller = None
    try:
        use_structured = solver == "structured" or (
            solver == "auto" and _structured_applicable(spec, theta, mode))
        if use_structured:
            if not _structured_applicable(spec, theta, mode):
                raise AssumptionViolated(f"closed form does not apply to {mode} mode "
                                         f"at theta={theta:g}, epsilon={epsilon:g}")
            analytic = _structured_cost(spec, n, theta, mode)
        else:
            sys, controller = _synthesize(spec, n, theta, mode)
            analytic = controller.cost_per_agent
    except ThetaAboveCritical as e:
        logger.info(f"n={n} theta={theta:g} eps={epsilon:g} {mode}: above critical")
        return SweepRow(**row, status="above_critical", message=str(e))
    except RiskTrackError as e:
        logger.warning(f"n={n} theta={theta:g} eps={epsilon:g} {mode}: {e}")
        return SweepRow(**row, status="error", message=str(e))

    if not config.sweep.monte_carlo:
        return SweepRow(**row, analytic_cost=analytic)
    try:
        if controller is None:
            sys, controller = _synthesize(spec, n, theta, mode)
        report = mc_cost(sys, controller, theta, config.sim)
    except RiskTrackError as e:
        logger.warning(f"n={n} theta={theta:g} eps={epsilon:g} {mode}: Monte Carlo failed: {e}")
        return SweepRow(**row, analytic_cost=analytic, status="error", message=str(e))
    return SweepRow(**row, analytic_cost=analytic, mc_cost=report.mc_estimate,
                    mc_stderr=report.std_error)


def cmd_sweep_n(config: ExperimentConfig) -> List[SweepRow]:
    """
    Cost per agent over the sweep grid, one row per (n, θ, ε, mode)

    Rows run in a thread pool; failures are recorded in the row status and
    the sweep continues. Rows are written sorted by (n, θ, ε, mode).
    """
    sweep = config.sweep
    grid = list(itertools.product(sweep.n, sweep.theta, sweep.epsilon, sweep.modes))
    logger.info(f"sweep-n: {len(grid)} rows on {sweep.workers} workers")
    with ThreadPoolExecutor(max_workers=sweep.workers) as pool:
        rows = list(pool.map(lambda point: evaluate_row(config, *point), grid))
    rows.sort(key=lambda row: row.sort_key)

    writer = _writer(config, "sweep-n", {"solver": sweep.solver,
                                         "monte_carlo": sweep.monte_carlo})
    writer.write_table("sweep_n", SWEEP_COLUMNS, (row.to_dict() for row in rows))
    writer.write_manifest()
    return rows


def _theta_star_row(config: ExperimentConfig, n: int) -> Dict[str, Any]:
    spec = config.system
    tol = config.sweep.tolerance
    row: Dict[str, Any] = {"n": n, "theta_star": None, "theta_I_star": None}
    row["theta_star"] = _critical_value(spec, n, "perfect", tol)
    if config.sweep.solver == "structured":
        try:
            row["theta_I_star"] = theta_star_structured(spec, n, tol)
        except RiskTrackError as e:
            logger.warning(f"structured theta_I* for n={n} unavailable: {e}")
    else:
        row["theta_I_star"] = _critical_value(spec, n, "imperfect", tol)
    return row


def cmd_theta_star(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """θ*(n) and θ_I*(n) over sweep.n at the system's ε"""
    with ThreadPoolExecutor(max_workers=config.sweep.workers) as pool:
        rows = list(pool.map(lambda n: _theta_star_row(config, n), sorted(set(config.sweep.n))))

    writer = _writer(config, "theta-star", {"epsilon": config.system.epsilon,
                                            "solver": config.sweep.solver})
    writer.write_table("theta_star", THETA_STAR_COLUMNS, rows)
    writer.write_manifest()
    return rows


def trajectory_system(config: ExperimentConfig) -> SystemSpec:
    """The configured system with the trajectory runs' pursuer noise scale"""
    return config.system.with_epsilon(config.trajectories.epsilon)


def trajectory_theta(config: ExperimentConfig, mode: str) -> float:
    """+θ̄, 0 or -θ̄ for the trajectory mode"""
    if mode not in TRAJECTORY_MODES:
        raise ValueError(f"mode must be one of {', '.join(TRAJECTORY_MODES)}, got {mode!r}")
    if mode == "risk_neutral":
        return 0.0
    settings = config.trajectories
    theta_bar = settings.theta_bar
    if theta_bar is None:
        sys = assemble(trajectory_system(config), settings.n)
        if settings.measurement == "perfect":
            critical = theta_star_full(sys, config.sweep.tolerance)
        else:
            critical = theta_star_output(sys, config.sweep.tolerance)
        theta_bar = settings.fraction * critical
    return theta_bar if mode == "risk_averse" else -theta_bar


def cmd_trajectories(config: ExperimentConfig, mode: str) -> Dict[str, Any]:
    """
    Simulate one trajectory for the risk attitude and write
    trajectories_<mode>.csv with one row per (t, agent, dim)

    Raises:
        NumericalBlowup: surfaced with the offending time
    """
    settings = config.trajectories
    theta = trajectory_theta(config, mode)
    sys, controller = _synthesize(trajectory_system(config), settings.n, theta,
                                  settings.measurement)
    cfg = config.sim.replace(evader_mode=settings.evader_mode)
    x0 = None if settings.sample_initial_state else default_initial_condition(sys).x_bar_0
    trajectory = simulate(sys, controller, cfg, x0=x0)
    logger.info(f"trajectories {mode}: theta={theta:g}, {len(trajectory)} samples, "
                f"cost {trajectory.total_cost:.6g}")

    m = sys.spec.m
    rows = []
    for k, t in enumerate(trajectory.times):
        for agent in range(sys.n):
            for dim in range(sys.d):
                u = trajectory.u[k, agent * m + dim] if dim < m else None
                rows.append({"t": float(t), "agent": agent, "dim": dim,
                             "x": float(trajectory.x[k, agent * sys.d + dim]),
                             "u": None if u is None else float(u)})

    writer = _writer(config, "trajectories", {"mode": mode}, run_name=f"trajectories_{mode}")
    writer.write_table(f"trajectories_{mode}", TRAJECTORY_COLUMNS, rows)
    writer.write_manifest({"theta": theta, "n": sys.n, "epsilon": sys.epsilon,
                           "measurement": settings.measurement,
                           "evader_mode": settings.evader_mode})
    return {"theta": theta, "trajectory": trajectory}
