"""
RiskTrack Simulator
Euler–Maruyama integration of the closed-loop pursuit dynamics

    dx = (A_n x + B_n u) dt + √ε F_n dw_p - G_n dw_e
    dy = C_n x dt + H_n dv

States are stored as row vectors so a batch of trials advances with one
matrix product per term. Each trial draws its Brownian increments from its
own generator, seeded from (seed, trial index), a chunk of steps at a time,
so a trial's path does not depend on which batch it runs in.

Ensembles can be sampled under a tilted measure: with a symmetric tilt Θ,
every Brownian increment dw of a noise stream with input matrix Γ gets the
drift Γ'Θx, and the trial carries its log likelihood ratio
-Σ(v'dw̃ + ½|v|²dt) so expectations under the model measure stay unbiased.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from src.errors import ConfigError, NumericalBlowup
from src.model.system import MultiAgentSystem
from src.synthesis.leqg import (FullInfoController, InitialCondition, OutputFeedbackController,
                                default_initial_condition)
from src.utils.logger import setup_logger

logger = setup_logger("simulator")

EVADER_MODES = ("model", "frozen")

Controller = Union[FullInfoController, OutputFeedbackController]


@dataclass(frozen=True)
class SimConfig:
    """
    Integration and Monte Carlo settings

    evader_mode "frozen" holds the evader at the origin (no evader noise)
    while the controller is still the one synthesized for the random evader.
    burn_in=None means min(T/10, 10).
    """
    dt: float = 1e-3
    horizon: float = 10.0
    trials: int = 1
    seed: int = 0
    evader_mode: str = "model"
    record_every: int = 10
    burn_in: Optional[float] = None
    measurement_noise: bool = True
    track_x_tilde: bool = False
    overflow_guard: float = 1e8
    batch_size: int = 4096
    chunk_steps: int = 1000

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt}", field="sim.dt")
        if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            raise ConfigError(f"horizon must be >= dt, got {self.horizon}", field="sim.horizon")
        for name in ("trials", "record_every", "batch_size", "chunk_steps"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}",
                                  field=f"sim.{name}")
            object.__setattr__(self, name, int(value))
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}",
                              field="sim.seed")
        object.__setattr__(self, "seed", int(self.seed))
        if self.evader_mode not in EVADER_MODES:
            raise ConfigError(f"evader_mode must be one of {', '.join(EVADER_MODES)}, "
                              f"got {self.evader_mode!r}", field="sim.evader_mode")
        if not self.overflow_guard > 0:
            raise ConfigError("overflow_guard must be > 0", field="sim.overflow_guard")
        if self.burn_in is not None:
            if not self.burn_in >= 0:
                raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}", field="sim.burn_in")
            if self.burn_in >= self.horizon:
                logger.warning(f"burn_in {self.burn_in:g} >= horizon {self.horizon:g}; "
                               f"clipping to {self.default_burn_in:g}")
                object.__setattr__(self, "burn_in", self.default_burn_in)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def default_burn_in(self) -> float:
        return min(self.horizon / 10.0, 10.0)

    @property
    def burn_in_time(self) -> float:
        return self.default_burn_in if self.burn_in is None else float(self.burn_in)

    @property
    def burn_in_steps(self) -> int:
        return min(self.steps - 1, int(round(self.burn_in_time / self.dt)))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Sampled single-trial run

    x, x_hat, x_tilde: (samples, n·d); u: (samples, n·m); running_cost holds
    ∫(x'Q_nx + u'R_nu)/n dt from 0 to each sample time.
    """
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    running_cost: np.ndarray
    n: int
    d: int
    x_hat: Optional[np.ndarray] = None
    x_tilde: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.times.size

    def agent_states(self, agent: int) -> np.ndarray:
        """(samples, d) relative state of one pursuer"""
        return self.x[:, agent * self.d:(agent + 1) * self.d]

    @property
    def total_cost(self) -> float:
        return float(self.running_cost[-1])


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-trial integrated costs of a batch of independent runs"""
    trials: np.ndarray
    total_cost: np.ndarray
    settled_cost: np.ndarray
    horizon: float
    burn_in: float
    log_likelihood_ratio: Optional[np.ndarray] = None

    @property
    def time_averaged_cost(self) -> np.ndarray:
        """Post-burn-in cost per unit time, one value per trial"""
        return self.settled_cost / (self.horizon - self.burn_in)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Generator of one trial; independent of batch size and ordering"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


class _NoiseSource:
    """Brownian increments for a batch of trials: evader, pursuers, measurements"""

    def __init__(self, generators: List[np.random.Generator], widths: Sequence[int], dt: float):
        self.generators = generators
        self.widths = widths
        self.scale = math.sqrt(dt)

    def draw(self, steps: int) -> List[Optional[np.ndarray]]:
        per_trial = []
        for generator in self.generators:
            per_trial.append([generator.standard_normal((steps, width)) if width else None
                              for width in self.widths])
        return [None if not width else
                self.scale * np.stack([draws[i] for draws in per_trial])
                for i, width in enumerate(self.widths)]


def _tilted(increment: np.ndarray, drift: np.ndarray, dt: float):
    """Shifted increment dw̃ + v·dt and the log likelihood ratio of the step"""
    log_ratio = -np.sum(drift * increment, axis=1) - 0.5 * dt * np.sum(drift * drift, axis=1)
    return increment + drift * dt, log_ratio


def _sample_initial_states(generators, ic: InitialCondition) -> np.ndarray:
    factor = np.linalg.cholesky(ic.Sigma_0)
    draws = np.stack([g.standard_normal(ic.x_bar_0.size) for g in generators])
    return ic.x_bar_0 + draws @ factor.T


def _integrate(sys: MultiAgentSystem, controller: Controller, cfg: SimConfig,
               trials: Sequence[int], x0: Optional[np.ndarray],
               initial_condition: Optional[InitialCondition], record: bool,
               tilt: Optional[np.ndarray] = None):
    output = isinstance(controller, OutputFeedbackController)
    spec = sys.spec
    dt = cfg.dt
    steps = cfg.steps
    batch = len(trials)

    widths = (0 if cfg.evader_mode == "frozen" else spec.G.shape[1],
              sys.n * spec.F.shape[1] if spec.epsilon > 0 else 0,
              sys.n * spec.H.shape[1] if output and cfg.measurement_noise else 0)
    generators = [trial_generator(cfg.seed, trial) for trial in trials]
    noise = _NoiseSource(generators, widths, dt)

    explicit_prior = initial_condition is not None
    if initial_condition is None:
        initial_condition = (controller.initial_condition if output
                             else default_initial_condition(sys))
    if x0 is not None:
        x = np.tile(np.asarray(x0, dtype=float).ravel(), (batch, 1))
        if x.shape[1] != sys.n * sys.d:
            raise ValueError(f"x0 must have {sys.n * sys.d} entries, got {x.shape[1]}")
    else:
        x = _sample_initial_states(generators, initial_condition)

    A_T = sys.A_n.dense.T
    B_T = sys.B_n.dense.T
    Q = sys.Q_n.dense
    R = sys.R_n.dense
    evader_T = -sys.G_n.dense.T
    pursuer_T = math.sqrt(spec.epsilon) * sys.F_n.dense.T
    gain_T = (controller.gain if output else controller.K).T
    if tilt is not None:
        tilt = np.asarray(tilt, dtype=float)
        evader_shift = tilt @ evader_T.T
        pursuer_shift = tilt @ pursuer_T.T
    log_ratio = np.zeros(batch)

    x_hat = x_tilde = None
    if output:
        C_T = controller.C_n.T
        H_T = sys.H_n.dense.T
        filter_A_T = controller.filter_A.T
        L_T = controller.filter_L.T
        prior = (initial_condition.x_bar_0 if explicit_prior or x0 is None
                 else np.asarray(x0, dtype=float).ravel())
        x_hat = np.tile(prior, (batch, 1))
        if cfg.track_x_tilde:
            M_inv = controller.M_inv
            tilde_A_T = controller.x_tilde_A.T
            tilde_B_T = (M_inv @ controller.filter_B).T
            tilde_L_T = (M_inv @ controller.filter_L).T
            state_gain_T = controller.state_gain.T
            x_tilde = x_hat @ M_inv.T

    cost = np.zeros(batch)
    settled = np.zeros(batch)
    burn_in_steps = cfg.burn_in_steps
    samples = {"t": [], "x": [], "u": [], "cost": [], "x_hat": [], "x_tilde": []}

    def sample(step, u):
        samples["t"].append(step * dt)
        samples["x"].append(x[0].copy())
        samples["u"].append(u[0].copy())
        samples["cost"].append(cost[0])
        if output:
            samples["x_hat"].append(x_hat[0].copy())
        if x_tilde is not None:
            samples["x_tilde"].append(x_tilde[0].copy())

    for chunk_start in range(0, steps, cfg.chunk_steps):
        chunk = min(cfg.chunk_steps, steps - chunk_start)
        evader_dw, pursuer_dw, measurement_dv = noise.draw(chunk)
        for j in range(chunk):
            step = chunk_start + j
            u = -(x_hat if output else x) @ gain_T
            if record and step % cfg.record_every == 0:
                sample(step, u)

            rate = (np.sum((x @ Q) * x, axis=1) + np.sum((u @ R) * u, axis=1)) / sys.n
            cost += rate * dt
            if step >= burn_in_steps:
                settled += rate * dt

            dx = (x @ A_T + u @ B_T) * dt
            if evader_dw is not None:
                increment = evader_dw[:, j]
                if tilt is not None:
                    increment, step_ratio = _tilted(increment, x @ evader_shift, dt)
                    log_ratio += step_ratio
                dx += increment @ evader_T
            if pursuer_dw is not None:
                increment = pursuer_dw[:, j]
                if tilt is not None:
                    increment, step_ratio = _tilted(increment, x @ pursuer_shift, dt)
                    log_ratio += step_ratio
                dx += increment @ pursuer_T

            if output:
                dy = (x @ C_T) * dt
                if measurement_dv is not None:
                    dy += measurement_dv[:, j] @ H_T
                if x_tilde is not None:
                    u_tilde = u + x_tilde @ state_gain_T
                    x_tilde = (x_tilde + (x_tilde @ tilde_A_T + u_tilde @ tilde_B_T) * dt
                               + (dy - (x_tilde @ C_T) * dt) @ tilde_L_T)
                x_hat = x_hat + (x_hat @ filter_A_T + u @ B_T) * dt + dy @ L_T

            x = x + dx
            peak = np.max(np.abs(x))
            if not peak <= cfg.overflow_guard:
                t = (step + 1) * dt
                norm = float(np.max(np.linalg.norm(x, axis=1)))
                logger.error(f"state blew up at t={t:.6g} (norm {norm:.3g})")
                raise NumericalBlowup(t=t, norm=norm)

    if record:
        sample(steps, -(x_hat if output else x) @ gain_T)

    return cost, settled, log_ratio, samples


def simulate(sys: MultiAgentSystem, controller: Controller, cfg: SimConfig,
             x0: Optional[np.ndarray] = None, trial: int = 0,
             initial_condition: Optional[InitialCondition] = None) -> Trajectory:
    """
    Integrate one closed-loop trajectory

    Args:
        sys: assembled n-agent system
        controller: full-information (u = -Kx) or output-feedback (u = -gain·x̂)
        cfg: integration settings; cfg.trials is ignored
        x0: initial relative state; drawn from N(x̄₀, Σ₀) when omitted. An
            explicit x0 is also the filter's prior mean unless
            initial_condition is given.
        trial: trial index selecting the noise stream
        initial_condition: overrides the controller's (x̄₀, Σ₀)

    Returns:
        Trajectory sampled every cfg.record_every steps and at T

    Raises:
        NumericalBlowup: the state left the overflow guard
    """
    _, _, _, samples = _integrate(sys, controller, cfg, [trial], x0, initial_condition, record=True)
    output = isinstance(controller, OutputFeedbackController)

    def stacked(key):
        return np.array(samples[key]) if samples[key] else None

    return Trajectory(
        times=np.array(samples["t"]),
        x=np.array(samples["x"]),
        u=np.array(samples["u"]),
        running_cost=np.array(samples["cost"]),
        n=sys.n,
        d=sys.d,
        x_hat=stacked("x_hat") if output else None,
        x_tilde=stacked("x_tilde"),
    )


def simulate_ensemble(sys: MultiAgentSystem, controller: Controller, cfg: SimConfig,
                      x0: Optional[np.ndarray] = None,
                      initial_condition: Optional[InitialCondition] = None,
                      tilt: Optional[np.ndarray] = None) -> EnsembleResult:
    """
    Run cfg.trials independent trials in batches of cfg.batch_size, costs only

    tilt: symmetric n·d×n·d matrix Θ; when given, trials are sampled with the
        extra noise drift Γ'Θx and the result carries per-trial log
        likelihood ratios
    """
    totals = []
    settled = []
    ratios = []
    for start in range(0, cfg.trials, cfg.batch_size):
        trials = list(range(start, min(cfg.trials, start + cfg.batch_size)))
        logger.debug(f"ensemble batch trials {trials[0]}..{trials[-1]}")
        total, post, log_ratio, _ = _integrate(sys, controller, cfg, trials, x0,
                                               initial_condition, record=False, tilt=tilt)
        totals.append(total)
        settled.append(post)
        ratios.append(log_ratio)
    return EnsembleResult(
        trials=np.arange(cfg.trials),
        total_cost=np.concatenate(totals),
        settled_cost=np.concatenate(settled),
        horizon=cfg.steps * cfg.dt,
        burn_in=cfg.burn_in_steps * cfg.dt,
        log_likelihood_ratio=None if tilt is None else np.concatenate(ratios),
    )


def estimation_error_covariance(trajectories: Sequence[Trajectory], burn_in: float = 0.0) -> np.ndarray:
    """Time average of (x - x̂)(x - x̂)' over samples with t >= burn_in"""
    errors = []
    for trajectory in trajectories:
        if trajectory.x_hat is None:
            raise ValueError("estimation error needs output-feedback trajectories")
        keep = trajectory.times >= burn_in
        errors.append(trajectory.x[keep] - trajectory.x_hat[keep])
    stacked = np.concatenate(errors)
    if stacked.shape[0] == 0:
        raise ValueError(f"no samples after burn_in={burn_in:g}")
    return stacked.T @ stacked / stacked.shape[0]
