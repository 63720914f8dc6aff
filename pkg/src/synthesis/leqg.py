"""
RiskTrack LEQG Synthesis
Dense full-information and output-feedback controllers, their analytic
costs per agent, and the critical risk parameters θ*(n) and θ_I*(n)
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from src.errors import (ModelAssumptionViolated, NoSolution, SigmaExceedsYWarning,
                        ThetaAboveCritical)
from src.model.kron import StructuredMatrix, frozen
from src.model.system import MultiAgentSystem, SystemSpec
from src.solvers.checks import (is_controllable, is_observable, is_positive_definite,
                                loewner_leq)
from src.solvers.riccati import GareSolution, solve_care, solve_filter_care
from src.utils.logger import setup_logger

logger = setup_logger("leqg")

BISECTION_MAX_ITERATIONS = 60
BRACKET_DOUBLINGS = 40


@dataclass(frozen=True)
class RiskParameter:
    """θ > 0 risk-averse, θ < 0 risk-seeking, θ = 0 risk-neutral (LQG)"""
    theta: float

    def __post_init__(self):
        value = float(self.theta)
        if not math.isfinite(value):
            raise ValueError(f"risk parameter must be finite, got {self.theta!r}")
        object.__setattr__(self, "theta", value)

    @property
    def attitude(self) -> str:
        if self.theta > 0:
            return "risk_averse"
        if self.theta < 0:
            return "risk_seeking"
        return "risk_neutral"

    def __float__(self) -> float:
        return self.theta


Theta = Union[RiskParameter, float, int]


def as_theta(theta: Theta) -> float:
    if isinstance(theta, RiskParameter):
        return theta.theta
    return RiskParameter(theta).theta


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """Gaussian x₀ with mean x_bar_0 and covariance Sigma_0 (PD)"""
    x_bar_0: np.ndarray
    Sigma_0: np.ndarray

    def __post_init__(self):
        mean = np.array(self.x_bar_0, dtype=float).ravel()
        mean.setflags(write=False)
        object.__setattr__(self, "x_bar_0", mean)
        object.__setattr__(self, "Sigma_0", frozen(self.Sigma_0))
        if self.Sigma_0.shape != (mean.size, mean.size):
            raise ValueError(f"Sigma_0 must be {mean.size}x{mean.size}")
        if not is_positive_definite(self.Sigma_0):
            raise ValueError("Sigma_0 must be positive definite")


def default_initial_condition(sys: MultiAgentSystem) -> InitialCondition:
    """Agents spread on a line: block i at (1 + 2i/(n-1))·1_d, Σ₀ = I"""
    offsets = np.linspace(1.0, 3.0, sys.n) if sys.n > 1 else np.array([1.0])
    mean = np.kron(offsets, np.ones(sys.d))
    return InitialCondition(x_bar_0=mean, Sigma_0=np.eye(sys.n * sys.d))


@dataclass(frozen=True, eq=False)
class FullInfoController:
    """u = -K x with K = n R_n⁻¹ B_n' X_n"""
    X_n: GareSolution
    K: np.ndarray
    cost_per_agent: float
    theta: float
    n: int
    closed_loop: np.ndarray

    @property
    def gain(self) -> np.ndarray:
        return self.K


@dataclass(frozen=True, eq=False)
class OutputFeedbackController:
    """
    u = -gain·x̂ with the risk-sensitive filter
        dx̂ = filter_A x̂ dt + filter_B u dt + filter_L dy
    where filter_A = A_n + θY_nQ_n/n - Y_nC_n'V_n⁻¹C_n and
    gain = n R_n⁻¹ B_n' X_n (I - θY_nX_n)⁻¹.
    """
    X_n: GareSolution
    Y_n: GareSolution
    M_inv: np.ndarray
    gain: np.ndarray
    state_gain: np.ndarray
    filter_A: np.ndarray
    filter_B: np.ndarray
    filter_L: np.ndarray
    C_n: np.ndarray
    x_tilde_A: np.ndarray
    cost_per_agent: float
    theta: float
    n: int
    initial_condition: InitialCondition
    sigma_exceeds_y: bool = False


def control_weight(sys: MultiAgentSystem) -> StructuredMatrix:
    """n B_n R_n⁻¹ B_n'"""
    return (sys.B_n @ sys.R_n_inv @ sys.B_n.T).scale(float(sys.n))


def S_n(sys: MultiAgentSystem, theta: Theta) -> StructuredMatrix:
    """n B_n R_n⁻¹ B_n' - θ(W_n + εZ_n)"""
    return control_weight(sys) - sys.process_noise.scale(as_theta(theta))


def T_n(sys: MultiAgentSystem, theta: Theta) -> StructuredMatrix:
    """C_n' V_n⁻¹ C_n - θ Q_n / n"""
    return sys.measurement_information - sys.Q_n.scale(as_theta(theta) / sys.n)


def check_full_info_assumptions(spec: SystemSpec):
    """(A, B) controllable and (A, Q) observable"""
    if not is_controllable(spec.A, spec.B):
        raise ModelAssumptionViolated("(A, B) is not controllable")
    if not is_observable(spec.A, spec.Q):
        raise ModelAssumptionViolated("(A, Q) is not observable")


def check_output_assumptions(sys: MultiAgentSystem):
    """Adds (A, C) observable and (A_n, [√εF_n, -G_n]) controllable"""
    spec = sys.spec
    check_full_info_assumptions(spec)
    if not is_observable(spec.A, spec.C):
        raise ModelAssumptionViolated("(A, C) is not observable")
    noise_input = np.hstack([np.sqrt(spec.epsilon) * sys.F_n.dense, -sys.G_n.dense])
    if not is_controllable(sys.A_n.dense, noise_input, depth=spec.d):
        raise ModelAssumptionViolated(
            f"(A_n, [sqrt(eps) F_n, -G_n]) is not controllable for n={sys.n}, "
            f"eps={spec.epsilon:g}; the filter is only marginally stable, use eps > 0")


def _solve_control(sys: MultiAgentSystem, theta: float) -> GareSolution:
    return solve_care(sys.A_n.dense, S_n(sys, theta).dense, sys.Q_n.dense / sys.n)


def _solve_filter(sys: MultiAgentSystem, theta: float) -> GareSolution:
    return solve_filter_care(sys.A_n.dense, T_n(sys, theta).dense, sys.process_noise.dense)


def _coupling(theta: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """I - θ Y_n X_n"""
    return np.eye(X.shape[0]) - theta * Y @ X


def _coupling_is_positive(M: np.ndarray) -> bool:
    eigenvalues = np.linalg.eigvals(M)
    return bool(np.min(np.real(eigenvalues)) > 0.0)


def full_info_cost(sys: MultiAgentSystem, X_n) -> float:
    """J*(θ, n) = Tr((W_n + εZ_n) X_n)"""
    X = X_n.X if isinstance(X_n, GareSolution) else np.asarray(X_n)
    return float(np.sum(sys.process_noise.dense * X.T))


def output_feedback_cost(sys: MultiAgentSystem, theta: Theta, X_n, Y_n) -> float:
    """J_I*(θ, n) = Tr(Y_n Q_n/n + Y_n C_n'V_n⁻¹C_n Y_n X_n (I - θY_nX_n)⁻¹)"""
    theta = as_theta(theta)
    X = X_n.X if isinstance(X_n, GareSolution) else np.asarray(X_n)
    Y = Y_n.X if isinstance(Y_n, GareSolution) else np.asarray(Y_n)
    M_inv = np.linalg.inv(_coupling(theta, X, Y))
    estimation = np.trace(Y @ sys.Q_n.dense) / sys.n
    control = np.trace(Y @ sys.measurement_information.dense @ Y @ X @ M_inv)
    return float(estimation + control)


def full_info_synthesis(sys: MultiAgentSystem, theta: Theta,
                        check_assumptions: bool = True) -> FullInfoController:
    """
    LEQG controller with perfect state measurements

    Args:
        sys: assembled n-agent system
        theta: risk parameter
        check_assumptions: run the controllability / observability rank tests

    Returns:
        FullInfoController with gain K = n R_n⁻¹ B_n' X_n and cost J*(θ, n)

    Raises:
        ThetaAboveCritical: the control GARE has no stabilizing PD solution
        ModelAssumptionViolated: a rank test fails
    """
    theta = as_theta(theta)
    if check_assumptions:
        check_full_info_assumptions(sys.spec)

    try:
        X_n = _solve_control(sys, theta)
    except NoSolution as e:
        raise ThetaAboveCritical(theta, n=sys.n, reason=str(e)) from None

    K = sys.n * (sys.R_n_inv @ sys.B_n.T).dense @ X_n.X
    cost = full_info_cost(sys, X_n)
    closed_loop = sys.A_n.dense - sys.B_n.dense @ K
    logger.info(f"full-information synthesis n={sys.n} theta={theta:g}: J*={cost:.6g}")
    return FullInfoController(X_n=X_n, K=frozen(K), cost_per_agent=cost, theta=theta,
                              n=sys.n, closed_loop=frozen(closed_loop))


def output_feedback_synthesis(sys: MultiAgentSystem, theta: Theta,
                              ic: Optional[InitialCondition] = None,
                              check_assumptions: bool = True) -> OutputFeedbackController:
    """
    LEQG controller with noisy relative measurements

    Solves the control and filter GAREs, checks that I - θY_nX_n has only
    positive eigenvalues, and realizes the filter. Σ₀ ⪯ Y_n is checked; a
    violation only warns because the control law is unchanged.

    Raises:
        ThetaAboveCritical: a GARE is unsolvable or the coupling check fails
        ModelAssumptionViolated: a rank test fails
    """
    theta = as_theta(theta)
    if check_assumptions:
        check_output_assumptions(sys)
    ic = ic or default_initial_condition(sys)

    try:
        X_n = _solve_control(sys, theta)
        Y_n = _solve_filter(sys, theta)
    except NoSolution as e:
        raise ThetaAboveCritical(theta, n=sys.n, reason=str(e)) from None

    X, Y = X_n.X, Y_n.X
    coupling = _coupling(theta, X, Y)
    if not _coupling_is_positive(coupling):
        raise ThetaAboveCritical(theta, n=sys.n,
                                 reason="I - theta Y_n X_n has a non-positive eigenvalue")
    M_inv = np.eye(X.shape[0]) if theta == 0 else np.linalg.inv(coupling)

    A = sys.A_n.dense
    C = sys.C_n.dense
    L = Y @ C.T @ sys.V_n_inv.dense
    state_gain = sys.n * (sys.R_n_inv @ sys.B_n.T).dense @ X
    filter_A = A + theta * Y @ sys.Q_n.dense / sys.n - L @ C
    x_tilde_A = A - S_n(sys, theta).dense @ X
    cost = output_feedback_cost(sys, theta, X_n, Y_n)

    sigma_exceeds_y = not loewner_leq(ic.Sigma_0, Y)
    if sigma_exceeds_y:
        message = (f"Sigma_0 is not below Y_n for n={sys.n}, theta={theta:g}; "
                   f"the output-feedback law is used but is not guaranteed optimal")
        logger.info(message)
        warnings.warn(message, SigmaExceedsYWarning, stacklevel=2)

    logger.info(f"output-feedback synthesis n={sys.n} theta={theta:g}: J_I*={cost:.6g}")
    return OutputFeedbackController(
        X_n=X_n, Y_n=Y_n, M_inv=frozen(M_inv), gain=frozen(state_gain @ M_inv),
        state_gain=frozen(state_gain), filter_A=frozen(filter_A),
        filter_B=frozen(sys.B_n.dense), filter_L=frozen(L), C_n=frozen(C),
        x_tilde_A=frozen(x_tilde_A), cost_per_agent=cost, theta=theta, n=sys.n,
        initial_condition=ic, sigma_exceeds_y=sigma_exceeds_y,
    )


def bisect_critical(predicate: Callable[[float], bool], tol: float, label: str) -> float:
    """
    Supremum of the feasible θ-ray [0, θ*) by doubling then bisection

    The bracket starts at [0, 1] and its upper end doubles until the
    predicate fails; bisection then stops once the bracket is within tol or
    after BISECTION_MAX_ITERATIONS halvings. Returns the bracket midpoint,
    or inf when no failure is found.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if not predicate(0.0):
        raise ModelAssumptionViolated(f"{label}: problem is infeasible at theta=0")

    low, high = 0.0, 1.0
    for _ in range(BRACKET_DOUBLINGS):
        if not predicate(high):
            break
        low, high = high, 2.0 * high
    else:
        logger.warning(f"{label}: no critical value below {high:g}; reporting inf")
        return math.inf

    for iteration in range(BISECTION_MAX_ITERATIONS):
        if high - low <= tol:
            break
        middle = 0.5 * (low + high)
        if predicate(middle):
            low = middle
        else:
            high = middle
        logger.debug(f"{label} bisection {iteration}: [{low:.10g}, {high:.10g}]")

    critical = 0.5 * (low + high)
    logger.info(f"{label} = {critical:.8g} (bracket width {high - low:.2e})")
    return critical


def full_info_feasible(sys: MultiAgentSystem, theta: float) -> bool:
    try:
        _solve_control(sys, theta)
    except NoSolution:
        return False
    return True


def output_feedback_feasible(sys: MultiAgentSystem, theta: float) -> bool:
    try:
        X_n = _solve_control(sys, theta)
        Y_n = _solve_filter(sys, theta)
    except NoSolution:
        return False
    return _coupling_is_positive(_coupling(theta, X_n.X, Y_n.X))


def theta_star_full(sys: MultiAgentSystem, tol: float = 1e-6) -> float:
    """θ*(n): supremum of θ for which the control GARE has a PD solution"""
    check_full_info_assumptions(sys.spec)
    return bisect_critical(lambda theta: full_info_feasible(sys, theta), tol,
                           f"theta*({sys.n})")


def theta_star_output(sys: MultiAgentSystem, tol: float = 1e-6) -> float:
    """θ_I*(n): both GAREs solvable and I - θY_nX_n with positive spectrum"""
    check_output_assumptions(sys)
    return bisect_critical(lambda theta: output_feedback_feasible(sys, theta), tol,
                           f"theta_I*({sys.n})")

