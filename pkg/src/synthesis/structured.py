"""
RiskTrack Structured Solutions
Closed-form n-agent Riccati solutions built from single-agent blocks

For homogeneous pursuers every case with a closed form needs only Riccati
equations of single-agent size:
- LQG control:          X_n = (1/n) I_n ⊗ X̃₁
- risk-sensitive, ε=0:  X_n = (1/n) I_n ⊗ X̃₁ + (1/n²) E_n ⊗ X̂₁
- A = 0 filter, ε→0:    Y_n ≈ (E_n/√n) ⊗ Ỹ₁,ₙ  with Ỹ(CV⁻¹C - (θ/n)Q)Ỹ = W + εZ
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from src.errors import AssumptionViolated, EpsilonNotZero, NoSolution, ThetaAboveCritical
from src.model.kron import StructuredMatrix, StructuredSpectrum, all_ones, frozen, identity, struct_eigs
from src.model.system import SystemSpec
from src.solvers.checks import spectral_radius, symmetrize
from src.solvers.riccati import solve_care
from src.synthesis.leqg import Theta, as_theta, bisect_critical, check_full_info_assumptions
from src.utils.logger import setup_logger

logger = setup_logger("structured")


@dataclass(frozen=True, eq=False)
class StructuredControlSolution:
    """X̃₁ (LQG), X̂₁ (risk-sensitive perturbation) and the assembled X_n"""
    X_tilde_1: np.ndarray
    X_hat_1: np.ndarray
    n: int
    theta: float
    cost_per_agent: float

    def __post_init__(self):
        object.__setattr__(self, "X_tilde_1", frozen(self.X_tilde_1))
        object.__setattr__(self, "X_hat_1", frozen(self.X_hat_1))

    @property
    def X_1(self) -> np.ndarray:
        """Single-agent risk-sensitive solution X̃₁ + X̂₁"""
        return self.X_tilde_1 + self.X_hat_1

    @cached_property
    def X_n(self) -> StructuredMatrix:
        n = self.n
        return (StructuredMatrix.kron(identity(n) / n, self.X_tilde_1)
                + StructuredMatrix.kron(all_ones(n) / n ** 2, self.X_hat_1))

    def spectrum(self) -> StructuredSpectrum:
        """Eigenvalues of X_n: those of X̃₁/n (n-1 times) and of X₁/n"""
        return struct_eigs(self.X_tilde_1 / self.n, self.X_hat_1 / self.n, self.n)


@dataclass(frozen=True, eq=False)
class StructuredFilterSolution:
    """Ỹ₁,ₙ and the assembled Y_n = (E_n/√n) ⊗ Ỹ₁,ₙ"""
    Y_tilde_1n: np.ndarray
    n: int
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "Y_tilde_1n", frozen(self.Y_tilde_1n))

    @cached_property
    def Y_n(self) -> StructuredMatrix:
        return StructuredMatrix.kron(all_ones(self.n) / np.sqrt(self.n), self.Y_tilde_1n)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(symmetrize(matrix))
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T


def solve_quadratic_congruence(T, Wc) -> np.ndarray:
    """
    PSD solution of Y T Y = Wc for T ≻ 0, Wc ⪰ 0

    Y = T^(-1/2) (T^(1/2) Wc T^(1/2))^(1/2) T^(-1/2)
    """
    eigenvalues, vectors = np.linalg.eigh(symmetrize(np.atleast_2d(T)))
    if eigenvalues[0] <= 0:
        raise NoSolution(f"middle matrix is not positive definite (min eigenvalue {eigenvalues[0]:.3e})")
    root = (vectors * np.sqrt(eigenvalues)) @ vectors.T
    inverse_root = (vectors / np.sqrt(eigenvalues)) @ vectors.T
    inner = _psd_sqrt(root @ np.atleast_2d(Wc) @ root)
    return symmetrize(inverse_root @ inner @ inverse_root)


def _require_zero_drift(spec: SystemSpec):
    if np.any(spec.A != 0):
        raise AssumptionViolated("this closed form assumes A = 0")


def _lqg_block(spec: SystemSpec) -> np.ndarray:
    return solve_care(spec.A, spec.B @ spec.R_inv @ spec.B.T, spec.Q).X


def _risk_block(spec: SystemSpec, theta: float) -> np.ndarray:
    try:
        return solve_care(spec.A, spec.B @ spec.R_inv @ spec.B.T - theta * spec.W, spec.Q).X
    except NoSolution as e:
        raise ThetaAboveCritical(theta, n=1, reason=str(e)) from None


def lqg_structured_X(spec: SystemSpec, n: int) -> StructuredControlSolution:
    """
    LQG (θ = 0) control solution for n agents: X_n = (1/n) I_n ⊗ X̃₁

    The controllers decouple and the cost per agent, Tr((W + εZ)X̃₁), does not
    depend on n.
    """
    check_full_info_assumptions(spec)
    X_tilde = _lqg_block(spec)
    cost = float(np.trace((spec.W + spec.epsilon * spec.Z) @ X_tilde))
    return StructuredControlSolution(X_tilde_1=X_tilde, X_hat_1=np.zeros_like(X_tilde),
                                     n=n, theta=0.0, cost_per_agent=cost)


def rs_structured_X(spec: SystemSpec, n: int, theta: Theta) -> StructuredControlSolution:
    """
    Risk-sensitive control solution for noiseless pursuers (ε = 0)

    X̂₁ = X₁ - X̃₁ where X₁ solves the single-agent GARE with
    S = BR⁻¹B' - θW; the cost per agent Tr(W X₁) = J*(θ, 1) for every n.

    Raises:
        EpsilonNotZero: spec.epsilon != 0
        ThetaAboveCritical: θ >= θ*(1)
    """
    theta = as_theta(theta)
    if spec.epsilon != 0:
        raise EpsilonNotZero(f"closed form requires epsilon = 0, got {spec.epsilon:g}")
    check_full_info_assumptions(spec)
    X_tilde = _lqg_block(spec)
    X_hat = np.zeros_like(X_tilde) if theta == 0 else _risk_block(spec, theta) - X_tilde
    cost = float(np.trace(spec.W @ (X_tilde + X_hat)))
    logger.debug(f"rs_structured_X n={n} theta={theta:g}: J*={cost:.6g}")
    return StructuredControlSolution(X_tilde_1=X_tilde, X_hat_1=X_hat, n=n,
                                     theta=theta, cost_per_agent=cost)


def rs_structured_filter_Y(spec: SystemSpec, n: int, theta: Theta) -> StructuredFilterSolution:
    """
    Dominant ε→0 term of the A = 0 filter solution: Y_n = (E_n/√n) ⊗ Ỹ₁,ₙ

    Ỹ₁,ₙ solves Y (CV⁻¹C - (θ/n)Q) Y = W + εZ, which depends on n through θ/n.

    Raises:
        AssumptionViolated: A != 0
        ThetaAboveCritical: CV⁻¹C - (θ/n)Q is not positive definite
    """
    theta = as_theta(theta)
    _require_zero_drift(spec)
    middle = spec.C.T @ spec.V_inv @ spec.C - (theta / n) * spec.Q
    try:
        Y_tilde = solve_quadratic_congruence(middle, spec.W + spec.epsilon * spec.Z)
    except NoSolution as e:
        raise ThetaAboveCritical(theta, n=n, reason=str(e)) from None
    return StructuredFilterSolution(Y_tilde_1n=Y_tilde, n=n, theta=theta)


def spectral_radius_condition(Y_tilde, X_1, theta: Theta, n: int) -> bool:
    """ρ(θ Ỹ₁,ₙ X₁) < √n"""
    product = as_theta(theta) * np.atleast_2d(Y_tilde) @ np.atleast_2d(X_1)
    return spectral_radius(product) < np.sqrt(n)


def asymptotic_lqg_cost(spec: SystemSpec, n: int) -> float:
    """
    ε→0 LQG output-feedback cost per agent for A = 0:
    Tr(Y₁Q)/√n + Tr(W X₁); the estimation term vanishes at rate 1/√n
    """
    _require_zero_drift(spec)
    Y_1 = solve_quadratic_congruence(spec.C.T @ spec.V_inv @ spec.C,
                                     spec.W + spec.epsilon * spec.Z)
    X_1 = lqg_structured_X(spec, 1).X_tilde_1
    return float(np.trace(Y_1 @ spec.Q) / np.sqrt(n) + np.trace(spec.W @ X_1))


def structured_output_cost(spec: SystemSpec, n: int, theta: Theta) -> float:
    """
    ε→0 risk-sensitive output-feedback cost per agent for A = 0

    With Y_nX_n ≈ (E_n/n^(3/2)) ⊗ Ỹ₁,ₙX₁ the trace formula collapses to
        Tr(ỸQ)/√n + Tr(Ỹ CV⁻¹C Ỹ X₁ (I - θỸX₁/√n)⁻¹)

    Raises:
        ThetaAboveCritical: a block equation is unsolvable or the coupling
            I - θỸX₁/√n has a non-positive eigenvalue
    """
    theta = as_theta(theta)
    _require_zero_drift(spec)
    control = rs_structured_X(spec.with_epsilon(0.0), n, theta)
    Y_tilde = rs_structured_filter_Y(spec, n, theta).Y_tilde_1n
    X_1 = control.X_1
    root_n = np.sqrt(n)
    coupling = np.eye(spec.d) - theta * Y_tilde @ X_1 / root_n
    if np.min(np.real(np.linalg.eigvals(coupling))) <= 0:
        raise ThetaAboveCritical(theta, n=n, reason="rho(theta Y X) >= sqrt(n)")
    information = spec.C.T @ spec.V_inv @ spec.C
    estimation = np.trace(Y_tilde @ spec.Q) / root_n
    tracking = np.trace(Y_tilde @ information @ Y_tilde @ X_1 @ np.linalg.inv(coupling))
    return float(estimation + tracking)


def structured_output_feasible(spec: SystemSpec, n: int, theta: float) -> bool:
    try:
        X_1 = rs_structured_X(spec.with_epsilon(0.0), n, theta).X_1
        Y_tilde = rs_structured_filter_Y(spec, n, theta).Y_tilde_1n
    except ThetaAboveCritical:
        return False
    return spectral_radius_condition(Y_tilde, X_1, theta, n)


def theta_star_structured(spec: SystemSpec, n: int, tol: float = 1e-6) -> float:
    """Root of ρ(θỸ₁,ₙ,θ X₁,θ) = √n: θ_I*(n) in the ε→0, A = 0 regime"""
    _require_zero_drift(spec)
    return bisect_critical(lambda theta: structured_output_feasible(spec, n, theta), tol,
                           f"structured theta_I*({n})")
