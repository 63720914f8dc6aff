"""
RiskTrack Riccati Solver
Generalized continuous-time algebraic Riccati equations

    A'X + XA - X S X + Qc = 0

where S may be sign-indefinite (risk-sensitive problems subtract θ times a
noise intensity from the control weight). Solutions come from the stable
invariant subspace of the Hamiltonian [[A, -S], [-Qc, -A']] computed with an
ordered real Schur form, then polished by Newton steps on the residual.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, schur, solve_continuous_lyapunov

from src.errors import IllConditioned, NoSolution
from src.solvers.checks import (loewner_leq, spectral_abscissa, symmetrize)
from src.utils.logger import setup_logger

logger = setup_logger("riccati")

PD_TOLERANCE = 1e-10                # relative to ‖X‖₂
IMAGINARY_AXIS_TOLERANCE = 1e-8     # absolute, on Hamiltonian eigenvalues
SUBSPACE_COND_LIMIT = 1e12
GROWTH_LIMIT = 1e6                  # ‖X‖₂ relative to max(1, ‖H‖₂)
RESIDUAL_TOLERANCE = 1e-9           # relative to the size of the GARE terms
NEWTON_STEPS = 8


@dataclass(frozen=True, eq=False)
class GareSolution:
    """A symmetric Riccati solution with its diagnostics"""
    X: np.ndarray
    residual_norm: float
    min_eigenvalue: float
    closed_loop_spectral_abscissa: float
    stabilizing: bool = True

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    def diagnostics(self) -> dict:
        return {
            "residual_norm": self.residual_norm,
            "min_eigenvalue": self.min_eigenvalue,
            "closed_loop_spectral_abscissa": self.closed_loop_spectral_abscissa,
            "stabilizing": self.stabilizing,
        }


def care_residual(A, S, Qc, X) -> np.ndarray:
    """A'X + XA - XSX + Qc"""
    return A.T @ X + X @ A - X @ S @ X + Qc


def is_stabilizing(A, S, X) -> bool:
    """True iff A - S X is Hurwitz"""
    A = np.atleast_2d(A)
    return spectral_abscissa(A - np.atleast_2d(S) @ np.atleast_2d(X)) < 0.0


def hamiltonian(A, S, Qc) -> np.ndarray:
    return np.block([[A, -S], [-Qc, -A.T]])


def _prepare(A, S, Qc):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Qc = np.atleast_2d(np.asarray(Qc, dtype=float))
    k = A.shape[0]
    if A.shape != (k, k) or S.shape != (k, k) or Qc.shape != (k, k):
        raise ValueError(f"Riccati data must be square and conformable, got "
                         f"A{A.shape}, S{S.shape}, Qc{Qc.shape}")
    return A, symmetrize(S), symmetrize(Qc)


def _subspace_solution(H: np.ndarray, k: int, sort: str) -> np.ndarray:
    """
    X = U2 U1⁻¹ from the k-dimensional invariant subspace selected by sort

    ‖U1⁻¹‖₂ = √(1 + ‖X‖₂²) for an orthonormal basis, so a nearly singular U1
    is a solution running off to infinity: the boundary of solvability
    approached from inside. That case is reported as NoSolution once ‖X‖₂
    passes GROWTH_LIMIT·max(1, ‖H‖₂); IllConditioned is left for bases that
    are poor while X itself stays moderate.
    """
    _, Z, sdim = schur(H, output="real", sort=sort)
    if sdim != k:
        raise NoSolution(f"Hamiltonian {sort} subspace has dimension {sdim}, expected {k}")
    U1 = Z[:k, :k]
    U2 = Z[k:, :k]
    growth_limit = GROWTH_LIMIT * max(1.0, float(np.linalg.norm(H, 2)))
    smallest = float(np.linalg.svd(U1, compute_uv=False)[-1])
    if smallest * growth_limit < 1.0:
        raise NoSolution(f"Riccati solution grows without bound "
                         f"(‖X‖ ≈ {1.0 / max(smallest, 1e-300):.3g} > {growth_limit:.3g})")
    condition = np.linalg.cond(U1)
    if not np.isfinite(condition) or condition > SUBSPACE_COND_LIMIT:
        raise IllConditioned(
            f"invariant subspace basis is ill-conditioned (cond {condition:.3g})",
            condition_number=condition)
    X = np.linalg.solve(U1.T, U2.T).T
    return symmetrize(X)


def _newton_refine(A, S, Qc, X):
    """Newton steps X ← X + Δ with (A-SX)'Δ + Δ(A-SX) = -R(X); keeps improvements only"""
    residual = care_residual(A, S, Qc, X)
    best = np.linalg.norm(residual)
    for step in range(NEWTON_STEPS):
        if best <= 1e-15 * max(1.0, np.linalg.norm(X)):
            break
        closed_loop = A - S @ X
        try:
            delta = solve_continuous_lyapunov(closed_loop.T, -residual)
        except (LinAlgError, ValueError):
            break
        candidate = symmetrize(X + delta)
        candidate_residual = care_residual(A, S, Qc, candidate)
        norm = np.linalg.norm(candidate_residual)
        if not np.isfinite(norm) or norm >= best:
            break
        logger.debug(f"Newton step {step}: residual {best:.3e} -> {norm:.3e}")
        X, residual, best = candidate, candidate_residual, norm
    return X, float(best)


def _package(A, S, X, residual_norm: float, stabilizing: bool) -> GareSolution:
    eigenvalues = np.linalg.eigvalsh(X)
    return GareSolution(
        X=X,
        residual_norm=residual_norm,
        min_eigenvalue=float(eigenvalues[0]),
        closed_loop_spectral_abscissa=spectral_abscissa(A - S @ X),
        stabilizing=stabilizing,
    )


def residual_scale(A, S, Qc, X) -> float:
    """‖Qc‖ + 2‖A‖‖X‖ + ‖S‖‖X‖², the size the residual is measured against"""
    x_norm = float(np.linalg.norm(X))
    return (float(np.linalg.norm(Qc)) + 2.0 * float(np.linalg.norm(A)) * x_norm
            + float(np.linalg.norm(S)) * x_norm ** 2)


def _validate(A, S, Qc, solution: GareSolution, require_stabilizing: bool):
    X = solution.X
    norm_2 = float(np.linalg.norm(X, 2))
    if not solution.min_eigenvalue > PD_TOLERANCE * norm_2:
        raise NoSolution(f"Riccati solution is not positive definite "
                         f"(min eigenvalue {solution.min_eigenvalue:.3e})")
    if require_stabilizing and not solution.closed_loop_spectral_abscissa < 0.0:
        raise NoSolution(f"Riccati solution is not stabilizing (spectral abscissa "
                         f"{solution.closed_loop_spectral_abscissa:.3e})")
    limit = RESIDUAL_TOLERANCE * max(1.0, residual_scale(A, S, Qc, X))
    if not solution.residual_norm <= limit:
        raise IllConditioned(f"Riccati residual {solution.residual_norm:.3e} exceeds {limit:.3e}")


def _check_imaginary_axis(H: np.ndarray):
    eigenvalues = np.linalg.eigvals(H)
    closest = float(np.min(np.abs(np.real(eigenvalues))))
    if closest < IMAGINARY_AXIS_TOLERANCE:
        raise NoSolution(f"Hamiltonian has eigenvalues on the imaginary axis "
                         f"(|Re| = {closest:.3e})")


def solve_care(A, S, Qc) -> GareSolution:
    """
    Stabilizing positive definite solution of A'X + XA - XSX + Qc = 0

    Args:
        A: k×k drift
        S: symmetric quadratic weight, possibly indefinite
        Qc: symmetric PSD constant term

    Returns:
        GareSolution with a stabilizing, positive definite X

    Raises:
        NoSolution: no stabilizing PD solution exists (Hamiltonian eigenvalues
            on the imaginary axis, or the candidate fails the checks)
        IllConditioned: the subspace basis or final residual cannot be trusted
    """
    A, S, Qc = _prepare(A, S, Qc)
    k = A.shape[0]
    H = hamiltonian(A, S, Qc)
    _check_imaginary_axis(H)

    X = _subspace_solution(H, k, "lhp")
    X, residual_norm = _newton_refine(A, S, Qc, X)
    solution = _package(A, S, X, residual_norm, stabilizing=True)
    _validate(A, S, Qc, solution, require_stabilizing=True)
    logger.debug(f"solve_care k={k}: residual {residual_norm:.2e}, "
                 f"min eig {solution.min_eigenvalue:.3e}, "
                 f"abscissa {solution.closed_loop_spectral_abscissa:.3e}")
    return solution


def _anti_stabilizing(A, S, Qc):
    """PD anti-stabilizing solution, or None when there is none to compare with"""
    k = A.shape[0]
    try:
        X = _subspace_solution(hamiltonian(A, S, Qc), k, "rhp")
        X, residual_norm = _newton_refine(A, S, Qc, X)
        solution = _package(A, S, X, residual_norm, stabilizing=False)
        _validate(A, S, Qc, solution, require_stabilizing=False)
    except (NoSolution, IllConditioned, LinAlgError):
        return None
    return solution


def solve_filter_care(A, T, Wc) -> GareSolution:
    """
    Minimal positive definite solution of YA' + AY - YTY + Wc = 0

    The filter equation is the control equation for A', so the stabilizing
    solution comes from solve_care(A', T, Wc). If the anti-stabilizing
    solution is also positive definite and smaller in the Loewner order, it is
    returned instead (flagged stabilizing=False).
    """
    A, T, Wc = _prepare(A, T, Wc)
    stabilizing = solve_care(A.T, T, Wc)

    anti = _anti_stabilizing(A.T, T, Wc)
    if anti is not None and loewner_leq(anti.X, stabilizing.X) \
            and not np.allclose(anti.X, stabilizing.X):
        logger.info("filter GARE: anti-stabilizing solution is the minimal PD solution")
        return anti
    return stabilizing
