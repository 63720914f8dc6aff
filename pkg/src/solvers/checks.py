"""
Rank and spectrum checks shared by the solvers and synthesis code
"""

from typing import Optional

import numpy as np

RANK_TOLERANCE = 1e-10


def spectral_abscissa(matrix) -> float:
    """Largest real part of the eigenvalues"""
    return float(np.max(np.real(np.linalg.eigvals(np.atleast_2d(matrix)))))


def spectral_radius(matrix) -> float:
    """Largest eigenvalue magnitude"""
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(matrix)))))


def symmetrize(matrix) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def controllability_matrix(A, B, depth: Optional[int] = None) -> np.ndarray:
    """
    Kalman matrix [B, AB, ..., A^(depth-1) B]

    depth defaults to dim(A); a smaller depth is exact whenever it bounds the
    degree of A's minimal polynomial (I_n ⊗ A shares the minimal polynomial
    of A, so depth = d suffices for a block-diagonal group).
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    depth = A.shape[0] if depth is None else depth
    blocks = [B]
    for _ in range(depth - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def numerical_rank(matrix, tolerance: float = RANK_TOLERANCE) -> int:
    """Rank with singular-value threshold tolerance·‖matrix‖₂"""
    singular_values = np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > tolerance * singular_values[0]))


def is_controllable(A, B, depth: Optional[int] = None) -> bool:
    A = np.atleast_2d(A)
    return numerical_rank(controllability_matrix(A, B, depth)) == A.shape[0]


def is_observable(A, C, depth: Optional[int] = None) -> bool:
    return is_controllable(np.atleast_2d(A).T, np.atleast_2d(C).T, depth)


def is_positive_definite(matrix, relative_tolerance: float = 0.0) -> bool:
    """λ_min > relative_tolerance·‖matrix‖₂ for the symmetric part"""
    matrix = symmetrize(np.atleast_2d(matrix))
    eigenvalues = np.linalg.eigvalsh(matrix)
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return bool(eigenvalues[0] > relative_tolerance * scale)


def loewner_leq(X, Y, tolerance: float = 1e-10) -> bool:
    """X ⪯ Y, up to tolerance·max(1, ‖X‖₂, ‖Y‖₂)"""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    eigenvalues = np.linalg.eigvalsh(symmetrize(Y - X))
    scale = max(1.0, float(np.linalg.norm(X, 2)), float(np.linalg.norm(Y, 2)))
    return bool(eigenvalues[0] >= -tolerance * scale)
