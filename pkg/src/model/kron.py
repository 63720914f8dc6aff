"""
RiskTrack Kronecker Algebra
Block matrices of homogeneous agent groups, kept as sums of Kronecker products

A StructuredMatrix stores its factors (P_k ⊗ M_k) and only materializes the
dense (n·d)×(n·d) array when asked. Products use the mixed-product rule
(A ⊗ B)(C ⊗ D) = AC ⊗ BD, so group-level algebra stays at block size.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Union

import numpy as np
from scipy.linalg import null_space

from src.errors import NonDiagonalizable
from src.utils.logger import setup_logger

logger = setup_logger("kron")

# Eigenvector-matrix condition number above which a block counts as defective
DIAGONALIZABLE_COND_LIMIT = 1e8


def as_matrix(value) -> np.ndarray:
    """Promote scalars / vectors / nested lists to a 2-D float array"""
    array = np.array(value, dtype=float)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        array = array.reshape(-1, 1)
    elif array.ndim != 2:
        raise ValueError(f"expected a matrix, got an array with {array.ndim} dimensions")
    return array


def frozen(value) -> np.ndarray:
    """Read-only 2-D copy; structured types are immutable after construction"""
    array = as_matrix(value).copy()
    array.setflags(write=False)
    return array


def kron(A, B) -> np.ndarray:
    """Kronecker product of two matrices, (m·p)×(n·q)"""
    return np.kron(as_matrix(A), as_matrix(B))


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def ones_column(n: int) -> np.ndarray:
    """1_n"""
    return np.ones((n, 1))


def all_ones(n: int) -> np.ndarray:
    """E_n = 1_n 1_n'"""
    return np.ones((n, n))


@dataclass(frozen=True)
class KronTerm:
    """One summand P ⊗ M: P acts across agents, M within an agent block"""
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", frozen(self.left))
        object.__setattr__(self, "right", frozen(self.right))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.left.shape[0] * self.right.shape[0],
                self.left.shape[1] * self.right.shape[1])

    def dense(self) -> np.ndarray:
        return np.kron(self.left, self.right)


Operand = Union["StructuredMatrix", np.ndarray, float, int]


@dataclass(frozen=True, eq=False)
class StructuredMatrix:
    """
    Sum of Kronecker products Σ_k P_k ⊗ M_k with a lazily built dense form

    All terms share the same left (agent-level) and right (block-level)
    shapes, which keeps the mixed-product rule applicable term by term.
    """
    terms: Tuple[KronTerm, ...]

    # ndarray operands defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a structured matrix needs at least one term")
        left_shape = self.terms[0].left.shape
        right_shape = self.terms[0].right.shape
        for term in self.terms[1:]:
            if term.left.shape != left_shape or term.right.shape != right_shape:
                raise ValueError("all Kronecker terms must have matching factor shapes")

    @classmethod
    def kron(cls, left, right) -> "StructuredMatrix":
        return cls((KronTerm(left, right),))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.terms[0].shape

    @property
    def left_shape(self) -> Tuple[int, int]:
        return self.terms[0].left.shape

    @property
    def right_shape(self) -> Tuple[int, int]:
        return self.terms[0].right.shape

    @cached_property
    def dense(self) -> np.ndarray:
        result = np.zeros(self.shape)
        for term in self.terms:
            result += term.dense()
        result.setflags(write=False)
        return result

    @property
    def T(self) -> "StructuredMatrix":
        return StructuredMatrix(tuple(KronTerm(t.left.T, t.right.T) for t in self.terms))

    def scale(self, factor: float) -> "StructuredMatrix":
        return StructuredMatrix(tuple(KronTerm(t.left, factor * t.right) for t in self.terms))

    def trace(self) -> float:
        """Tr(P ⊗ M) = Tr(P)·Tr(M), summed over terms"""
        if self.shape[0] != self.shape[1]:
            raise ValueError("trace of a non-square structured matrix")
        if self.left_shape[0] != self.left_shape[1]:
            return float(np.trace(self.dense))
        return float(sum(np.trace(t.left) * np.trace(t.right) for t in self.terms))

    def __add__(self, other: Operand) -> "StructuredMatrix":
        if not isinstance(other, StructuredMatrix):
            return NotImplemented
        if other.left_shape != self.left_shape or other.right_shape != self.right_shape:
            raise ValueError(f"cannot add structured matrices with factor shapes "
                             f"{self.left_shape}/{self.right_shape} and "
                             f"{other.left_shape}/{other.right_shape}")
        return StructuredMatrix(self.terms + other.terms)

    def __sub__(self, other: Operand) -> "StructuredMatrix":
        if not isinstance(other, StructuredMatrix):
            return NotImplemented
        return self + other.scale(-1.0)

    def __neg__(self) -> "StructuredMatrix":
        return self.scale(-1.0)

    def __mul__(self, factor) -> "StructuredMatrix":
        if isinstance(factor, (int, float, np.floating, np.integer)):
            return self.scale(float(factor))
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other: Operand):
        if isinstance(other, StructuredMatrix):
            if self.left_shape[1] != other.left_shape[0] or self.right_shape[1] != other.right_shape[0]:
                raise ValueError("structured factors are not conformable")
            return StructuredMatrix(tuple(
                KronTerm(a.left @ b.left, a.right @ b.right)
                for a in self.terms for b in other.terms
            ))
        return self.dense @ np.asarray(other)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.dense

    def __repr__(self) -> str:
        return (f"StructuredMatrix(shape={self.shape}, terms={len(self.terms)}, "
                f"block={self.right_shape})")


@dataclass(frozen=True, eq=False)
class StructuredSpectrum:
    """Spectrum of I_n ⊗ M + (E_n/n) ⊗ N, split by the Kronecker eigen lemma"""
    bulk_eigenvalues: np.ndarray
    coupled_eigenvalues: np.ndarray
    n: int
    bulk_vectors: np.ndarray
    coupled_vectors: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.bulk_eigenvalues, self.coupled_eigenvalues])

    @property
    def eigenvectors(self) -> np.ndarray:
        return np.hstack([self.bulk_vectors, self.coupled_vectors])

    def __len__(self) -> int:
        return len(self.bulk_eigenvalues) + len(self.coupled_eigenvalues)


def coupled_sum(M, N, n: int) -> StructuredMatrix:
    """I_n ⊗ M + (E_n/n) ⊗ N"""
    return (StructuredMatrix.kron(identity(n), M)
            + StructuredMatrix.kron(all_ones(n) / n, N))


def _diagonalize(matrix: np.ndarray, label: str, cond_limit: float):
    values, vectors = np.linalg.eig(matrix)
    condition = np.linalg.cond(vectors)
    if not np.isfinite(condition) or condition > cond_limit:
        raise NonDiagonalizable(
            f"{label} is not numerically diagonalizable "
            f"(eigenvector condition number {condition:.3g} > {cond_limit:g})")
    return values, vectors


def match_multisets(a, b) -> float:
    """Largest distance in a greedy nearest-neighbour pairing of two spectra"""
    a = np.asarray(a, dtype=complex).ravel()
    remaining = list(np.asarray(b, dtype=complex).ravel())
    if len(a) != len(remaining):
        return float("inf")
    worst = 0.0
    for value in a[np.argsort(-np.abs(a))]:
        distances = np.abs(np.array(remaining) - value)
        index = int(np.argmin(distances))
        worst = max(worst, float(distances[index]))
        remaining.pop(index)
    return worst


def struct_eigs(M, N, n: int, check: bool = None,
                cond_limit: float = DIAGONALIZABLE_COND_LIMIT) -> StructuredSpectrum:
    """
    Eigen-decomposition of I_n ⊗ M + (E_n/n) ⊗ N from its d×d blocks

    The eigenvalues are those of M with multiplicity n-1 and those of M+N.
    Eigenvectors are y ⊗ w for y spanning ker(E_n) and w eigenvectors of M,
    and 1_n ⊗ v for v eigenvectors of M+N.

    Args:
        M, N: d×d blocks; M and M+N must be diagonalizable
        n: number of blocks (>= 1)
        check: cross-validate against a dense eigensolver
            (default: when n·d <= 256)
        cond_limit: eigenvector condition number threshold

    Returns:
        StructuredSpectrum

    Raises:
        NonDiagonalizable: when either block fails the conditioning check
    """
    M = as_matrix(M)
    N = as_matrix(N)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if M.shape != N.shape or M.shape[0] != M.shape[1]:
        raise ValueError("M and N must be square blocks of equal size")
    d = M.shape[0]

    bulk_values, bulk_block_vectors = _diagonalize(M, "M", cond_limit)
    coupled_values, coupled_block_vectors = _diagonalize(M + N, "M+N", cond_limit)

    kernel = null_space(np.ones((1, n))) if n > 1 else np.zeros((1, 0))
    bulk_vectors = np.kron(kernel, bulk_block_vectors)
    coupled_vectors = np.kron(ones_column(n) / np.sqrt(n), coupled_block_vectors)
    spectrum = StructuredSpectrum(
        bulk_eigenvalues=np.tile(bulk_values, n - 1),
        coupled_eigenvalues=coupled_values,
        n=n,
        bulk_vectors=bulk_vectors,
        coupled_vectors=coupled_vectors,
    )

    if check is None:
        check = n * d <= 256
    if check:
        dense_values = np.linalg.eigvals(coupled_sum(M, N, n).dense)
        scale = max(1.0, float(np.max(np.abs(dense_values))))
        gap = match_multisets(spectrum.eigenvalues, dense_values)
        if gap > 1e-8 * scale:
            raise NonDiagonalizable(
                f"structured spectrum disagrees with dense eigensolver (gap {gap:.3g})")
        logger.debug(f"struct_eigs n={n} d={d}: dense cross-check gap {gap:.2e}")

    return spectrum
