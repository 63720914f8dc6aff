"""
RiskTrack System Model
Single-agent model matrices and the assembled n-pursuer group
"""

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict

import numpy as np

from src.errors import ConfigError
from src.model.kron import (StructuredMatrix, all_ones, as_matrix, frozen,
                            identity, ones_column)

MATRIX_FIELDS = ("A", "B", "C", "F", "G", "H", "Q", "R")

_SYMMETRY_TOL = 1e-10


def _check_symmetric(name: str, matrix: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if not np.allclose(matrix, matrix.T, atol=_SYMMETRY_TOL * scale, rtol=0.0):
        raise ConfigError(f"{name} must be symmetric", field=name)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """
    Pursuer / evader model

    Relative state x_i = x_p,i - x_e evolves as
        dx_i = (A x_i + B u_i) dt + √ε F dw_p,i - G dw_e
    with measurement y_i = C x_i + H v_i and running cost
    (x_i' Q x_i + u_i' R u_i).
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        for name in MATRIX_FIELDS:
            object.__setattr__(self, name, frozen(getattr(self, name)))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        self._validate()

    def _validate(self):
        d = self.A.shape[0]
        m = self.B.shape[1]
        p = self.C.shape[0]
        expected = {
            "A": (d, d), "B": (d, m), "C": (p, d), "F": (d, None), "G": (d, None),
            "H": (p, None), "Q": (d, d), "R": (m, m),
        }
        for name, (rows, cols) in expected.items():
            shape = getattr(self, name).shape
            if shape[0] != rows or (cols is not None and shape[1] != cols):
                want = f"{rows}x{cols if cols is not None else '*'}"
                raise ConfigError(f"{name} has shape {shape[0]}x{shape[1]}, expected {want}",
                                  field=name)

        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be finite and >= 0, got {self.epsilon}",
                              field="epsilon")
        for name in MATRIX_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} has non-finite entries", field=name)

        _check_symmetric("Q", self.Q)
        _check_symmetric("R", self.R)
        if np.min(np.linalg.eigvalsh(self.Q)) < -_SYMMETRY_TOL * max(1.0, np.abs(self.Q).max()):
            raise ConfigError("Q must be positive semidefinite", field="Q")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError:
            raise ConfigError("R must be positive definite", field="R") from None
        try:
            np.linalg.cholesky(self.V)
        except np.linalg.LinAlgError:
            raise ConfigError("V = HH' must be positive definite", field="H") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.epsilon == other.epsilon and
                all(np.array_equal(getattr(self, f), getattr(other, f)) for f in MATRIX_FIELDS))

    __hash__ = None

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def W(self) -> np.ndarray:
        """Evader noise intensity GG'"""
        return frozen(self.G @ self.G.T)

    @cached_property
    def Z(self) -> np.ndarray:
        """Pursuer noise intensity FF'"""
        return frozen(self.F @ self.F.T)

    @cached_property
    def V(self) -> np.ndarray:
        """Measurement noise intensity HH'"""
        return frozen(self.H @ self.H.T)

    @cached_property
    def R_inv(self) -> np.ndarray:
        return frozen(np.linalg.inv(self.R))

    @cached_property
    def V_inv(self) -> np.ndarray:
        return frozen(np.linalg.inv(self.V))

    def with_epsilon(self, epsilon: float) -> "SystemSpec":
        return dataclasses.replace(self, epsilon=epsilon)

    def to_dict(self) -> Dict[str, Any]:
        data = {name: getattr(self, name).tolist() for name in MATRIX_FIELDS}
        data["epsilon"] = self.epsilon
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemSpec":
        missing = [name for name in MATRIX_FIELDS if name not in data]
        if missing:
            raise ConfigError(f"missing system matrices: {', '.join(missing)}",
                              field=missing[0])
        matrices = {}
        for name in MATRIX_FIELDS:
            try:
                matrices[name] = as_matrix(data[name])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name} is not a numeric matrix: {e}", field=name) from None
        return cls(epsilon=float(data.get("epsilon", 0.0)), **matrices)


def basic_example(d: int = 1, epsilon: float = 0.0) -> SystemSpec:
    """
    Integrator pursuers chasing a Brownian evader

    A = 0, B = C = F = G = H = I_d, Q = R = I_d.
    """
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}", field="d")
    eye = np.eye(d)
    return SystemSpec(A=np.zeros((d, d)), B=eye, C=eye, F=eye, G=eye, H=eye,
                      Q=eye, R=eye, epsilon=epsilon)


PRESETS = {"basic": basic_example}


@dataclass(frozen=True, eq=False)
class MultiAgentSystem:
    """
    n identical pursuers in Kronecker form

    Block-diagonal fields are I_n ⊗ (·); the evader enters every agent
    through G_n = 1_n ⊗ G, so W_n = G_n G_n' = E_n ⊗ W.
    """
    spec: SystemSpec
    n: int

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def epsilon(self) -> float:
        return self.spec.epsilon

    @cached_property
    def I_n(self) -> np.ndarray:
        return frozen(identity(self.n))

    @cached_property
    def E_n(self) -> np.ndarray:
        return frozen(all_ones(self.n))

    @cached_property
    def ones_n(self) -> np.ndarray:
        return frozen(ones_column(self.n))

    def _block_diagonal(self, block) -> StructuredMatrix:
        return StructuredMatrix.kron(self.I_n, block)

    @cached_property
    def A_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.A)

    @cached_property
    def B_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.B)

    @cached_property
    def C_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.C)

    @cached_property
    def F_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.F)

    @cached_property
    def H_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.H)

    @cached_property
    def Z_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.Z)

    @cached_property
    def V_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.V)

    @cached_property
    def Q_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.Q)

    @cached_property
    def R_n(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.R)

    @cached_property
    def R_n_inv(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.R_inv)

    @cached_property
    def V_n_inv(self) -> StructuredMatrix:
        return self._block_diagonal(self.spec.V_inv)

    @cached_property
    def G_n(self) -> StructuredMatrix:
        return StructuredMatrix.kron(self.ones_n, self.spec.G)

    @cached_property
    def W_n(self) -> StructuredMatrix:
        return StructuredMatrix.kron(self.E_n, self.spec.W)

    @cached_property
    def process_noise(self) -> StructuredMatrix:
        """W_n + εZ_n"""
        return self.W_n + self.Z_n.scale(self.epsilon)

    @cached_property
    def measurement_information(self) -> StructuredMatrix:
        """C_n' V_n⁻¹ C_n"""
        return self.C_n.T @ self.V_n_inv @ self.C_n


def assemble(spec: SystemSpec, n: int) -> MultiAgentSystem:
    """
    Assemble the n-pursuer system

    Args:
        spec: single-agent model
        n: number of pursuers (>= 1)

    Returns:
        MultiAgentSystem with every block field in Kronecker form
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ConfigError(f"number of agents must be an integer >= 1, got {n!r}", field="n")
    return MultiAgentSystem(spec=spec, n=int(n))
