"""Pure- and mixed-state containers.

Basis convention used everywhere in the package: qubit 0 is the
least-significant bit of the computational-basis index, so the basis state
with only qubit ``q`` excited has index ``1 << q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _width_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    data: np.ndarray

    @property
    def num_qubits(self) -> int:
        return _width_from_dim(self.data.shape[0])

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        psi = np.zeros(1 << n_qubits, dtype=complex)
        psi[0] = 1.0
        return cls(psi)

    @classmethod
    def basis(cls, n_qubits: int, occupied) -> StateVector:
        """Computational basis state with the given qubits set to 1."""
        psi = np.zeros(1 << n_qubits, dtype=complex)
        index = 0
        for q in occupied:
            index |= 1 << q
        psi[index] = 1.0
        return cls(psi)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.data, self.data.conj()))

    def fidelity(self, other: StateVector) -> float:
        return float(abs(np.vdot(self.data, other.data)) ** 2)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray

    @property
    def num_qubits(self) -> int:
        return _width_from_dim(self.data.shape[0])

    @classmethod
    def zero(cls, n_qubits: int) -> DensityMatrix:
        rho = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.data)), 0.0, None)

    def is_valid(self, tol: float = 1e-10, eig_tol: float = 1e-8) -> bool:
        rho = self.data
        if abs(np.trace(rho) - 1.0) > tol:
            return False
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            return False
        return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -eig_tol)


def as_array(state) -> np.ndarray:
    if isinstance(state, (StateVector, DensityMatrix)):
        return state.data
    return np.asarray(state)
