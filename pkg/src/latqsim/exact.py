"""Dense exact evolution by eigendecomposition (reference oracle)."""

from __future__ import annotations

from collections.abc import Sequence
from functools import cached_property

import numpy as np

from .observables import TimeSeries
from .pauli import DENSE_MAX_QUBITS, PauliSum, WidthMismatchError, to_dense_matrix
from .statevector import StateVector, expectation


class DenseEvolution:
    """``exp(-i H t)`` for a Hermitian Pauli sum; eigenpairs computed on first use."""

    def __init__(self, matrix: np.ndarray, n_qubits: int):
        if not np.allclose(matrix, matrix.conj().T, atol=1e-10, rtol=0):
            raise ValueError("Hamiltonian matrix is not Hermitian")
        self.matrix = matrix
        self.n_qubits = n_qubits

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    def evolve(self, psi0: StateVector, t: float) -> StateVector:
        if psi0.n_qubits != self.n_qubits:
            raise WidthMismatchError(f"state width {psi0.n_qubits} != Hamiltonian width {self.n_qubits}")
        vals, vecs = self._eig
        coeffs = vecs.conj().T @ psi0.amplitudes
        return StateVector(vecs @ (np.exp(-1j * vals * t) * coeffs), self.n_qubits)


def build(s: PauliSum, max_qubits: int = DENSE_MAX_QUBITS) -> DenseEvolution:
    if s.n_qubits > max_qubits:
        raise ValueError(f"{s.n_qubits} qubits exceeds dense cap of {max_qubits}")
    if not s.is_hermitian():
        raise ValueError("Pauli sum is not Hermitian")
    return DenseEvolution(to_dense_matrix(s, max_qubits), s.n_qubits)


def evolve(d: DenseEvolution, psi0: StateVector, t: float) -> StateVector:
    return d.evolve(psi0, t)


def exact_observable_series(d: DenseEvolution, psi0: StateVector, obs: PauliSum, times: Sequence[float]) -> TimeSeries:
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    values = [expectation(d.evolve(psi0, t), obs) for t in times]
    return TimeSeries(list(times), values, [0.0] * len(values), {"method": "exact"})


def exact_return_probability(d: DenseEvolution, psi0: StateVector, times: Sequence[float]) -> TimeSeries:
    values = [abs(np.vdot(psi0.amplitudes, d.evolve(psi0, t).amplitudes)) ** 2 for t in times]
    return TimeSeries(list(times), values, [0.0] * len(values), {"method": "exact", "observable": "return_probability"})
