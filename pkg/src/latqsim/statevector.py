"""Dense statevector simulation: gate IR, circuits, kernels, sampling.

Kernels act on arrays of shape ``(batch, 2**n)`` so that independent noise
trajectories can be advanced together; :class:`StateVector` is the
single-state wrapper used by the public API.
"""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ._rng import rng_for
from .pauli import PAULI_MATRICES, PauliSum, PauliTerm, WidthMismatchError

MAX_QUBITS = 16
UNITARY_TOL = 1e-10


class NotUnitaryError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


def _check_unitary(mat: np.ndarray, dim: int) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {mat.shape}")
    if not np.allclose(mat.conj().T @ mat, np.eye(dim), atol=UNITARY_TOL, rtol=0):
        raise NotUnitaryError("matrix is not unitary within 1e-10")
    mat.setflags(write=False)
    return mat


# -- gates -----------------------------------------------------------------


@dataclass(frozen=True)
class PauliRotation:
    """``exp(-i * angle/2 * P)`` for a unit-coefficient Pauli string ``P``."""

    term: PauliTerm
    angle: float

    def __post_init__(self):
        c = self.term.coefficient
        if abs(c.imag) > 1e-12 or abs(abs(c.real) - 1) > 1e-12:
            raise ValueError("rotation generator must have coefficient +1 or -1")
        if self.term.is_identity:
            raise ValueError("rotation generator must not be the identity")
        angle = float(self.angle) * (1 if c.real > 0 else -1)
        object.__setattr__(self, "angle", angle)
        object.__setattr__(self, "term", self.term.with_coefficient(1.0))

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.term.support

    @property
    def label(self) -> str:
        return "r" + "".join(a.lower() for _, a in self.term.paulis)

    def is_zz(self) -> bool:
        return self.term.weight == 2 and self.term.is_diagonal

    def inverse(self) -> PauliRotation:
        return PauliRotation(self.term, -self.angle)

    def remap(self, mapping, n_qubits: int) -> PauliRotation:
        ops = {mapping[q]: a for q, a in self.term.paulis}
        return PauliRotation(PauliTerm(1.0, ops, n_qubits), self.angle)

    def matrix(self) -> np.ndarray:
        """Dense matrix on the gate's own support (support order)."""
        k = self.term.weight
        local = PauliTerm(1.0, {i: a for i, (_, a) in enumerate(self.term.paulis)}, k)
        from .pauli import to_dense_matrix

        p = to_dense_matrix(local)
        return np.cos(self.angle / 2) * np.eye(1 << k) - 1j * np.sin(self.angle / 2) * p


@dataclass(frozen=True, eq=False)
class Unitary1Q:
    qubit: int
    matrix: np.ndarray
    name: str = "u1"

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_unitary(self.matrix, 2))

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    @property
    def label(self) -> str:
        return self.name

    def inverse(self) -> Unitary1Q:
        return Unitary1Q(self.qubit, self.matrix.conj().T, _inverse_name(self.name))

    def remap(self, mapping, n_qubits: int) -> Unitary1Q:
        return Unitary1Q(mapping[self.qubit], self.matrix, self.name)


@dataclass(frozen=True, eq=False)
class Unitary2Q:
    """Two-qubit unitary; ``qubits[0]`` is the more significant factor of ``matrix``."""

    qubits: tuple[int, int]
    matrix: np.ndarray
    name: str = "u2"

    def __post_init__(self):
        a, b = (int(q) for q in self.qubits)
        if a == b:
            raise ValueError("two-qubit gate needs distinct qubits")
        object.__setattr__(self, "qubits", (a, b))
        object.__setattr__(self, "matrix", _check_unitary(self.matrix, 4))

    @property
    def label(self) -> str:
        return self.name

    def inverse(self) -> Unitary2Q:
        return Unitary2Q(self.qubits, self.matrix.conj().T, _inverse_name(self.name))

    def remap(self, mapping, n_qubits: int) -> Unitary2Q:
        return Unitary2Q((mapping[self.qubits[0]], mapping[self.qubits[1]]), self.matrix, self.name)


@dataclass(frozen=True)
class Swap:
    a: int
    b: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.a, self.b)

    label = "swap"

    def inverse(self) -> Swap:
        return self

    def remap(self, mapping, n_qubits: int) -> Swap:
        return Swap(mapping[self.a], mapping[self.b])


@dataclass(frozen=True)
class Barrier:
    """Scheduling fence; an empty ``on`` means all qubits."""

    on: tuple[int, ...] = ()

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(self.on)

    label = "barrier"

    def inverse(self) -> Barrier:
        return self

    def remap(self, mapping, n_qubits: int) -> Barrier:
        return Barrier(tuple(mapping[q] for q in self.on))


@dataclass(frozen=True)
class Measure:
    on: tuple[int, ...]

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(self.on)

    label = "measure"

    def remap(self, mapping, n_qubits: int) -> Measure:
        return Measure(tuple(mapping[q] for q in self.on))


Gate = Union[PauliRotation, Unitary1Q, Unitary2Q, Swap, Barrier, Measure]

_INVERSE_NAMES = {"s": "sdg", "sdg": "s", "t": "tdg", "tdg": "t"}


def _inverse_name(name: str) -> str:
    return _INVERSE_NAMES.get(name, name)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def h(q: int) -> Unitary1Q:
    return Unitary1Q(q, _H, "h")


def s(q: int) -> Unitary1Q:
    return Unitary1Q(q, _S, "s")


def sdg(q: int) -> Unitary1Q:
    return Unitary1Q(q, _S.conj(), "sdg")


def pauli_gate(q: int, axis: str, name: str | None = None) -> Unitary1Q:
    return Unitary1Q(q, PAULI_MATRICES[axis], name or axis.lower())


def x(q: int) -> Unitary1Q:
    return pauli_gate(q, "X")


def cx(control: int, target: int) -> Unitary2Q:
    return Unitary2Q((control, target), _CX, "cx")


def rotation(paulis, angle: float, n_qubits: int) -> PauliRotation:
    return PauliRotation(PauliTerm(1.0, paulis, n_qubits), angle)


def rz(q: int, angle: float, n_qubits: int) -> PauliRotation:
    return rotation({q: "Z"}, angle, n_qubits)


def is_two_qubit(gate: Gate) -> bool:
    return isinstance(gate, (Unitary2Q, Swap)) or (
        isinstance(gate, PauliRotation) and gate.term.weight >= 2
    )


# -- circuits --------------------------------------------------------------


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        gates, self.gates = list(self.gates), []
        self.extend(gates)

    def append(self, gate: Gate) -> Circuit:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"gate {gate.label} touches qubit {q} outside width {self.n_qubits}")
        if isinstance(gate, PauliRotation) and gate.term.n_qubits != self.n_qubits:
            raise WidthMismatchError("rotation generator width differs from circuit width")
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        for g in gates:
            self.append(g)
        return self

    def __len__(self):
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def copy(self) -> Circuit:
        return Circuit(self.n_qubits, list(self.gates), dict(self.metadata))

    def unitary_gates(self) -> list[Gate]:
        return [g for g in self.gates if not isinstance(g, (Barrier, Measure))]

    def inverse(self) -> Circuit:
        """Adjoint circuit; barriers and measurements are dropped."""
        return Circuit(
            self.n_qubits, [g.inverse() for g in reversed(self.unitary_gates())], dict(self.metadata)
        )

    def count_ops(self) -> dict[str, int]:
        return dict(Counter(g.label for g in self.gates))

    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if is_two_qubit(g))

    def depth(self) -> int:
        from .schedule import schedule

        return schedule(self).depth


# -- kernels (batched) -------------------------------------------------------


def _tensor(psi: np.ndarray, n: int) -> np.ndarray:
    return psi.reshape((psi.shape[0],) + (2,) * n)


def apply_pauli_string(psi: np.ndarray, term: PauliTerm) -> np.ndarray:
    """Return ``P @ psi`` for each row of ``psi`` (coefficient ignored)."""
    n = term.n_qubits
    out = _tensor(psi, n).copy()
    phase = 1 + 0j
    for q, axis in term.paulis:
        ax = 1 + q
        if axis in ("Z", "Y"):
            idx = [slice(None)] * (n + 1)
            idx[ax] = 1
            out[tuple(idx)] *= -1
        if axis in ("X", "Y"):
            out = np.flip(out, axis=ax)
        if axis == "Y":
            phase *= 1j
    out = np.ascontiguousarray(out).reshape(psi.shape)
    if phase != 1:
        out *= phase
    return out


def apply_rotation(psi: np.ndarray, gate: PauliRotation) -> np.ndarray:
    half = gate.angle / 2
    return np.cos(half) * psi - 1j * np.sin(half) * apply_pauli_string(psi, gate.term)


# below this width a batch is cheapest as one product with the embedded 2**n x 2**n gate
DENSE_BATCH_MAX_QUBITS = 6


def _apply_local(psi: np.ndarray, qubits: tuple[int, ...], mat: np.ndarray, n: int) -> np.ndarray:
    k = len(qubits)
    t = _tensor(psi, n)
    m = mat.reshape((2,) * (2 * k))
    axes = [1 + q for q in qubits]
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the gate's output axes first
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(psi.shape)


def apply_matrix(psi: np.ndarray, qubits: tuple[int, ...], mat: np.ndarray, n: int) -> np.ndarray:
    dim = 1 << n
    if n <= DENSE_BATCH_MAX_QUBITS and psi.shape[0] > dim:
        # rows of the identity map to rows of U^T, so psi @ (that) applies U to every row
        return psi @ _apply_local(np.eye(dim, dtype=complex), qubits, mat, n)
    return _apply_local(psi, qubits, mat, n)


def apply_swap(psi: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    t = np.swapaxes(_tensor(psi, n), 1 + a, 1 + b)
    return np.ascontiguousarray(t).reshape(psi.shape)


def apply_gate_batch(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    if isinstance(gate, PauliRotation):
        return apply_rotation(psi, gate)
    if isinstance(gate, (Unitary1Q, Unitary2Q)):
        return apply_matrix(psi, gate.qubits, gate.matrix, n)
    if isinstance(gate, Swap):
        return apply_swap(psi, gate.a, gate.b, n)
    if isinstance(gate, (Barrier, Measure)):
        return psi
    raise TypeError(f"unknown gate {gate!r}")


# -- state -----------------------------------------------------------------


class StateVector:
    """Mutable dense state of ``n_qubits`` qubits (qubit 0 = most significant bit)."""

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if n_qubits is None:
            n_qubits = int(np.log2(amps.size))
        if amps.size != 1 << n_qubits:
            raise ValueError(f"{amps.size} amplitudes do not describe {n_qubits} qubits")
        self.amplitudes = amps.copy()
        self.n_qubits = n_qubits

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes, self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def init_basis(n_qubits: int, bitstring: str, max_qubits: int = MAX_QUBITS) -> StateVector:
    if n_qubits > max_qubits:
        raise ValueError(f"{n_qubits} qubits exceeds width cap {max_qubits}")
    if len(bitstring) != n_qubits or set(bitstring) - {"0", "1"}:
        raise ValueError(f"malformed bitstring {bitstring!r} for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[int(bitstring, 2)] = 1.0
    return StateVector(amps, n_qubits)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply ``gate`` in place and return ``state``."""
    for q in gate.qubits:
        if q >= state.n_qubits:
            raise WidthMismatchError(f"gate touches qubit {q} of a {state.n_qubits}-qubit state")
    if isinstance(gate, PauliRotation) and gate.term.n_qubits != state.n_qubits:
        raise WidthMismatchError("rotation generator width differs from state width")
    out = apply_gate_batch(state.amplitudes[None, :], gate, state.n_qubits)
    state.amplitudes = out[0]
    return state


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise WidthMismatchError(f"circuit width {circuit.n_qubits} != state width {state.n_qubits}")
    psi = state.amplitudes[None, :]
    for g in circuit.gates:
        psi = apply_gate_batch(psi, g, state.n_qubits)
    state.amplitudes = psi[0]
    return state


def expectation_batch(psi: np.ndarray, obs: PauliSum) -> np.ndarray:
    """Real expectation values of a Hermitian observable, one per row."""
    total = np.full(psi.shape[0], obs.identity_offset, dtype=complex) * np.sum(
        np.abs(psi) ** 2, axis=1
    )
    for t in obs.terms:
        total += t.coefficient * np.einsum("bi,bi->b", psi.conj(), apply_pauli_string(psi, t))
    if np.max(np.abs(total.imag), initial=0.0) > 1e-10:
        raise NumericalError(f"expectation has imaginary part {np.max(np.abs(total.imag)):.3g}")
    return total.real


def expectation(state: StateVector, obs: PauliSum) -> float:
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    if obs.n_qubits != state.n_qubits:
        raise WidthMismatchError("observable width differs from state width")
    return float(expectation_batch(state.amplitudes[None, :], obs)[0])


def amplitude_overlap(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.n_qubits != b.n_qubits:
        raise WidthMismatchError(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# -- sampling --------------------------------------------------------------


@dataclass
class Counts:
    """Measurement histogram keyed by bitstring (qubit 0 leftmost)."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        self.counts = {k: int(v) for k, v in sorted(self.counts.items()) if v}
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    @classmethod
    def from_indices(cls, indices: np.ndarray, n_qubits: int) -> Counts:
        values, freq = np.unique(np.asarray(indices), return_counts=True)
        return cls({format(int(v), f"0{n_qubits}b"): int(f) for v, f in zip(values, freq)}, int(freq.sum()))

    def __getitem__(self, key: str) -> int:
        return self.counts.get(key, 0)

    def __add__(self, other: Counts) -> Counts:
        merged = Counter(self.counts)
        merged.update(other.counts)
        return Counts(dict(merged), self.shots + other.shots)

    def probabilities(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}

    def to_json(self) -> str:
        return json.dumps(self.counts, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Counts:
        data = json.loads(text)
        return cls(data, sum(data.values()))


def sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.clip(probs, 0, None)
    probs = probs / probs.sum()
    freq = rng.multinomial(shots, probs)
    return np.repeat(np.arange(probs.size), freq)


def sample(state: StateVector, shots: int, seed: int) -> Counts:
    """Multinomial draw of ``shots`` outcomes from the Born distribution."""
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = rng_for(seed, "sample")
    probs = state.probabilities()
    probs = probs / probs.sum()
    freq = rng.multinomial(shots, probs)
    nz = np.nonzero(freq)[0]
    return Counts({format(int(i), f"0{state.n_qubits}b"): int(freq[i]) for i in nz}, shots)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of ``circuit`` built column by column (testing aid, small widths)."""
    n = circuit.n_qubits
    if n > 10:
        raise ValueError("dense circuit unitary limited to 10 qubits")
    psi = np.eye(1 << n, dtype=complex)
    for g in circuit.gates:
        psi = apply_gate_batch(psi, g, n)
    return psi.T
