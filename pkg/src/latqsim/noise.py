"""Stochastic Pauli-trajectory noise emulation.

Each trajectory is a pure state. After every gate a random non-identity
Pauli may be inserted on the gate's support, idle qubits pick up Z errors
per scheduling layer, and readout bits flip independently. Averaging over
trajectories recovers the corresponding Pauli channels.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._rng import rng_for
from .pauli import PauliSum
from .schedule import schedule
from .statevector import (
    Barrier,
    Circuit,
    Counts,
    Measure,
    PauliRotation,
    StateVector,
    apply_gate_batch,
    expectation_batch,
)

# trajectories per batch: about 2**20 amplitudes, so narrow registers pay less per-gate overhead
CHUNK_AMPLITUDES = 1 << 20
CHUNK_MIN, CHUNK_MAX = 64, 16384
THREADS_ENV = "LATQSIM_THREADS"


def _as_probs(value, n: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing, readout flips, idle dephasing and ZZ over-rotation.

    ``p_read_01`` is P(read 1 | prepared 0); ``p_read_10`` is P(read 0 | prepared 1).
    Either may be a scalar (applied to every qubit) or a per-qubit sequence.
    """

    p1: float = 0.0
    p2: float = 0.0
    p_read_01: float | tuple[float, ...] = 0.0
    p_read_10: float | tuple[float, ...] = 0.0
    idle_dephase_rate: float = 0.0
    coherent_zz_over_rotation: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "idle_dephase_rate"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("p_read_01", "p_read_10"):
            v = getattr(self, name)
            if not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(x) for x in v))
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError(f"{name} must lie in [0, 1]")

    def readout(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return _as_probs(self.p_read_01, n, "p_read_01"), _as_probs(self.p_read_10, n, "p_read_10")

    @property
    def has_gate_noise(self) -> bool:
        return self.p1 > 0 or self.p2 > 0 or self.idle_dephase_rate > 0

    @property
    def has_readout_noise(self) -> bool:
        return bool(np.any(np.asarray(self.p_read_01) > 0) or np.any(np.asarray(self.p_read_10) > 0))

    def for_qubits(self, physical: list[int]) -> NoiseModel:
        """Restrict per-qubit readout arrays to the listed qubits."""
        def pick(v):
            return v if np.isscalar(v) else tuple(v[p] for p in physical)

        return replace(self, p_read_01=pick(self.p_read_01), p_read_10=pick(self.p_read_10))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("p_read_01", "p_read_10"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> NoiseModel:
        return cls(**data)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _noisy_gate(g, noise: NoiseModel):
    if noise.coherent_zz_over_rotation and isinstance(g, PauliRotation) and g.is_zz():
        return PauliRotation(g.term, g.angle + noise.coherent_zz_over_rotation)
    return g


def _error_prob(g, noise: NoiseModel) -> float:
    if isinstance(g, (Barrier, Measure)):
        return 0.0
    return noise.p1 if len(g.qubits) == 1 else noise.p2


def _apply_random_paulis(psi, qubits, hit, rng, n):
    """Apply a uniformly random non-identity Pauli on ``qubits`` to rows in ``hit``."""
    rows = np.nonzero(hit)[0]
    if rows.size == 0:
        return psi
    k = len(qubits)
    codes = rng.integers(1, 4**k, size=rows.size)  # base-4 digits: 0=I 1=X 2=Y 3=Z
    t = psi.reshape((psi.shape[0],) + (2,) * n)
    for j, q in enumerate(qubits):
        digit = (codes // 4**j) % 4
        flip = rows[(digit == 1) | (digit == 2)]
        phase = rows[(digit == 2) | (digit == 3)]
        if phase.size:
            idx = [phase] + [slice(None)] * n
            idx[1 + q] = 1
            t[tuple(idx)] *= -1
        if flip.size:
            t[flip] = np.flip(t[flip], axis=1 + q)
    return psi


def _apply_z_errors(psi, qubits, rate, rng, n):
    t = psi.reshape((psi.shape[0],) + (2,) * n)
    for q in qubits:
        rows = np.nonzero(rng.random(psi.shape[0]) < rate)[0]
        if rows.size:
            idx = [rows] + [slice(None)] * n
            idx[1 + q] = 1
            t[tuple(idx)] *= -1
    return psi


def _layered(circuit: Circuit):
    """Gates grouped by ASAP layer, plus idle qubits per layer."""
    sched = schedule(circuit)
    layers: list[list] = [[] for _ in range(sched.depth)]
    for g, layer in zip(circuit.gates, sched.layers):
        if layer is not None:
            layers[layer].append(g)
    return [(layers[k], sched.idle_qubits(k)) for k in range(sched.depth)]


def evolve_trajectories(circuit: Circuit, state0: StateVector, noise: NoiseModel, n: int, rng) -> np.ndarray:
    """Final states of ``n`` noisy trajectories, shape ``(n, 2**width)``."""
    width = circuit.n_qubits
    psi = np.repeat(state0.amplitudes[None, :], n, axis=0)
    for gates, idle in _layered(circuit):
        for g in gates:
            psi = apply_gate_batch(psi, _noisy_gate(g, noise), width)
            p = _error_prob(g, noise)
            if p > 0:
                psi = _apply_random_paulis(psi, g.qubits, rng.random(n) < p, rng, width)
        if noise.idle_dephase_rate > 0 and idle:
            psi = _apply_z_errors(psi, idle, noise.idle_dephase_rate, rng, width)
    return psi


def chunk_size(width: int) -> int:
    return int(np.clip(CHUNK_AMPLITUDES >> width, CHUNK_MIN, CHUNK_MAX))


def _chunks(total: int, width: int):
    size = chunk_size(width)
    return [(i, min(size, total - i * size)) for i in range((total + size - 1) // size)]


def _flip_readout(indices: np.ndarray, noise: NoiseModel, width: int, rng) -> np.ndarray:
    if not noise.has_readout_noise:
        return indices
    p01, p10 = noise.readout(width)
    out = indices.copy()
    for q in range(width):
        bit = 1 << (width - 1 - q)
        is_one = (indices & bit) != 0
        u = rng.random(indices.size)
        flip = np.where(is_one, u < p10[q], u < p01[q])
        out ^= np.where(flip, bit, 0)
    return out


def _born_draw(psi: np.ndarray, rng) -> np.ndarray:
    probs = np.abs(psi) ** 2
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(psi.shape[0])[:, None]
    return np.minimum((cdf < u).sum(axis=1), psi.shape[1] - 1)


def run_noisy(circuit: Circuit, state0: StateVector, noise: NoiseModel, shots: int, seed: int) -> Counts:
    """One trajectory per shot; deterministic given ``seed``."""
    if shots < 1:
        raise ValueError("shots must be positive")
    width = circuit.n_qubits
    if not noise.has_gate_noise:
        # every trajectory is identical: simulate once, then draw shots
        psi = evolve_trajectories(circuit, state0, noise, 1, None)[0]
        rng = rng_for(seed, "noisy", "direct")
        probs = np.abs(psi) ** 2
        idx = rng.choice(probs.size, size=shots, p=probs / probs.sum())
        return Counts.from_indices(_flip_readout(idx, noise, width, rng), width)

    def work(chunk):
        k, size = chunk
        rng = rng_for(seed, "noisy", k)
        psi = evolve_trajectories(circuit, state0, noise, size, rng)
        return _flip_readout(_born_draw(psi, rng), noise, width, rng)

    idx = np.concatenate(_parallel_map(work, _chunks(shots, width)))
    return Counts.from_indices(idx, width)


def trajectory_expectations(
    circuit: Circuit, state0: StateVector, noise: NoiseModel, obs: PauliSum, n: int, seed: int
) -> np.ndarray:
    """Exact ``<O>`` on each of ``n`` trajectory final states (readout noise not applied)."""

    def work(chunk):
        k, size = chunk
        psi = evolve_trajectories(circuit, state0, noise, size, rng_for(seed, "traj", k))
        return expectation_batch(psi, obs)

    if not noise.has_gate_noise:
        psi = evolve_trajectories(circuit, state0, noise, 1, None)
        return np.repeat(expectation_batch(psi, obs), n)
    return np.concatenate(_parallel_map(work, _chunks(n, circuit.n_qubits)))


def average_fidelity(
    circuit: Circuit, state0: StateVector, noise: NoiseModel, n: int, seed: int, ideal: StateVector | None = None
) -> float:
    """Mean ``|<ideal|psi_traj>|^2`` over ``n`` trajectories."""
    if ideal is None:
        ideal_psi = evolve_trajectories(circuit, state0, NoiseModel(), 1, None)[0]
    else:
        ideal_psi = ideal.amplitudes

    def work(chunk):
        k, size = chunk
        psi = evolve_trajectories(circuit, state0, noise, size, rng_for(seed, "fid", k))
        return np.abs(psi @ ideal_psi.conj()) ** 2

    return float(np.mean(np.concatenate(_parallel_map(work, _chunks(n, circuit.n_qubits)))))
