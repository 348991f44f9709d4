"""Time-resolved observables: return probability, magnetization, modified OTOCs."""

from __future__ import annotations

import io
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._rng import derived_seed, rng_for
from .backend import Backend
from .compiler import TrotterPlan, trotterize
from .pauli import PAULI_MATRICES, PauliSum, PauliTerm
from .statevector import (
    Circuit,
    StateVector,
    Unitary1Q,
    amplitude_overlap,
    expectation_batch,
    h,
    init_basis,
    run_circuit,
    sample,
    sdg,
)

MODES = ("exact", "shots")


@dataclass
class TimeSeries:
    times: list[float]
    values: list[float]
    std_errors: list[float]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        self.values = [float(v) for v in self.values]
        self.std_errors = [float(e) for e in self.std_errors]
        if not len(self.times) == len(self.values) == len(self.std_errors):
            raise ValueError("times, values and std_errors must have equal lengths")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        for key, value in (header if header is not None else self.metadata).items():
            buf.write(f"# {key}: {value}\n")
        buf.write("t,value,std_error\n")
        for t, v, e in zip(self.times, self.values, self.std_errors):
            buf.write(f"{t!r},{v!r},{e!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> TimeSeries:
        meta: dict[str, str] = {}
        rows = []
        seen_header = False
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            if not line.strip():
                continue
            if not seen_header:
                if line.strip() != "t,value,std_error":
                    raise ValueError(f"line {lineno}: expected 't,value,std_error' header")
                seen_header = True
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 columns")
            rows.append([float(p) for p in parts])
        arr = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(arr[:, 0].tolist(), arr[:, 1].tolist(), arr[:, 2].tolist(), meta)


def _check_mode(mode: str, shots: int | None, seed: int | None, backend: Backend | None):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "shots" and (shots is None or shots < 1 or seed is None):
        raise ValueError("shots mode needs a positive shot count and a seed")
    if backend is not None and mode != "shots":
        raise ValueError("noisy backends are only supported in shots mode")


def trotter_states(plan: TrotterPlan, state0: StateVector) -> Iterator[StateVector]:
    """States after 0, 1, ..., n_steps Trotter steps."""
    step = trotterize(plan.with_steps(1))
    state = state0.copy()
    yield state.copy()
    for _ in range(plan.n_steps):
        run_circuit(state, step)
        yield state.copy()


def _basis_label(bits: str, n: int) -> str:
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise ValueError(f"initial state {bits!r} is not a computational basis label of {n} qubits")
    return bits


def return_probability(
    plan: TrotterPlan,
    psi0: str,
    mode: str = "exact",
    shots: int | None = None,
    seed: int | None = None,
    backend: Backend | None = None,
) -> TimeSeries:
    """``|<psi0|U(t)|psi0>|^2`` at every Trotter step.

    Computed from ``|overlap|^2``, so the global phase from the Hamiltonian's
    identity offset drops out.
    """
    n = plan.hamiltonian.n_qubits
    _basis_label(psi0, n)
    _check_mode(mode, shots, seed, backend)
    values, errors = [], []
    if backend is None:
        ref = init_basis(n, psi0)
        index = int(psi0, 2)
        for k, state in enumerate(trotter_states(plan, ref)):
            if mode == "exact":
                values.append(abs(amplitude_overlap(ref, state)) ** 2)
                errors.append(0.0)
            else:
                counts = sample(state, shots, derived_seed(seed, "R", k))
                r = counts[format(index, f"0{n}b")] / shots
                values.append(r)
                errors.append(math.sqrt(r * (1 - r) / shots))
    else:
        for k in range(plan.n_steps + 1):
            circuit = trotterize(plan.with_steps(k))
            v, e = backend.expect(circuit, psi0, lambda b: float(b == psi0), shots, derived_seed(seed, "R", k))
            values.append(v)
            errors.append(e)
    meta = {"observable": "return_probability", "initial_state": psi0, "mode": mode}
    if mode == "shots":
        meta.update(shots=shots, seed=seed)
    if backend is not None:
        meta["backend"] = backend.describe()
    return TimeSeries(plan.times, values, errors, meta)


def _z_means(probs: np.ndarray, n: int) -> np.ndarray:
    """``<Z_q>`` for every qubit from a probability vector."""
    t = probs.reshape((2,) * n)
    out = np.empty(n)
    for q in range(n):
        marg = t.sum(axis=tuple(a for a in range(n) if a != q))
        out[q] = marg[0] - marg[1]
    return out


def magnetization_series(
    plan: TrotterPlan,
    psi0: str,
    sites: Sequence[int] | None = None,
    mode: str = "exact",
    shots: int | None = None,
    seed: int | None = None,
    backend: Backend | None = None,
    convention: str = "half",
) -> list[TimeSeries]:
    """``<S^z_i(t)>`` per site; ``convention`` is ``half`` (S = sigma/2) or ``pauli``."""
    n = plan.hamiltonian.n_qubits
    _basis_label(psi0, n)
    _check_mode(mode, shots, seed, backend)
    if convention not in ("half", "pauli"):
        raise ValueError("convention must be 'half' or 'pauli'")
    scale = 0.5 if convention == "half" else 1.0
    sites = list(range(n)) if sites is None else [int(s) for s in sites]
    vals = np.zeros((plan.n_steps + 1, len(sites)))
    errs = np.zeros_like(vals)
    if backend is None:
        for k, state in enumerate(trotter_states(plan, init_basis(n, psi0))):
            if mode == "exact":
                vals[k] = scale * _z_means(state.probabilities(), n)[sites]
            else:
                counts = sample(state, shots, derived_seed(seed, "mag", k))
                freq = np.zeros(1 << n)
                for bits, c in counts.counts.items():
                    freq[int(bits, 2)] = c / shots
                z = _z_means(freq, n)[sites]
                vals[k] = scale * z
                errs[k] = scale * np.sqrt(np.clip(1 - z**2, 0, None) / shots)
    else:
        fns = [lambda b, q=q: 1.0 - 2.0 * (b[q] == "1") for q in sites]
        for k in range(plan.n_steps + 1):
            circuit = trotterize(plan.with_steps(k))
            res = backend.expect_many(circuit, psi0, fns, shots, derived_seed(seed, "mag", k))
            vals[k] = [scale * v for v, _ in res]
            errs[k] = [scale * e for _, e in res]
    out = []
    for j, site in enumerate(sites):
        meta = {"observable": "magnetization", "site": site, "convention": convention, "initial_state": psi0, "mode": mode}
        if mode == "shots":
            meta.update(shots=shots, seed=seed)
        out.append(TimeSeries(plan.times, vals[:, j], errs[:, j], meta))
    return out


# -- random unitaries and OTOCs ---------------------------------------------


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``dim x dim`` unitary: QR of a Ginibre matrix with phase-fixed R diagonal."""
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_cue_local(n_sites: int, seed: int) -> list[np.ndarray]:
    """One independent CUE(2) unitary per site."""
    rng = rng_for(seed, "cue")
    return [haar_unitary(2, rng) for _ in range(n_sites)]


@dataclass
class OtocConfig:
    """Randomized-measurement OTOC settings.

    For ``order == 0`` the excited-state set is ``{base_state}`` with weight 1.
    Higher orders need ``excited_states`` as ``(bitstring, coefficient)`` pairs.
    """

    W: PauliTerm
    V: PauliTerm
    base_state: str
    order: int = 0
    excited_states: list[tuple[str, float]] = field(default_factory=list)
    n_unitaries: int = 100
    shots: int = 1000
    seed: int = 0
    denominator_floor: float = 1e-6

    def __post_init__(self):
        for name in ("W", "V"):
            op = getattr(self, name)
            if op.weight != 1 or op.coefficient != 1:
                raise ValueError(f"{name} must be a unit single-site Pauli")
        n = self.W.n_qubits
        if self.V.n_qubits != n:
            raise ValueError("W and V act on registers of different widths")
        _basis_label(self.base_state, n)
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.order >= 1 and not self.excited_states:
            raise ValueError("order >= 1 needs user-supplied excited_states with coefficients")
        for bits, _ in self.excited_states:
            _basis_label(bits, n)
        if self.n_unitaries < 2:
            raise ValueError("n_unitaries must be at least 2")

    @property
    def ensemble(self) -> list[tuple[str, float]]:
        if self.order == 0:
            return [(self.base_state, 1.0)]
        return [(b, float(c)) for b, c in self.excited_states]

    @property
    def w_site(self) -> int:
        return self.W.support[0]

    @property
    def v_site(self) -> int:
        return self.V.support[0]


def _local_layer(us: Sequence[np.ndarray]) -> list[Unitary1Q]:
    return [Unitary1Q(q, u, "cue") for q, u in enumerate(us)]


def _w_rotation(W: PauliTerm) -> list:
    q, axis = W.paulis[0]
    if axis == "X":
        return [h(q)]
    if axis == "Y":
        return [sdg(q), h(q)]
    return []


def jackknife_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """Ratio of means with a leave-one-out error bar."""
    n = len(num)
    ratio = num.sum() / den.sum()
    loo = (num.sum() - num) / (den.sum() - den)
    err = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(ratio), err


def modified_otoc(
    cfg: OtocConfig, plan: TrotterPlan, mode: str = "shots", backend: Backend | None = None
) -> TimeSeries:
    """Ratio of unitary-averaged expectation products, one point per Trotter step.

    Every random unitary ``u`` is shared by the numerator and denominator
    circuits. In shots mode each expectation is an independent batch of
    ``cfg.shots`` measurements, including the two factors that both involve
    ``base_state``. Error bars use a jackknife over unitaries.
    """
    n = plan.hamiltonian.n_qubits
    if cfg.W.n_qubits != n:
        raise ValueError("OTOC operators do not match the Hamiltonian width")
    _check_mode(mode, cfg.shots, cfg.seed, backend)
    steps = plan.n_steps + 1
    ens = cfg.ensemble
    coeffs = np.array([c for _, c in ens])
    w_obs = PauliSum((cfg.W,), n)
    v_gate = Unitary1Q(cfg.v_site, PAULI_MATRICES[cfg.V.paulis[0][1]], "v")
    w_q = cfg.w_site

    def measure_w(state: StateVector, key: tuple) -> float:
        exact = float(expectation_batch(state.amplitudes[None, :], w_obs)[0])
        if mode == "exact":
            return exact
        rng = rng_for(cfg.seed, "otoc-shots", *key)
        n0 = rng.binomial(cfg.shots, min(max((1 + exact) / 2, 0.0), 1.0))
        return (2 * n0 - cfg.shots) / cfg.shots

    def series(prep: list, bits: str, key: tuple) -> np.ndarray:
        if backend is None:
            state = run_circuit(init_basis(n, bits), Circuit(n, prep))
            return np.array([measure_w(s, key + (k,)) for k, s in enumerate(trotter_states(plan, state))])
        out = np.empty(steps)
        rot = _w_rotation(cfg.W)
        for k in range(steps):
            circuit = Circuit(n, prep + trotterize(plan.with_steps(k)).gates + rot)
            sd = derived_seed(cfg.seed, "otoc-noisy", *key, k)
            out[k] = backend.expect(circuit, bits, lambda b: 1.0 - 2.0 * (b[w_q] == "1"), cfg.shots, sd)[0]
        return out

    a = np.zeros((cfg.n_unitaries, len(ens), steps))  # <W(t)>_{u,k_s}
    b = np.zeros((cfg.n_unitaries, steps))  # <V W(t) V>_{u,k0}
    d = np.zeros((cfg.n_unitaries, steps))  # <W(t)>_{u,k0}
    for j in range(cfg.n_unitaries):
        layer = _local_layer(sample_cue_local(n, derived_seed(cfg.seed, "u", j)))
        for s_idx, (bits, _) in enumerate(ens):
            a[j, s_idx] = series(layer, bits, (j, "a", s_idx))
        b[j] = series(layer + [v_gate], cfg.base_state, (j, "b"))
        d[j] = series(layer, cfg.base_state, (j, "d"))

    num = np.einsum("s,jst,jt->jt", coeffs, a, b)
    den = np.einsum("s,jst,jt->jt", coeffs, a, d)
    times, values, errors, flagged = [], [], [], []
    for k, t in enumerate(plan.times):
        if abs(den[:, k].mean()) < cfg.denominator_floor:
            flagged.append(t)
            continue
        r, e = jackknife_ratio(num[:, k], den[:, k])
        times.append(t)
        values.append(r)
        errors.append(e)
    meta = {
        "observable": "otoc",
        "order": cfg.order,
        "W": str(cfg.W),
        "V": str(cfg.V),
        "base_state": cfg.base_state,
        "n_unitaries": cfg.n_unitaries,
        "shots": cfg.shots if mode == "shots" else 0,
        "seed": cfg.seed,
        "mode": mode,
        "flagged_times": flagged,
    }
    return TimeSeries(times, values, errors, meta)
