"""Error mitigation passes: readout inversion, ZNE, Pauli twirling, dynamical decoupling."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._rng import rng_for
from .pauli import PAULI_MATRICES, PauliTerm, commutes
from .schedule import schedule
from .statevector import (
    Circuit,
    Counts,
    PauliRotation,
    StateVector,
    Swap,
    Unitary1Q,
    Unitary2Q,
    is_two_qubit,
    x,
)

FITS = ("linear", "quadratic", "exponential")


class ZneFitError(ValueError):
    pass


class SingularConfusionError(ValueError):
    pass


@dataclass(frozen=True)
class ZneConfig:
    fold_factors: tuple[int, ...] = (1, 3, 5)
    fit: str = "linear"

    def __post_init__(self):
        factors = tuple(int(f) for f in self.fold_factors)
        object.__setattr__(self, "fold_factors", factors)
        if any(f < 1 or f % 2 == 0 for f in factors):
            raise ValueError("fold factors must be odd integers >= 1")
        if 1 not in factors:
            raise ValueError("fold factors must include 1")
        if len(set(factors)) != len(factors):
            raise ValueError("fold factors must be distinct")
        if self.fit not in FITS:
            raise ValueError(f"fit must be one of {FITS}")


@dataclass(frozen=True)
class MitigationConfig:
    readout: str = "none"  # none | tensored_inversion
    zne: ZneConfig | None = None
    n_twirls: int = 0  # 0 disables twirling
    dd: str = "off"  # off | xx_pairs

    def __post_init__(self):
        if self.readout not in ("none", "tensored_inversion"):
            raise ValueError("readout must be 'none' or 'tensored_inversion'")
        if self.dd not in ("off", "xx_pairs"):
            raise ValueError("dd must be 'off' or 'xx_pairs'")
        if self.n_twirls < 0:
            raise ValueError("n_twirls must be non-negative")

    def to_dict(self) -> dict:
        return {
            "readout": self.readout,
            "zne": None if self.zne is None else {"fold_factors": list(self.zne.fold_factors), "fit": self.zne.fit},
            "twirling": {"n_twirls": self.n_twirls},
            "dd": self.dd,
        }


# -- readout ---------------------------------------------------------------


def confusion_matrix(p01: float, p10: float) -> np.ndarray:
    """Column-stochastic ``M[observed, prepared]``."""
    return np.array([[1 - p01, p10], [p01, 1 - p10]])


def confusion_matrices(p01: Sequence[float], p10: Sequence[float]) -> list[np.ndarray]:
    return [confusion_matrix(a, b) for a, b in zip(p01, p10)]


def _apply_per_qubit(vec: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    n = len(mats)
    t = np.asarray(vec, dtype=float).reshape((2,) * n)
    for q, m in enumerate(mats):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def apply_confusion(probs: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    return _apply_per_qubit(probs, mats)


def _inverses(mats: Sequence[np.ndarray], eps: float) -> list[np.ndarray]:
    inverses = []
    for q, m in enumerate(mats):
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= eps:
            raise SingularConfusionError(f"confusion matrix of qubit {q} is singular")
        inverses.append(np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det)
    return inverses


def invert_confusion(observed: np.ndarray, mats: Sequence[np.ndarray], eps: float = 1e-9) -> np.ndarray:
    return _apply_per_qubit(observed, _inverses(mats, eps))


def readout_transfer(values: Sequence[float], mats: Sequence[np.ndarray], eps: float = 1e-9) -> np.ndarray:
    """Observable ``g`` with ``raw @ g == invert_confusion(raw) @ values`` for every ``raw``."""
    return _apply_per_qubit(values, [m.T for m in _inverses(mats, eps)])


@dataclass
class ReadoutResult:
    quasi: dict[str, float]  # may contain negative entries
    clipped: dict[str, float]


def readout_mitigate(raw: Counts | dict[str, float], mats: Sequence[np.ndarray]) -> ReadoutResult:
    """Tensored per-qubit confusion inversion of an empirical distribution."""
    n = len(mats)
    probs = raw.probabilities() if isinstance(raw, Counts) else dict(raw)
    vec = np.zeros(1 << n)
    for k, v in probs.items():
        if len(k) != n:
            raise ValueError(f"bitstring {k!r} does not match {n} confusion matrices")
        vec[int(k, 2)] = v
    quasi_vec = invert_confusion(vec, mats)
    clipped_vec = np.clip(quasi_vec, 0, None)
    total = clipped_vec.sum()
    if total > 0:
        clipped_vec = clipped_vec / total

    def as_dict(v):
        return {format(i, f"0{n}b"): float(v[i]) for i in np.nonzero(np.abs(v) > 1e-15)[0]}

    return ReadoutResult(as_dict(quasi_vec), as_dict(clipped_vec))


# -- zero-noise extrapolation ----------------------------------------------


def fold_global(circuit: Circuit, factor: int) -> Circuit:
    """``C (C^dagger C)^((factor-1)/2)`` for odd ``factor``."""
    if factor < 1 or factor % 2 == 0:
        raise ValueError(f"fold factor must be an odd positive integer, got {factor}")
    base = circuit.unitary_gates()
    inv = circuit.inverse().gates
    gates = list(base)
    for _ in range((factor - 1) // 2):
        gates += inv + base
    return Circuit(circuit.n_qubits, gates, {**circuit.metadata, "fold_factor": factor})


def _fit_value(scales: np.ndarray, values: np.ndarray, fit: str) -> tuple[float, dict]:
    if fit == "linear":
        deg = 1
    elif fit == "quadratic":
        deg = 2
    else:
        deg = None
    if deg is not None:
        if len(np.unique(scales)) <= deg:
            raise ZneFitError(f"{fit} fit needs at least {deg + 1} distinct scales")
        coeffs = np.polyfit(scales, values, deg)
        resid = values - np.polyval(coeffs, scales)
        return float(np.polyval(coeffs, 0.0)), {"coefficients": coeffs.tolist(), "residual_rms": float(np.sqrt(np.mean(resid**2)))}
    # y = A exp(-c * lambda), fitted in log space
    if len(np.unique(scales)) < 2:
        raise ZneFitError("exponential fit needs at least 2 distinct scales")
    signs = np.sign(values)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise ZneFitError("exponential fit needs values of one strict sign")
    slope, intercept = np.polyfit(scales, np.log(np.abs(values)), 1)
    amp = signs[0] * np.exp(intercept)
    resid = values - amp * np.exp(slope * scales)
    return float(amp), {"amplitude": float(amp), "rate": float(-slope), "residual_rms": float(np.sqrt(np.mean(resid**2)))}


def extrapolate(scales: Sequence[float], values: Sequence[float], fit: str = "linear", errors: Sequence[float] | None = None) -> tuple[float, dict]:
    """Zero-noise value of a fit through ``(scale, value)`` points.

    If ``errors`` are given, their propagation through the fit (finite-difference
    Jacobian) is returned as ``diagnostics["std_error"]``.
    """
    if fit not in FITS:
        raise ValueError(f"fit must be one of {FITS}")
    xs = np.asarray(scales, dtype=float)
    ys = np.asarray(values, dtype=float)
    value, diag = _fit_value(xs, ys, fit)
    if errors is not None:
        jac = np.zeros(len(ys))
        for i in range(len(ys)):
            step = 1e-6 * max(1.0, abs(ys[i]))
            bumped = ys.copy()
            bumped[i] += step
            try:
                jac[i] = (_fit_value(xs, bumped, fit)[0] - value) / step
            except ZneFitError:
                jac[i] = np.nan
        diag["std_error"] = float(np.sqrt(np.sum((jac * np.asarray(errors)) ** 2)))
    return value, diag


@dataclass
class ZneResult:
    value: float
    per_scale: dict[int, float]
    diagnostics: dict = field(default_factory=dict)


def zne_run(
    circuit: Circuit,
    state0: StateVector,
    noise,
    config: ZneConfig,
    observable,
    shots: int,
    seed: int,
    estimator: str = "auto",
) -> ZneResult:
    """Estimate ``observable`` on globally folded circuits and extrapolate to zero noise.

    ``estimator="sampled"`` measures in the computational basis (Z-diagonal
    observables only, readout noise included); ``"trajectory"`` averages the
    exact expectation over ``shots`` noise trajectories.
    """
    from .noise import run_noisy, trajectory_expectations

    if estimator == "auto":
        estimator = "sampled" if observable.is_diagonal else "trajectory"
    if estimator == "sampled" and not observable.is_diagonal:
        raise ValueError("sampled estimator needs a Z-diagonal observable")
    per_scale: dict[int, float] = {}
    errors = []
    for factor in config.fold_factors:
        folded = fold_global(circuit, factor)
        if estimator == "sampled":
            counts = run_noisy(folded, state0, noise, shots, rng_seed(seed, factor))
            vals = diagonal_values(observable, counts)
            mean = float(np.dot(vals[0], vals[1]) / shots)
            var = float(np.dot(vals[0] ** 2, vals[1]) / shots - mean**2)
        else:
            samples = trajectory_expectations(folded, state0, noise, observable, shots, rng_seed(seed, factor))
            mean = float(samples.mean())
            var = float(samples.var())
        per_scale[factor] = mean
        errors.append(np.sqrt(max(var, 0.0) / shots))
    scales = list(per_scale)
    value, diag = extrapolate(scales, [per_scale[s] for s in scales], config.fit, errors)
    diag.update(fit=config.fit, estimator=estimator, shots=shots, seed=seed)
    return ZneResult(value, per_scale, diag)


def rng_seed(seed: int, *keys) -> int:
    from ._rng import derived_seed

    return derived_seed(seed, *keys)


def diagonal_values(observable, counts: Counts) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue of a Z-diagonal observable on each observed bitstring, with its count."""
    keys = list(counts.counts)
    vals = np.full(len(keys), observable.identity_offset.real)
    for t in observable.terms:
        for i, k in enumerate(keys):
            parity = sum(k[q] == "1" for q in t.support) % 2
            vals[i] += t.coefficient.real * (1 - 2 * parity)
    return vals, np.array([counts.counts[k] for k in keys], dtype=float)


# -- Pauli twirling --------------------------------------------------------

_LABELS = "IXYZ"
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _two_qubit_pauli(a: str, b: str) -> np.ndarray:
    return np.kron(PAULI_MATRICES[a], PAULI_MATRICES[b])


def _cnot_conjugation_table() -> dict[tuple[str, str], tuple[str, str, int]]:
    """``CX (a x b) CX = sign * (a' x b')``."""
    table = {}
    for a in _LABELS:
        for b in _LABELS:
            m = _CNOT @ _two_qubit_pauli(a, b) @ _CNOT
            for c in _LABELS:
                for d in _LABELS:
                    overlap = np.trace(_two_qubit_pauli(c, d).conj().T @ m) / 4
                    if abs(abs(overlap) - 1) < 1e-12:
                        table[(a, b)] = (c, d, int(round(overlap.real)))
    return table


_CNOT_TABLE = _cnot_conjugation_table()


def _twirl_gate(q: int, label: str, sign: int = 1) -> Unitary1Q:
    return Unitary1Q(q, sign * PAULI_MATRICES[label], f"twirl_{label.lower()}")


def _is_twirl(g) -> bool:
    return isinstance(g, Unitary1Q) and g.name.startswith("twirl")


def _merge_twirl_paulis(gates: list) -> list:
    """Fuse runs of twirl Paulis on the same qubit; exact identities are dropped."""
    out: list = []
    open_twirl: dict[int, int] = {}  # qubit -> index in out of a fusable twirl gate
    for g in gates:
        if _is_twirl(g):
            q = g.qubit
            if q in open_twirl:
                prev = out[open_twirl[q]]
                out[open_twirl[q]] = Unitary1Q(q, g.matrix @ prev.matrix, "twirl_merged")
            else:
                open_twirl[q] = len(out)
                out.append(g)
            continue
        for q in g.qubits:
            open_twirl.pop(q, None)
        out.append(g)
    return [g for g in out if g is not None and not (_is_twirl(g) and np.allclose(g.matrix, np.eye(2), atol=1e-14, rtol=0))]


def twirl_once(circuit: Circuit, rng: np.random.Generator) -> Circuit:
    n = circuit.n_qubits
    gates: list = []
    for g in circuit.gates:
        if not is_two_qubit(g):
            gates.append(g)
            continue
        if isinstance(g, PauliRotation) and g.term.weight == 2:
            qa, qb = g.qubits
            pa, pb = (_LABELS[i] for i in rng.integers(0, 4, size=2))
            frame = PauliTerm(1.0, {qa: pa, qb: pb}, n)
            angle = g.angle if commutes(frame, g.term) else -g.angle
            gates += [_twirl_gate(qa, pa), _twirl_gate(qb, pb), PauliRotation(g.term, angle)]
            gates += [_twirl_gate(qa, pa), _twirl_gate(qb, pb)]
        elif isinstance(g, Unitary2Q) and g.name == "cx":
            qa, qb = g.qubits
            pa, pb = (_LABELS[i] for i in rng.integers(0, 4, size=2))
            ca, cb, sign = _CNOT_TABLE[(pa, pb)]
            gates += [_twirl_gate(qa, pa), _twirl_gate(qb, pb), g]
            # the conjugation sign is a global phase, folded into one Pauli
            gates += [_twirl_gate(qa, ca, sign), _twirl_gate(qb, cb)]
        elif isinstance(g, Swap):
            qa, qb = g.qubits
            pa, pb = (_LABELS[i] for i in rng.integers(0, 4, size=2))
            # a swap carries each Pauli to the other wire
            gates += [_twirl_gate(qa, pa), _twirl_gate(qb, pb), g, _twirl_gate(qa, pb), _twirl_gate(qb, pa)]
        else:
            raise ValueError(f"cannot twirl entangler {g.label!r}")
    merged = _merge_twirl_paulis(gates)
    return Circuit(n, merged, dict(circuit.metadata))


def twirl(circuit: Circuit, seed: int, n_twirls: int) -> list[Circuit]:
    """``n_twirls`` randomly twirled copies, each noiselessly equal to ``circuit``."""
    if n_twirls < 1:
        raise ValueError("n_twirls must be positive")
    return [twirl_once(circuit, rng_for(seed, "twirl", k)) for k in range(n_twirls)]


# -- dynamical decoupling --------------------------------------------------


def insert_dd(circuit: Circuit) -> Circuit:
    """Place an X-X pair at the start of every interior idle window of >= 2 layers."""
    sched = schedule(circuit)
    last_gate_in_layer: dict[tuple[int, int], int] = {}
    for i, (g, layer) in enumerate(zip(circuit.gates, sched.layers)):
        if layer is not None:
            for q in g.qubits:
                last_gate_in_layer[(q, layer)] = i
    inserts: dict[int, list[int]] = {}
    for q in range(circuit.n_qubits):
        for start, stop in sched.idle_windows(q):
            if stop - start >= 2:
                anchor = last_gate_in_layer[(q, start - 1)]
                inserts.setdefault(anchor, []).append(q)
    gates = []
    for i, g in enumerate(circuit.gates):
        gates.append(g)
        for q in inserts.get(i, []):
            gates += [x(q), x(q)]
    out = Circuit(circuit.n_qubits, gates, dict(circuit.metadata))
    out.metadata["dd_pairs"] = sum(len(v) for v in inserts.values())
    return out


def mitigate_probabilities(
    run: Callable[[Circuit, int], Counts], circuit: Circuit, config: MitigationConfig, seed: int, shots: int, readout_mats=None
) -> dict[str, float]:
    """Apply twirling/DD to ``circuit``, execute via ``run``, then readout-correct.

    ``run(circuit, shots, seed)`` must return Counts. Shots are split evenly
    across twirl instances. Returns raw quasi-probabilities when readout
    inversion is on.
    """
    prepared = insert_dd(circuit) if config.dd == "xx_pairs" else circuit
    if config.n_twirls:
        variants = twirl(prepared, seed, config.n_twirls)
        base, extra = divmod(shots, len(variants))
        counts = None
        for k, v in enumerate(variants):
            n = base + (1 if k < extra else 0)
            if n == 0:
                continue
            c = run(v, n, rng_seed(seed, "twirl-run", k))
            counts = c if counts is None else counts + c
    else:
        counts = run(prepared, shots, rng_seed(seed, "run"))
    if config.readout == "tensored_inversion" and readout_mats is not None:
        return readout_mitigate(counts, readout_mats).quasi
    return counts.probabilities()
