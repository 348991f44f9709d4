import numpy as np
import pytest
from dense_oracle import P, embed, gate_matrix, random_circuit

from latqsim._rng import derived_seed, rng_for
from latqsim.noise import THREADS_ENV, NoiseModel, average_fidelity, run_noisy, trajectory_expectations
from latqsim.pauli import PauliTerm, from_terms
from latqsim.schedule import schedule
from latqsim.statevector import Barrier, Circuit, StateVector, cx, h, init_basis, rotation, run_circuit, sample, x


def test_noise_model_validation_and_serialization():
    with pytest.raises(ValueError):
        NoiseModel(p1=1.5)
    with pytest.raises(ValueError):
        NoiseModel(p_read_01=(0.1, -0.1))
    m = NoiseModel(p2=0.01, p_read_01=[0.01, 0.02], p_read_10=0.03)
    assert NoiseModel.from_dict(m.to_dict()) == m
    p01, p10 = m.readout(2)
    np.testing.assert_allclose(p01, [0.01, 0.02])
    np.testing.assert_allclose(p10, [0.03, 0.03])
    with pytest.raises(ValueError):
        m.readout(3)
    assert m.for_qubits([1]).p_read_01 == (0.02,)


def test_zero_noise_matches_noiseless_sampling():
    rng = np.random.default_rng(2)
    c = random_circuit(3, 20, rng)
    psi0 = init_basis(3, "000")
    probs = run_circuit(psi0.copy(), c).probabilities()
    counts = run_noisy(c, psi0, NoiseModel(), 50_000, seed=1)
    freq = np.array([counts[format(i, "03b")] for i in range(8)]) / counts.shots
    sigma = np.sqrt(probs * (1 - probs) / counts.shots)
    assert np.all(np.abs(freq - probs) <= 5 * sigma + 1e-12)


def test_readout_flip_probability():
    counts = run_noisy(Circuit(1), init_basis(1, "0"), NoiseModel(p_read_01=0.02), 200_000, seed=3)
    assert counts["1"] / counts.shots == pytest.approx(0.02, abs=5 * np.sqrt(0.02 * 0.98 / 200_000))
    counts = run_noisy(Circuit(1), init_basis(1, "1"), NoiseModel(p_read_10=0.1), 100_000, seed=3)
    assert counts["0"] / counts.shots == pytest.approx(0.1, abs=0.005)


def test_single_x_with_certain_pauli_error():
    # X|0> = |1>, then X, Y or Z each with probability 1/3: X and Y flip back, Z keeps |1>
    counts = run_noisy(Circuit(1, [x(0)]), init_basis(1, "0"), NoiseModel(p1=1.0), 90_000, seed=4)
    assert counts["0"] / counts.shots == pytest.approx(2 / 3, abs=0.01)


def depolarize(rho, qubits, p, n):
    k = len(qubits)
    labels = [(a,) if k == 1 else (a, b) for a in "IXYZ" for b in ("IXYZ" if k == 2 else "I")]
    labels = sorted(set(labels))
    out = (1 - p) * rho
    others = [lab for lab in labels if any(c != "I" for c in lab)]
    for lab in others:
        mat = P[lab[0]] if k == 1 else np.kron(P[lab[0]], P[lab[1]])
        e = embed(mat, qubits, n)
        out = out + p / len(others) * e @ rho @ e.conj().T
    return out


def channel_oracle(circuit, bits, noise):
    """Density-matrix evolution with per-gate depolarizing noise (no idle/readout noise)."""
    n = circuit.n_qubits
    psi = init_basis(n, bits).amplitudes
    rho = np.outer(psi, psi.conj())
    for g in circuit.gates:
        u = gate_matrix(g, n)
        rho = u @ rho @ u.conj().T
        p = noise.p1 if len(g.qubits) == 1 else noise.p2
        rho = depolarize(rho, g.qubits, p, n)
    return np.real(np.diag(rho))


@pytest.mark.parametrize("n", [1, 2])
def test_trajectories_converge_to_depolarizing_channel(n):
    rng = np.random.default_rng(10 + n)
    c = random_circuit(n, 6, rng)
    if n == 2:
        c.append(cx(0, 1))
    noise = NoiseModel(p1=0.1, p2=0.2)
    exact = channel_oracle(c, "0" * n, noise)
    shots = 100_000
    counts = run_noisy(c, init_basis(n, "0" * n), noise, shots, seed=8)
    freq = np.array([counts[format(i, f"0{n}b")] for i in range(1 << n)]) / shots
    big = exact > 0.05
    assert np.all(np.abs(freq[big] - exact[big]) / exact[big] < 0.02)


def test_idle_dephasing_only_on_interior_idle_slots():
    # qubit 1 is in |+>, idles for 2 interior layers, then H maps it back to |0>
    c = Circuit(2, [h(1), x(0), x(0), x(0), Barrier(), h(1)])
    sched = schedule(c)
    assert sched.idle_windows(1) == [(1, 3)]
    rate = 0.1
    counts = run_noisy(c, init_basis(2, "00"), NoiseModel(idle_dephase_rate=rate), 100_000, seed=2)
    # an odd number of Z errors over 2 slots flips qubit 1
    p_odd = 0.5 * (1 - (1 - 2 * rate) ** 2)
    flipped = (counts["11"] + counts["01"]) / counts.shots
    assert flipped == pytest.approx(p_odd, abs=0.006)
    # no idle noise before the first or after the last gate
    counts = run_noisy(Circuit(2, [h(1), h(1)]), init_basis(2, "00"), NoiseModel(idle_dephase_rate=0.5), 2000, seed=2)
    assert counts.counts == {"00": 2000}


def test_coherent_zz_over_rotation():
    eps = 0.3
    c = Circuit(2, [h(0), h(1), rotation("Z0 Z1", 0.0, 2), h(0), h(1)])
    vals = trajectory_expectations(c, init_basis(2, "00"), NoiseModel(coherent_zz_over_rotation=eps), from_terms([PauliTerm(1.0, "Z0", 2)]), 4, seed=0)
    # H-conjugated ZZ rotation is an XX rotation: <Z0> = cos(eps)
    np.testing.assert_allclose(vals, np.cos(eps), atol=1e-12)
    # single-qubit Z rotations are untouched
    c1 = Circuit(1, [h(0), rotation("Z0", 0.0, 1), h(0)])
    v1 = trajectory_expectations(c1, init_basis(1, "0"), NoiseModel(coherent_zz_over_rotation=eps), from_terms([PauliTerm(1.0, "Z0", 1)]), 2, seed=0)
    np.testing.assert_allclose(v1, 1.0, atol=1e-12)


def test_run_noisy_deterministic_and_thread_independent(monkeypatch):
    rng = np.random.default_rng(6)
    c = random_circuit(3, 10, rng)
    c.append(Barrier())
    noise = NoiseModel(p1=0.05, p2=0.05, p_read_01=0.02, idle_dephase_rate=0.01)
    a = run_noisy(c, init_basis(3, "010"), noise, 3000, seed=12)
    assert a == run_noisy(c, init_basis(3, "010"), noise, 3000, seed=12)
    assert a != run_noisy(c, init_basis(3, "010"), noise, 3000, seed=13)
    monkeypatch.setenv(THREADS_ENV, "4")
    assert a == run_noisy(c, init_basis(3, "010"), noise, 3000, seed=12)


def test_average_fidelity():
    c = Circuit(1, [x(0)] * 4)
    assert average_fidelity(c, init_basis(1, "0"), NoiseModel(), 10, seed=0) == pytest.approx(1)
    # each X is followed by a Pauli error with probability p; fidelity counts X/Y errors as orthogonal
    f = average_fidelity(Circuit(1, [x(0)]), init_basis(1, "0"), NoiseModel(p1=0.3), 60_000, seed=0)
    assert f == pytest.approx(1 - 0.3 * 2 / 3, abs=0.01)


def test_rng_streams():
    a = rng_for(5, "noisy", 0).random(3)
    np.testing.assert_array_equal(a, rng_for(5, "noisy", 0).random(3))
    assert not np.array_equal(a, rng_for(5, "noisy", 1).random(3))
    assert derived_seed(5, "x") == derived_seed(5, "x") != derived_seed(6, "x")
    assert 0 <= derived_seed(5, "x") < 2**63


def test_sample_and_noiseless_run_agree_in_distribution():
    psi = StateVector(np.array([0.6, 0.8]), 1)
    a = sample(psi, 100_000, seed=1)
    b = run_noisy(Circuit(1), psi, NoiseModel(), 100_000, seed=1)
    assert abs(a["1"] - b["1"]) / 100_000 < 0.01
