import numpy as np
import pytest
from dense_oracle import P, circuit_matrix, embed, hamiltonian_matrix
from hypothesis import given, settings
from hypothesis import strategies as st

from latqsim._rng import derived_seed
from latqsim.backend import Backend
from latqsim.compiler import TrotterPlan, trotterize
from latqsim.models import GrossNeveuParams, HyperbolicIsingParams, build_gross_neveu, build_hyperbolic_ising
from latqsim.noise import NoiseModel
from latqsim.observables import (
    OtocConfig,
    TimeSeries,
    haar_unitary,
    jackknife_ratio,
    magnetization_series,
    modified_otoc,
    return_probability,
    sample_cue_local,
)
from latqsim.pauli import PauliTerm
from scipy.linalg import expm


def gn_plan(L=4, N=1, m=0.0, G2=0.0, dt=0.1, steps=10):
    H, _ = build_gross_neveu(GrossNeveuParams(L=L, N=N, m=m, G2=G2))
    return TrotterPlan(H, dt, steps)


def ising_plan(L=5, ell=float("inf"), dt=0.1, steps=10):
    H, _ = build_hyperbolic_ising(HyperbolicIsingParams(L=L, J=1.0, h=0.6, ell_c=ell))
    return TrotterPlan(H, dt, steps)


# -- return probability ------------------------------------------------------------


def test_return_probability_starts_at_one():
    ts = return_probability(gn_plan(N=2, G2=0.5, steps=3), "00100010")
    assert ts.values[0] == 1.0 and len(ts) == 4
    assert all(0 <= v <= 1 + 1e-12 for v in ts.values)


def test_single_flavor_trotter_matches_dense_exponential():
    # one particle on a 4-site chain with no mass: the hopping terms form a free-fermion problem
    plan = gn_plan(L=4, N=1, m=0.3, dt=0.05, steps=20)
    ts = return_probability(plan, "0010")
    h = hamiltonian_matrix(plan.hamiltonian)
    psi0 = np.zeros(16)
    psi0[0b0010] = 1
    exact = [abs(psi0 @ expm(-1j * h * t) @ psi0) ** 2 for t in plan.times]
    np.testing.assert_allclose(ts.values, exact, atol=5e-3)


def test_return_probability_shots_mode():
    plan = gn_plan(N=1, steps=5)
    exact = return_probability(plan, "0010")
    shots = return_probability(plan, "0010", mode="shots", shots=20_000, seed=4)
    for v, e, ref in zip(shots.values, shots.std_errors, exact.values):
        assert abs(v - ref) <= 5 * e + 1e-12
    assert shots.metadata["shots"] == 20_000
    assert shots.values == return_probability(plan, "0010", mode="shots", shots=20_000, seed=4).values


def test_mode_validation():
    plan = gn_plan(steps=1)
    with pytest.raises(ValueError):
        return_probability(plan, "0010", mode="shots")
    with pytest.raises(ValueError):
        return_probability(plan, "0010", mode="tomography")
    with pytest.raises(ValueError):
        return_probability(plan, "001")
    with pytest.raises(ValueError):
        return_probability(plan, "0010", backend=Backend(NoiseModel()))


# -- magnetization ------------------------------------------------------------------


def test_magnetization_at_zero_and_bounded():
    plan = ising_plan(L=5, ell=2.0, steps=15)
    series = magnetization_series(plan, "00000")
    assert len(series) == 5
    for s in series:
        assert s.values[0] == pytest.approx(0.5)
        assert all(abs(v) <= 0.5 + 1e-12 for v in s.values)
    pauli = magnetization_series(plan, "00000", sites=[2], convention="pauli")
    np.testing.assert_allclose(pauli[0].values, 2 * np.array(series[2].values), atol=1e-12)


def test_magnetization_matches_dense_z_expectation():
    plan = ising_plan(L=3, ell=1.5, steps=6)
    series = magnetization_series(plan, "010")
    step = circuit_matrix(trotterize(plan.with_steps(1)))
    psi = np.zeros(8, complex)
    psi[0b010] = 1
    for k in range(plan.n_steps + 1):
        for q in range(3):
            z = np.real(psi.conj() @ embed(P["Z"], [q], 3) @ psi) / 2
            assert series[q].values[k] == pytest.approx(z, abs=1e-12)
        psi = step @ psi


@settings(max_examples=5, deadline=None)
@given(st.sampled_from([3, 5, 7]))
def test_planar_magnetization_is_mirror_symmetric(L):
    # the planar chain and the Trotter step are both invariant under site reflection
    series = magnetization_series(ising_plan(L=L, steps=8), "0" * L)
    for i in range(L):
        np.testing.assert_allclose(series[i].values, series[L - 1 - i].values, atol=1e-12)


def test_magnetization_shots_errors():
    plan = ising_plan(L=3, steps=3)
    exact = magnetization_series(plan, "000")
    shots = magnetization_series(plan, "000", mode="shots", shots=10_000, seed=2)
    for a, b in zip(exact, shots):
        for v, e, ref in zip(b.values, b.std_errors, a.values):
            assert abs(v - ref) <= 5 * e + 1e-3


# -- random unitaries ---------------------------------------------------------------


def test_haar_unitary_is_unitary_and_deterministic():
    us = sample_cue_local(5, seed=3)
    assert len(us) == 5
    for u in us:
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
    again = sample_cue_local(5, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(us, again))
    assert not np.array_equal(us[0], sample_cue_local(5, seed=4)[0])


def test_haar_second_moment():
    rng = np.random.default_rng(0)
    n = 100_000
    vals = np.array([abs(haar_unitary(2, rng)[0, 0]) ** 2 for _ in range(n)])
    # |u00|^2 is uniform on [0, 1] for CUE(2)
    assert vals.mean() == pytest.approx(0.5, abs=3 * np.sqrt(1 / 12 / n))
    assert vals.var() == pytest.approx(1 / 12, abs=0.003)


def test_haar_phase_is_uniform():
    rng = np.random.default_rng(1)
    phases = np.array([np.angle(haar_unitary(2, rng)[0, 0]) for _ in range(20_000)])
    hist, _ = np.histogram(phases, bins=8, range=(-np.pi, np.pi))
    expected = len(phases) / 8
    assert np.all(np.abs(hist - expected) < 5 * np.sqrt(expected))


# -- OTOC ---------------------------------------------------------------------------


def otoc_cfg(L, w, v, **kw):
    base = dict(W=PauliTerm(1.0, f"Z{w}", L), V=PauliTerm(1.0, f"X{v}", L), base_state="0" * L, n_unitaries=20, shots=500, seed=1)
    base.update(kw)
    return OtocConfig(**base)


def test_otoc_config_validation():
    with pytest.raises(ValueError):
        otoc_cfg(3, 0, 2, order=1)
    with pytest.raises(ValueError):
        OtocConfig(PauliTerm(1.0, "Z0 Z1", 3), PauliTerm(1.0, "X2", 3), "000")
    with pytest.raises(ValueError):
        otoc_cfg(3, 0, 2, n_unitaries=1)
    with pytest.raises(ValueError):
        otoc_cfg(3, 0, 2, base_state="00")
    cfg = otoc_cfg(3, 0, 2, order=1, excited_states=[("000", 1.0), ("100", -0.5)])
    assert cfg.ensemble == [("000", 1.0), ("100", -0.5)]


def test_otoc_is_one_at_time_zero():
    ts = modified_otoc(otoc_cfg(5, 4, 0), ising_plan(L=5, steps=0), mode="exact")
    assert ts.values == [pytest.approx(1.0, abs=1e-12)]


def test_otoc_light_cone():
    # two Trotter steps spread W on site 6 over sites 5 and 6 only; V on site 0 still commutes
    ts = modified_otoc(otoc_cfg(7, 6, 0), ising_plan(L=7, steps=2), mode="exact")
    np.testing.assert_allclose(ts.values, 1.0, atol=1e-12)
    # V next to W: one step keeps W single-site, later steps let it reach site 5
    near = modified_otoc(otoc_cfg(7, 6, 5), ising_plan(L=7, dt=0.4, steps=4), mode="exact")
    assert near.values[1] == pytest.approx(1.0, abs=1e-12)
    assert abs(near.values[4] - 1) > 1e-2


def dense_otoc(cfg, plan):
    """Direct dense evaluation of the estimator for the same unitaries."""
    n = plan.hamiltonian.n_qubits
    step = circuit_matrix(trotterize(plan.with_steps(1)))
    w = embed(P[cfg.W.paulis[0][1]], [cfg.w_site], n)
    v = embed(P[cfg.V.paulis[0][1]], [cfg.v_site], n)
    out = []
    for k in range(plan.n_steps + 1):
        uk = np.linalg.matrix_power(step, k)
        wt = uk.conj().T @ w @ uk
        num = den = 0.0
        for j in range(cfg.n_unitaries):
            us = sample_cue_local(n, derived_seed(cfg.seed, "u", j))
            layer = us[0]
            for u in us[1:]:
                layer = np.kron(layer, u)

            def expval(bits, extra=np.eye(1 << n), layer=layer, wt=wt):
                psi = np.zeros(1 << n, complex)
                psi[int(bits, 2)] = 1
                psi = extra @ layer @ psi
                return np.real(psi.conj() @ wt @ psi)

            a = sum(c * expval(bits) for bits, c in cfg.ensemble)
            num += a * expval(cfg.base_state, v)
            den += a * expval(cfg.base_state)
        out.append(num / den)
    return np.array(out)


@pytest.mark.parametrize("order", [0, 1])
def test_otoc_exact_mode_matches_dense_oracle(order):
    kw = {} if order == 0 else dict(order=1, excited_states=[("000", 1.0), ("010", 0.5)])
    cfg = otoc_cfg(3, 0, 2, n_unitaries=12, **kw)
    plan = ising_plan(L=3, dt=0.3, steps=4)
    ts = modified_otoc(cfg, plan, mode="exact")
    np.testing.assert_allclose(ts.values, dense_otoc(cfg, plan), atol=1e-10)
    assert ts.values == modified_otoc(cfg, plan, mode="exact").values


def test_otoc_shots_mode_within_errors():
    cfg = otoc_cfg(3, 0, 2, n_unitaries=40, shots=4000, seed=5)
    plan = ising_plan(L=3, dt=0.3, steps=4)
    exact = modified_otoc(cfg, plan, mode="exact")
    shots = modified_otoc(cfg, plan, mode="shots")
    for v, e, ref in zip(shots.values, shots.std_errors, exact.values):
        assert abs(v - ref) <= 4 * e + 0.05


def test_otoc_flags_vanishing_denominator():
    # W = X on a |0>-like state averages to zero only for special unitaries; force flagging with a huge floor
    ts = modified_otoc(otoc_cfg(3, 0, 2, denominator_floor=10.0), ising_plan(L=3, steps=2), mode="exact")
    assert ts.times == [] and ts.metadata["flagged_times"] == pytest.approx([0.0, 0.1, 0.2])


def test_jackknife_ratio():
    num = np.array([1.0, 2.0, 3.0, 4.0])
    den = np.ones(4)
    r, e = jackknife_ratio(num, den)
    assert r == pytest.approx(2.5)
    # for a constant denominator the jackknife error equals the standard error of the mean
    assert e == pytest.approx(np.std(num, ddof=1) / 2)


# -- time series ----------------------------------------------------------------------


def test_time_series_csv_round_trip():
    ts = TimeSeries([0.0, 0.1, 0.2], [1.0, 0.9, 1 / 3], [0.0, 0.01, 0.02], {"observable": "x"})
    back = TimeSeries.from_csv(ts.to_csv())
    assert back.times == ts.times and back.values == ts.values and back.std_errors == ts.std_errors
    assert back.metadata == {"observable": "x"}


def test_time_series_invariants():
    with pytest.raises(ValueError):
        TimeSeries([0.0, 0.0], [1, 1], [0, 0])
    with pytest.raises(ValueError):
        TimeSeries([0.0], [1, 1], [0])
    with pytest.raises(ValueError):
        TimeSeries.from_csv("t,v\n0,1\n")
