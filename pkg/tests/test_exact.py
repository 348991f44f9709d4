import numpy as np
import pytest
from dense_oracle import hamiltonian_matrix
from hypothesis import given, settings
from hypothesis import strategies as st

from latqsim.compiler import TrotterPlan
from latqsim.exact import build, evolve, exact_observable_series, exact_return_probability
from latqsim.models import GrossNeveuParams, HyperbolicIsingParams, build_gross_neveu, build_hyperbolic_ising
from latqsim.observables import return_probability
from latqsim.pauli import PauliSum, PauliTerm, from_terms
from latqsim.statevector import StateVector, init_basis


def single(spec, n, c=1.0):
    return from_terms([PauliTerm(c, spec, n)], n)


def test_pauli_eigenpairs():
    z = build(single("Z0", 1))
    np.testing.assert_allclose(z.eigenvalues, [-1, 1])
    x = build(single("X0", 1))
    np.testing.assert_allclose(x.eigenvalues, [-1, 1])
    plus = x.eigenvectors[:, 1]
    assert abs(abs(plus[0]) - 1 / np.sqrt(2)) < 1e-12 and abs(abs(plus[1]) - 1 / np.sqrt(2)) < 1e-12


def test_free_hopping_spectrum_is_symmetric():
    H, _ = build_gross_neveu(GrossNeveuParams(L=4, N=1))
    vals = build(H).eigenvalues
    np.testing.assert_allclose(np.sort(vals), np.sort(-vals), atol=1e-12)


def test_evolve_at_zero_is_identity():
    H, _ = build_hyperbolic_ising(HyperbolicIsingParams(L=3, J=1.0, h=0.5))
    psi = init_basis(3, "101")
    np.testing.assert_allclose(evolve(build(H), psi, 0.0).amplitudes, psi.amplitudes, atol=1e-14)


def test_x_half_period_empties_return_probability():
    ts = exact_return_probability(build(single("X0", 1)), init_basis(1, "0"), [0.0, np.pi / 4, np.pi / 2])
    np.testing.assert_allclose(ts.values, [1.0, 0.5, 0.0], atol=1e-14)


def random_hermitian_sum(n, rng, n_terms=6):
    terms = []
    for _ in range(n_terms):
        spec = {int(q): "XYZ"[rng.integers(3)] for q in rng.choice(n, rng.integers(1, n + 1), replace=False)}
        terms.append(PauliTerm(float(rng.normal()), spec, n))
    return from_terms(terms, n)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_group_property_and_norm(n, seed, t1, t2):
    rng = np.random.default_rng(seed)
    d = build(random_hermitian_sum(n, rng))
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi = StateVector(v / np.linalg.norm(v), n)
    two = d.evolve(d.evolve(psi, t1), t2)
    np.testing.assert_allclose(two.amplitudes, d.evolve(psi, t1 + t2).amplitudes, atol=1e-10)
    assert d.evolve(psi, t1).norm() == pytest.approx(1, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_energy_conserved(n, seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian_sum(n, rng)
    series = exact_observable_series(build(H), init_basis(n, "0" * n), H, np.linspace(0, 5, 11))
    np.testing.assert_allclose(series.values, series.values[0], atol=1e-10)


def test_eigendecomposition_residual():
    rng = np.random.default_rng(3)
    H = random_hermitian_sum(4, rng, 10)
    d = build(H)
    h = hamiltonian_matrix(H)
    np.testing.assert_allclose(h @ d.eigenvectors, d.eigenvectors * d.eigenvalues, atol=1e-10)


def test_fine_trotter_converges_to_exact():
    H, _ = build_gross_neveu(GrossNeveuParams(L=2, N=2, m=0.3, G2=1.0))
    t_final = 1.0
    n = 10_000
    trotter = return_probability(TrotterPlan(H, t_final / n, n), "0110")
    exact = exact_return_probability(build(H), init_basis(4, "0110"), [t_final])
    assert trotter.values[-1] == pytest.approx(exact.values[0], abs=1e-3)


def test_identity_offset_only_shifts_phase():
    a = PauliSum((PauliTerm(1.0, "X0", 1),), 1, 0.0)
    b = PauliSum((PauliTerm(1.0, "X0", 1),), 1, 5.0)
    psi = init_basis(1, "0")
    ra = exact_return_probability(build(a), psi, [0.3]).values
    rb = exact_return_probability(build(b), psi, [0.3]).values
    assert ra == pytest.approx(rb, abs=1e-14)


def test_errors():
    with pytest.raises(ValueError, match="cap"):
        build(single("Z0", 3), max_qubits=2)
    with pytest.raises(ValueError):
        build(single("Z0", 1, 1j))
    with pytest.raises(ValueError):
        exact_observable_series(build(single("Z0", 1)), init_basis(1, "0"), single("X0", 1, 1j), [0.0])
