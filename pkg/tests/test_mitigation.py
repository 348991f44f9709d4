import numpy as np
import pytest
from dense_oracle import circuit_matrix, random_circuit
from hypothesis import given, settings
from hypothesis import strategies as st

from latqsim.mitigation import (
    MitigationConfig,
    SingularConfusionError,
    ZneConfig,
    ZneFitError,
    apply_confusion,
    confusion_matrices,
    confusion_matrix,
    extrapolate,
    fold_global,
    insert_dd,
    invert_confusion,
    mitigate_probabilities,
    readout_mitigate,
    readout_transfer,
    twirl,
    twirl_once,
    zne_run,
)
from latqsim._rng import rng_for
from latqsim.noise import NoiseModel, run_noisy
from latqsim.pauli import PauliTerm, from_terms
from latqsim.schedule import schedule
from latqsim.statevector import Circuit, Counts, PauliRotation, Swap, Unitary1Q, cx, h, init_basis, rotation, x

# -- configuration -------------------------------------------------------------------


def test_zne_config_invariants():
    assert ZneConfig().fold_factors == (1, 3, 5)
    for bad in [(3, 5), (1, 2), (1, 3, 3), (0, 1)]:
        with pytest.raises(ValueError):
            ZneConfig(bad)
    with pytest.raises(ValueError):
        ZneConfig(fit="cubic")
    with pytest.raises(ValueError):
        MitigationConfig(readout="full")
    with pytest.raises(ValueError):
        MitigationConfig(dd="xy4")


# -- readout ---------------------------------------------------------------------------


def test_identity_confusion_is_noop():
    raw = Counts({"0": 52, "1": 48}, 100)
    res = readout_mitigate(raw, [np.eye(2)])
    assert res.quasi == pytest.approx({"0": 0.52, "1": 0.48})


def test_symmetric_flip_inverse():
    res = readout_mitigate({"0": 0.52, "1": 0.48}, [confusion_matrix(0.02, 0.02)])
    assert res.quasi["0"] == pytest.approx(0.5 / 0.96, abs=1e-14)
    assert res.quasi["1"] == pytest.approx(0.46 / 0.96, abs=1e-14)
    assert res.quasi["0"] == pytest.approx(0.5208333333333334)


def test_tensored_equals_full_inverse():
    mats = confusion_matrices([0.02, 0.07], [0.05, 0.01])
    full = np.kron(mats[0], mats[1])
    observed = np.array([0.4, 0.1, 0.3, 0.2])
    np.testing.assert_allclose(invert_confusion(observed, mats), np.linalg.solve(full, observed), atol=1e-14)


def test_confusion_orientation():
    # P(read 1 | prepared 0) = p01 puts mass on "1" when preparing |0>
    out = apply_confusion(np.array([1.0, 0.0]), [confusion_matrix(0.1, 0.0)])
    np.testing.assert_allclose(out, [0.9, 0.1])


@settings(max_examples=50)
@given(
    st.integers(1, 4),
    st.integers(0, 2**32 - 1),
)
def test_inversion_exact_on_analytic_distributions(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(1 << n))
    mats = confusion_matrices(rng.uniform(0, 0.2, n), rng.uniform(0, 0.2, n))
    np.testing.assert_allclose(invert_confusion(apply_confusion(p, mats), mats), p, atol=1e-12)


def test_clipping_reports_both():
    res = readout_mitigate({"0": 0.99, "1": 0.01}, [confusion_matrix(0.1, 0.1)])
    assert res.quasi["1"] < 0
    assert "1" not in res.clipped and res.clipped["0"] == pytest.approx(1.0)
    assert sum(res.quasi.values()) == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_readout_transfer_is_adjoint_of_inversion(n, seed):
    rng = np.random.default_rng(seed)
    raw = rng.dirichlet(np.ones(1 << n))
    f = rng.normal(size=1 << n)
    mats = confusion_matrices(rng.uniform(0, 0.2, n), rng.uniform(0, 0.2, n))
    assert raw @ readout_transfer(f, mats) == pytest.approx(invert_confusion(raw, mats) @ f, abs=1e-12)


def test_singular_confusion():
    with pytest.raises(SingularConfusionError):
        readout_mitigate({"0": 1.0}, [confusion_matrix(0.5, 0.5)])


def test_end_to_end_readout_correction():
    noise = NoiseModel(p_read_01=0.05, p_read_10=0.08)
    c = Circuit(2, [h(0), cx(0, 1)])
    counts = run_noisy(c, init_basis(2, "00"), noise, 200_000, seed=3)
    res = readout_mitigate(counts, confusion_matrices(*noise.readout(2)))
    assert res.quasi.get("00", 0) == pytest.approx(0.5, abs=0.01)
    assert res.quasi.get("11", 0) == pytest.approx(0.5, abs=0.01)
    assert abs(res.quasi.get("01", 0)) < 0.01


# -- folding and extrapolation ----------------------------------------------------------


def test_fold_three_triples_gates_and_keeps_unitary():
    rng = np.random.default_rng(0)
    c = random_circuit(4, 12, rng)
    f = fold_global(c, 3)
    assert len(f) == 3 * len(c)
    np.testing.assert_allclose(circuit_matrix(f), circuit_matrix(c), atol=1e-10)
    assert len(fold_global(c, 1)) == len(c)
    with pytest.raises(ValueError):
        fold_global(c, 2)


def test_linear_two_point_extrapolation():
    value, diag = extrapolate([1, 3], [0.9, 0.7], "linear")
    assert value == pytest.approx(1.0)
    assert diag["residual_rms"] == pytest.approx(0, abs=1e-12)


def test_quadratic_and_exponential_fits():
    xs = np.array([1, 3, 5])
    assert extrapolate(xs, 2 - 0.1 * xs + 0.01 * xs**2, "quadratic")[0] == pytest.approx(2.0)
    assert extrapolate(xs, -0.8 * np.exp(-0.2 * xs), "exponential")[0] == pytest.approx(-0.8)
    with pytest.raises(ZneFitError):
        extrapolate([1, 3], [0.5, -0.5], "exponential")
    with pytest.raises(ZneFitError):
        extrapolate([1, 3], [0.5, 0.4], "quadratic")


def test_error_propagation_of_linear_fit():
    # y0 = (3 y1 - y3) / 2 for scales 1 and 3
    _, diag = extrapolate([1, 3], [0.9, 0.7], "linear", errors=[0.01, 0.02])
    assert diag["std_error"] == pytest.approx(np.hypot(1.5 * 0.01, 0.5 * 0.02), rel=1e-5)


def test_zne_without_noise_returns_noiseless_value():
    c = Circuit(2, [rotation("X0 Y1", 0.7, 2), rotation("Z0 Z1", 0.4, 2)])
    obs = from_terms([PauliTerm(1.0, "Z0", 2)])
    res = zne_run(c, init_basis(2, "00"), NoiseModel(), ZneConfig(), obs, 20_000, seed=1)
    assert res.value == pytest.approx(np.cos(0.7), abs=4 * res.diagnostics["std_error"] + 1e-9)
    traj = zne_run(c, init_basis(2, "00"), NoiseModel(), ZneConfig(), obs, 10, seed=1, estimator="trajectory")
    assert traj.value == pytest.approx(np.cos(0.7), abs=1e-9)
    with pytest.raises(ValueError):
        zne_run(c, init_basis(2, "00"), NoiseModel(), ZneConfig(), from_terms([PauliTerm(1.0, "X0", 2)]), 10, 1, estimator="sampled")


def test_zne_reduces_bias_on_one_circuit():
    rng = np.random.default_rng(11)
    c = Circuit(3)
    for _ in range(6):
        a, b = (int(v) for v in rng.choice(3, 2, replace=False))
        c.append(rotation({a: "X", b: "Z"}, float(rng.uniform(0.3, 1.2)), 3))
    obs = from_terms([PauliTerm(1.0, "Z0 Z1", 3)])
    ideal = zne_run(c, init_basis(3, "000"), NoiseModel(), ZneConfig(), obs, 1, 0, estimator="trajectory").value
    res = zne_run(c, init_basis(3, "000"), NoiseModel(p2=0.03), ZneConfig(), obs, 20_000, seed=2, estimator="trajectory")
    assert abs(res.value - ideal) < abs(res.per_scale[1] - ideal)


# -- twirling ---------------------------------------------------------------------------


def frame_of(twirled):
    """Paulis placed before the (single) rotation in a one-gate twirled circuit."""
    pre = {}
    for g in twirled.gates:
        if isinstance(g, PauliRotation):
            return pre, g
        pre[g.qubit] = g.name
    raise AssertionError("no rotation found")


def find_twirl(c, wanted):
    for seed in range(500):
        t = twirl_once(c, rng_for(seed, "find"))
        pre, g = frame_of(t)
        if pre == wanted:
            return t, g
    raise AssertionError(f"frame {wanted} never drawn")


def test_twirl_xx_keeps_angle():
    theta = 0.9
    c = Circuit(2, [rotation("Z0 Z1", theta, 2)])
    t, g = find_twirl(c, {0: "twirl_x", 1: "twirl_x"})
    assert g.angle == pytest.approx(theta)
    np.testing.assert_allclose(circuit_matrix(t), circuit_matrix(c), atol=1e-12)


def test_twirl_xi_flips_angle():
    theta = 0.9
    c = Circuit(2, [rotation("Z0 Z1", theta, 2)])
    t, g = find_twirl(c, {0: "twirl_x"})
    assert g.angle == pytest.approx(-theta)
    np.testing.assert_allclose(circuit_matrix(t), circuit_matrix(c), atol=1e-12)


def test_identity_twirl_leaves_circuit_unchanged():
    c = Circuit(2, [rotation("Z0 Z1", 0.4, 2)])
    t, g = find_twirl(c, {})
    assert t.gates == c.gates


def test_twirl_merges_adjacent_paulis():
    c = Circuit(2, [rotation("Z0 Z1", 0.4, 2), rotation("Z0 Z1", 0.3, 2)])
    for seed in range(20):
        t = twirl_once(c, rng_for(seed, "m"))
        last_was_twirl = {}
        for g in t.gates:
            if isinstance(g, Unitary1Q):
                assert not last_was_twirl.get(g.qubit), "two twirl Paulis in a row"
                last_was_twirl[g.qubit] = True
            else:
                for q in g.qubits:
                    last_was_twirl[q] = False


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_every_twirl_is_noiselessly_equal(n, seed):
    rng = np.random.default_rng(seed)
    c = Circuit(n)
    for _ in range(8):
        a, b = (int(v) for v in rng.choice(n, 2, replace=False))
        kind = rng.integers(3)
        if kind == 0:
            c.append(rotation({a: "Z", b: "Z"}, float(rng.uniform(-3, 3)), n))
        elif kind == 1:
            c.append(rotation({a: "XYZ"[rng.integers(3)], b: "XYZ"[rng.integers(3)]}, float(rng.uniform(-3, 3)), n))
        else:
            c.append(cx(a, b))
        c.append(h(a))
    u = circuit_matrix(c)
    for t in twirl(c, seed, 5):
        np.testing.assert_allclose(circuit_matrix(t), u, atol=1e-10)


def test_twirl_swap():
    c = Circuit(2, [h(0), Swap(0, 1), rotation("Z0 Z1", 0.5, 2)])
    for t in twirl(c, 4, 30):
        np.testing.assert_allclose(circuit_matrix(t), circuit_matrix(c), atol=1e-12)


def test_twirl_rejects_unknown_entangler():
    from latqsim.statevector import Unitary2Q

    with pytest.raises(ValueError):
        twirl_once(Circuit(2, [Unitary2Q((0, 1), np.eye(4), "iswapish")]), rng_for(0))
    with pytest.raises(ValueError):
        twirl(Circuit(2), 0, 0)


def test_twirl_deterministic():
    c = Circuit(2, [rotation("Z0 Z1", 0.4, 2), cx(0, 1)])
    a = [t.gates for t in twirl(c, 3, 4)]
    b = [t.gates for t in twirl(c, 3, 4)]
    assert all(len(x) == len(y) and all(type(p) is type(q) for p, q in zip(x, y)) for x, y in zip(a, b))
    assert [[g.label for g in t] for t in a] == [[g.label for g in t] for t in b]


# -- dynamical decoupling -----------------------------------------------------------------


def test_dd_no_idle_windows_unchanged():
    c = Circuit(2, [rotation("Z0 Z1", 0.3, 2), rotation("X0 X1", 0.2, 2)])
    out = insert_dd(c)
    assert out.gates == c.gates and out.metadata["dd_pairs"] == 0


def test_dd_single_window():
    c = Circuit(2, [rotation("Z0 Z1", 0.3, 2), h(0), h(0), rotation("Z0 Z1", 0.2, 2)])
    assert schedule(c).idle_windows(1) == [(1, 3)]
    out = insert_dd(c)
    assert out.metadata["dd_pairs"] == 1
    added = [g for g in out.gates if g.label == "x"]
    assert len(added) == 2 and all(g.qubits == (1,) for g in added)
    assert [g.label for g in out.gates[:3]] == ["rzz", "x", "x"]
    np.testing.assert_allclose(circuit_matrix(out), circuit_matrix(c), atol=1e-12)


def test_dd_ignores_single_layer_windows():
    c = Circuit(2, [rotation("Z0 Z1", 0.3, 2), h(0), rotation("Z0 Z1", 0.2, 2)])
    assert insert_dd(c).metadata["dd_pairs"] == 0


def test_dd_preserves_unitary_on_random_circuits():
    rng = np.random.default_rng(21)
    for _ in range(10):
        c = random_circuit(4, 25, rng, max_weight=2)
        out = insert_dd(c)
        np.testing.assert_allclose(circuit_matrix(out), circuit_matrix(c), atol=1e-12)


# -- pipeline helper -------------------------------------------------------------------------


def test_mitigate_probabilities_splits_shots_over_twirls():
    calls = []

    def run(circ, shots, seed):
        calls.append(shots)
        return Counts({"00": shots}, shots)

    c = Circuit(2, [rotation("Z0 Z1", 0.3, 2)])
    probs = mitigate_probabilities(run, c, MitigationConfig(n_twirls=3), seed=1, shots=1000)
    assert calls == [334, 333, 333] and probs == {"00": 1.0}


def test_mitigate_probabilities_applies_dd_and_readout():
    seen = []

    def run(circ, shots, seed):
        seen.append(circ)
        return Counts({"0": 52, "1": 48}, 100)

    c = Circuit(1, [x(0)])
    probs = mitigate_probabilities(run, c, MitigationConfig(readout="tensored_inversion", dd="xx_pairs"), 1, 100, [confusion_matrix(0.02, 0.02)])
    assert probs["0"] == pytest.approx(0.5 / 0.96)
    assert "dd_pairs" in seen[0].metadata
