import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latticeweave.errors import InvariantViolation, ResourceCapExceeded
from latticeweave.graph_model import Graph
from latticeweave.pauli import PauliString
from latticeweave.statevector import (
    StateVector,
    check_unitary,
    hadamard,
    ideal_graph_state,
    pseudo_hadamard,
    pulse_pseudo_hadamard,
    rotation,
)

from oracles import H, Z, cz_matrix, embed, graph_state_vector, pauli_matrix, zz_matrix

N = 4
angles = st.floats(-np.pi, np.pi, allow_nan=False)


def random_state(seed: int, n: int = N) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_unitary(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / abs(np.diag(r)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, N - 1), st.integers(0, N - 1), angles)
def test_gates_match_dense_matrices(seed, a, b, theta):
    psi = random_state(seed)
    u = random_unitary(seed + 1)
    s = StateVector(psi)
    s.apply_1q(u, a)
    want = embed(u, a, N) @ psi
    assert np.allclose(s.amps, want)
    s.apply_z_rotation(theta, a)
    want = embed(np.diag([np.exp(-1j * theta), np.exp(1j * theta)]), a, N) @ want
    assert np.allclose(s.amps, want)
    if a != b:
        s.apply_cz(a, b)
        want = cz_matrix(a, b, N) @ want
        s.apply_zz_phase(theta, a, b)
        want = zz_matrix(theta, a, b, N) @ want
        assert np.allclose(s.amps, want)
    assert s.norm == pytest.approx(1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.text(alphabet="IXYZ", min_size=N, max_size=N), st.sampled_from([0, 2]))
def test_pauli_expectation_matches_dense(seed, word, phase):
    psi = random_state(seed)
    p = PauliString.from_letters(word, phase)
    m = pauli_matrix(p.ops, N, p.phase)
    assert StateVector(psi).pauli_expectation(p) == pytest.approx(np.vdot(psi, m @ psi).real)
    s = StateVector(psi)
    s.apply_pauli(p)
    assert np.allclose(s.amps, m @ psi)


def test_labels_are_lattice_sites():
    s = StateVector.product([7, 3], plus=[3])
    # site 7 is the least significant qubit and sits in |0>
    assert np.allclose(s.amps, [1, 0, 1, 0] / np.sqrt(2))
    assert s.pauli_expectation(PauliString({3: "X"})) == pytest.approx(1)
    assert s.pauli_expectation(PauliString({7: "Z"})) == pytest.approx(1)
    with pytest.raises(IndexError):
        s.pos(0)


def test_pseudo_hadamard_values():
    assert np.allclose(pseudo_hadamard(0), H)
    assert np.allclose(pseudo_hadamard(1), -1j * np.eye(2))
    assert np.allclose(pseudo_hadamard(2), -H)
    assert np.allclose(pseudo_hadamard(3), 1j * np.eye(2))
    for k in range(8):
        check_unitary(pseudo_hadamard(k))
    with pytest.raises(ValueError):
        pseudo_hadamard(-1)


def test_pulse_product_differs_from_pseudo_hadamard():
    u = pulse_pseudo_hadamard(1)
    check_unitary(u)
    # proportional to Y, not to the identity
    assert abs(np.trace(u)) < 1e-12
    assert abs(abs(np.trace(u.conj().T @ np.array([[0, -1j], [1j, 0]]))) - 2) < 1e-12
    assert np.allclose(rotation("Z", 2 * np.pi), -np.eye(2))


def test_check_unitary_rejects():
    with pytest.raises(ValueError):
        check_unitary(np.array([[1, 1], [0, 1]], dtype=complex))
    check_unitary(hadamard())


def test_ideal_graph_state_matches_oracle():
    g = Graph(range(4), [(0, 1), (1, 2), (2, 3), (0, 3)])
    s = ideal_graph_state(g)
    assert np.allclose(s.amps, graph_state_vector(4, g.sorted_edges()))


def test_measurement_postselect_and_zero_probability():
    s = StateVector.product([0, 1], plus=[0, 1])
    s.apply_cz(0, 1)
    out = s.measure_pauli(PauliString({0: "X"}), postselect=1)
    assert out == 1
    assert s.norm == pytest.approx(1)
    assert s.pauli_expectation(PauliString({0: "X"})) == pytest.approx(1)
    z = StateVector.zeros(1)
    with pytest.raises(InvariantViolation):
        z.measure_pauli(PauliString({0: "Z"}), postselect=-1)
    with pytest.raises(ValueError):
        z.measure_pauli(PauliString({0: "Z"}))


def test_measurement_statistics():
    rng = np.random.default_rng(3)
    theta = 0.4
    plus = 0
    for _ in range(2000):
        s = StateVector.zeros(1)
        s.apply_1q(rotation("Y", theta), 0)
        plus += s.measure_pauli(PauliString({0: "Z"}), rng) == 1
    p = np.cos(theta / 2) ** 2
    assert abs(plus / 2000 - p) < 4 * np.sqrt(p * (1 - p) / 2000)


def test_permutation_and_fidelity():
    psi = random_state(11, 3)
    s = StateVector(psi, labels=[4, 5, 6])
    t = s.permuted([6, 4, 5])
    for word in ["XIZ", "YZI", "ZZX"]:
        p = PauliString({site: c for site, c in zip([4, 5, 6], word)})
        assert s.pauli_expectation(p) == pytest.approx(t.pauli_expectation(p))
    assert s.fidelity_to(t) == pytest.approx(1)


def test_dump_and_load_round_trip():
    s = StateVector(random_state(2, 3))
    buf = io.BytesIO()
    s.dump(buf)
    buf.seek(0)
    assert np.array_equal(StateVector.load(buf).amps, s.amps)


def test_cap_is_enforced():
    with pytest.raises(ResourceCapExceeded):
        StateVector.zeros(5, cap=4)
    with pytest.raises(ResourceCapExceeded):
        ideal_graph_state(Graph(range(6)), cap=5)


def test_z_rotation_is_exp_minus_i_theta_z():
    from scipy.linalg import expm

    s = StateVector(random_state(5, 1))
    before = s.amps.copy()
    s.apply_z_rotation(0.3, 0)
    assert np.allclose(s.amps, expm(-0.3j * Z) @ before)
