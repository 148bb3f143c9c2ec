import numpy as np
from hypothesis import given, strategies as st

from latticeweave.pauli import PauliString, product

from oracles import pauli_matrix

N = 3
words = st.text(alphabet="IXYZ", min_size=N, max_size=N)


def mat(p: PauliString) -> np.ndarray:
    return pauli_matrix(p.ops, N, p.phase)


@given(words, words, st.integers(0, 3), st.integers(0, 3))
def test_product_matches_matrices(a, b, pa, pb):
    p, q = PauliString.from_letters(a, pa), PauliString.from_letters(b, pb)
    assert np.allclose(mat(p * q), mat(p) @ mat(q))


@given(words, words)
def test_commutation_matches_matrices(a, b):
    p, q = PauliString.from_letters(a), PauliString.from_letters(b)
    m, n = mat(p), mat(q)
    assert p.commutes_with(q) == np.allclose(m @ n, n @ m)


def test_single_site_table():
    x, y, z = (PauliString({0: c}) for c in "XYZ")
    assert x * y == PauliString({0: "Z"}, 1)
    assert y * x == PauliString({0: "Z"}, 3)
    assert z * z == PauliString()
    assert product([x, y, z]) == PauliString({}, 1)


def test_hermiticity_and_sign():
    assert PauliString({0: "X"}, 2).sign == -1
    assert not PauliString({0: "X"}, 1).is_hermitian
    assert (-PauliString({1: "Z"})).phase == 2


def test_identity_entries_dropped_and_bits():
    p = PauliString({0: "I", 2: "Y", 1: "x"})
    assert p.support == (1, 2)
    assert p.letters(4) == "IXYI"
    assert p.bits(3) == ([0, 1, 1], [0, 0, 1])
    assert PauliString.from_bits([0, 1, 1], [0, 0, 1]) == p
