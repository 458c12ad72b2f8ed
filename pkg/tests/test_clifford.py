import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracspec.clifford import (
    alpha,
    dirac_dot,
    dirac_exp,
    pauli,
    plus_eigenspinor,
    unit_vector,
)
from diracspec.errors import ArgumentError


def naive_matmul(a, b):
    n = len(a)
    return np.array([[sum(a[i][l] * b[l][j] for l in range(n)) for j in range(n)] for i in range(n)])


K122 = np.array([1.0, 2.0, 2.0]) / 3.0


def test_pauli_entries():
    assert np.array_equal(pauli(1), [[0, 1], [1, 0]])
    assert np.array_equal(pauli(2), [[0, -1j], [1j, 0]])
    assert np.array_equal(pauli(3), [[1, 0], [0, -1]])


@pytest.mark.parametrize("j", [1, 2, 3])
def test_pauli_hermitian_involutive(j):
    s = pauli(j)
    assert np.array_equal(s, s.conj().T)
    assert np.array_equal(naive_matmul(s, s), np.eye(2))


def test_pauli_product():
    # hand multiplication: [[0,-i],[i,0]] [[0,1],[1,0]] = [[-i,0],[0,i]]
    assert np.array_equal(naive_matmul(pauli(2), pauli(1)), [[-1j, 0], [0, 1j]])
    assert np.allclose(pauli(2) @ pauli(1), -1j * pauli(3), atol=0)


@pytest.mark.parametrize("bad", [0, 4, -1, 1.5])
def test_index_errors(bad):
    with pytest.raises(ArgumentError):
        pauli(bad)
    with pytest.raises(ArgumentError):
        alpha(bad)


def test_alpha_block_structure():
    a1 = alpha(1)
    assert a1[0, 2] == 0 and a1[0, 3] == 1
    assert np.array_equal(naive_matmul(alpha(2), alpha(2)), np.eye(4))


def test_alpha_anticommute():
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            ac = naive_matmul(alpha(i), alpha(j)) + naive_matmul(alpha(j), alpha(i))
            expected = 2 * np.eye(4) if i == j else np.zeros((4, 4))
            assert np.array_equal(ac, expected)


def test_dirac_dot_basis_and_square():
    assert np.array_equal(dirac_dot([1.0, 0.0, 0.0], 3), alpha(1))
    a = dirac_dot(K122, 3)
    assert np.allclose(a @ a, np.eye(4), atol=1e-14, rtol=0)
    ev = np.sort(np.linalg.eigvalsh(a))
    assert np.allclose(ev, [-1, -1, 1, 1], atol=1e-14)


def test_dirac_dot_dimension_mismatch():
    with pytest.raises(ArgumentError):
        dirac_dot([1.0, 0.0], 3)
    with pytest.raises(ArgumentError):
        dirac_dot([1.0, 0.0, 0.0, 0.0])


vectors = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


@given(vectors)
def test_dirac_dot_square_property(v):
    v = np.array(v)
    a = dirac_dot(v)
    assert np.allclose(a @ a, np.dot(v, v) * np.eye(4), atol=1e-12 * (1 + np.dot(v, v)), rtol=0)


@given(vectors, st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_dirac_dot_norm_identity(v, uparts):
    v = np.array(v)
    u = np.array(uparts[:4]) + 1j * np.array(uparts[4:])
    lhs = np.linalg.norm(dirac_dot(v) @ u)
    rhs = np.linalg.norm(v) * np.linalg.norm(u)
    assert abs(lhs - rhs) <= 1e-12 * (1 + rhs)


def test_dirac_exp_identity_and_inverse():
    assert np.array_equal(dirac_exp(K122, 0.0), np.eye(4))
    prod = dirac_exp(K122, 0.8) @ dirac_exp(K122, -0.8)
    assert np.allclose(prod, np.eye(4), atol=1e-14, rtol=0)


def test_dirac_exp_unitarity_oracle():
    rng = np.random.default_rng(3)
    u = rng.normal(size=4) + 1j * rng.normal(size=4)
    e = dirac_exp(K122, 1.3)
    eu = np.array([sum(e[i][l] * u[l] for l in range(4)) for i in range(4)])
    assert abs(np.linalg.norm(eu) - np.linalg.norm(u)) < 1e-13


def test_dirac_exp_random_unitary_commuting():
    rng = np.random.default_rng(11)
    for _ in range(100):
        k = unit_vector(rng.normal(size=3))
        theta = rng.uniform(-10, 10)
        e = dirac_exp(k, theta)
        a = dirac_dot(k)
        assert np.allclose(e.conj().T @ e, np.eye(4), atol=1e-13, rtol=0)
        assert np.allclose(e @ a, a @ e, atol=1e-13, rtol=0)


def test_dirac_exp_rejects_non_unit():
    with pytest.raises(ArgumentError):
        dirac_exp([1.0, 1.0, 0.0], 0.3)


def test_plus_eigenspinor_e3():
    phi = plus_eigenspinor([0.0, 0.0, 1.0], 3)
    assert np.allclose(alpha(3) @ phi, phi, atol=1e-15)
    assert abs(np.linalg.norm(phi) - 1) < 1e-15


def test_plus_eigenspinor_oblique_against_eigh():
    phi = plus_eigenspinor(K122, 3)
    a = dirac_dot(K122)
    assert np.linalg.norm(a @ phi - phi) <= 1e-12
    # independent check: phi lies in the span of eigh's +1 eigenvectors
    w, v = np.linalg.eigh(a)
    plus = v[:, w > 0]
    assert np.linalg.norm(plus @ (plus.conj().T @ phi) - phi) <= 1e-12


def test_plus_eigenspinor_2d_and_deterministic():
    k = unit_vector([0.3, -0.7])
    phi = plus_eigenspinor(k, 2)
    assert np.linalg.norm(dirac_dot(k) @ phi - phi) <= 1e-12
    again = plus_eigenspinor(k, 2)
    assert phi.tobytes() == again.tobytes()


@settings(max_examples=50)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_plus_eigenspinor_any_direction(v):
    k = unit_vector(v)
    phi = plus_eigenspinor(k)
    assert abs(np.linalg.norm(phi) - 1) < 1e-12
    assert np.linalg.norm(dirac_dot(k) @ phi - phi) <= 1e-12
