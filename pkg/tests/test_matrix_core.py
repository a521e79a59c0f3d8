import numpy as np
import pytest

from qroot.matrix_core import (
    eig_hermitian,
    exactly_diagonal,
    hadamard_power,
    qft,
    spectral_norm,
)


def dft_oracle(n):
    """Brute-force definition sum, entry by entry."""
    out = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            out[j, k] = np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)
    return out


def test_qft_trivial_sizes():
    np.testing.assert_allclose(qft(1), [[1.0]])
    np.testing.assert_allclose(qft(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2),
                               atol=1e-15)


def test_qft_matches_direct_dft_sum():
    for n in (4, 8, 16):
        np.testing.assert_allclose(qft(n), dft_oracle(n), atol=1e-14)


def test_qft_unitary_up_to_1024():
    n = 1
    while n <= 1024:
        f = qft(n)
        resid = np.max(np.abs(f @ f.conj().T - np.eye(n)))
        assert resid <= 1e-12
        n *= 2


def test_qft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        qft(3)


def test_hadamard_trivial():
    np.testing.assert_allclose(hadamard_power(0), [[1.0]])
    np.testing.assert_allclose(hadamard_power(1),
                               np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def test_hadamard_column_zero_uniform():
    h = hadamard_power(3)
    np.testing.assert_allclose(h[:, 0], np.full(8, 1 / np.sqrt(8)))


def test_hadamard_sign_pattern_parity_oracle():
    q = 4
    h = hadamard_power(q)
    n = 2**q
    for j in range(n):
        for k in range(n):
            sign = (-1) ** bin(j & k).count("1")
            assert abs(h[j, k] - sign / np.sqrt(n)) < 1e-14


def test_hadamard_involutory():
    for q in range(5):
        h = hadamard_power(q)
        resid = np.max(np.abs(h @ h - np.eye(2**q)))
        assert resid <= 1e-12


def test_eig_trivial_diag():
    w, _ = eig_hermitian(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(w, [2.0, 1.0])


def test_eig_pauli_x():
    w, _ = eig_hermitian(np.array([[0, 1], [1, 0]], dtype=float))
    np.testing.assert_allclose(w, [1.0, -1.0], atol=1e-12)


def test_eig_reconstruction_random_8x8():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    a = (z + z.conj().T) / 2
    w, v = eig_hermitian(a)
    resid = np.max(np.abs(v @ np.diag(w) @ v.conj().T - a))
    assert resid <= 1e-10
    assert np.all(np.diff(w) <= 1e-12)


def test_eig_matches_characteristic_roots_small():
    rng = np.random.default_rng(8)
    for n in (2, 3):
        for _ in range(20):
            z = rng.standard_normal((n, n))
            a = (z + z.T) / 2
            w, _ = eig_hermitian(a)
            # characteristic polynomial root oracle
            roots = np.sort(np.real(np.roots(np.poly(a))))[::-1]
            np.testing.assert_allclose(w, roots, atol=1e-10)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_exactly_diagonal_and_norm():
    d = np.diag([1.0, -3.0, 2.0, 0.5])
    assert exactly_diagonal(d)
    assert spectral_norm(d) == 3.0
    d[0, 1] = 1e-30
    assert not exactly_diagonal(d)
