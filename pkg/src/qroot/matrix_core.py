"""Dense complex matrix substrate: Fourier/Hadamard transforms, Hermitian
eigensolves, norms. All matrices are plain numpy complex128 arrays; helpers
here validate shape/finiteness and fix the package-wide conventions.

Conventions: all register dimensions are powers of two; the discrete Fourier
matrix uses omega = exp(-2*pi*i/n).
"""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-12


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def as_cmatrix(a) -> np.ndarray:
    """Validate and return a finite complex matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    if not (np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag))):
        raise ValueError("matrix contains non-finite entries")
    return m


def as_cvector(v) -> np.ndarray:
    w = np.asarray(v, dtype=np.complex128)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {w.shape}")
    if not (np.all(np.isfinite(w.real)) and np.all(np.isfinite(w.imag))):
        raise ValueError("vector contains non-finite entries")
    return w


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermitian_defect(a: np.ndarray) -> float:
    """Max-entry norm of A - A^dagger."""
    return max_abs(a - a.conj().T)


def is_diagonal(a: np.ndarray, tol: float = 1e-14) -> bool:
    off = a - np.diag(np.diag(a))
    return max_abs(off) <= tol * max(1.0, max_abs(a))


def exactly_diagonal(a: np.ndarray) -> bool:
    """True when every off-diagonal entry is exactly zero (strided view,
    no quadratic copy)."""
    n = a.shape[0]
    if n <= 1 or a.shape[0] != a.shape[1]:
        return n <= 1
    off = a.ravel()[:-1].reshape(n - 1, n + 1)[:, 1:]
    return not np.any(off)


def qft(n: int) -> np.ndarray:
    """Fourier matrix F with F[j, k] = omega^(j*k)/sqrt(n), omega = exp(-2*pi*i/n).

    n must be a power of two (qubit register sizes).
    """
    if not is_power_of_two(n):
        raise ValueError(f"dimension must be a power of two, got {n}")
    j = np.arange(n)
    phase = np.exp(-2j * np.pi / n * np.outer(j, j)) if n > 1 else np.ones((1, 1))
    return phase / np.sqrt(n)


def hadamard_power(q: int) -> np.ndarray:
    """H tensored q times; entries +-1/sqrt(2^q)."""
    if q < 0:
        raise ValueError(f"qubit count must be nonnegative, got {q}")
    h = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)
    out = np.ones((1, 1), dtype=np.complex128)
    for _ in range(q):
        out = np.kron(out, h)
    return out


def eig_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues descending, eigenvectors as columns) satisfying
    A = V diag(w) V^dagger to 1e-10 max-entry norm. Rejects inputs whose
    Hermitian defect exceeds 1e-12 (scaled), reporting the measured value.
    """
    a = as_cmatrix(a)
    defect = hermitian_defect(a)
    scale = max(1.0, max_abs(a))
    if defect > HERMITIAN_TOL * scale:
        raise ValueError(f"matrix is not Hermitian: max |A - A^H| = {defect:.3e}")
    if exactly_diagonal(a):
        d = np.real(np.diag(a))
        order = np.argsort(d)[::-1]
        vecs = np.eye(a.shape[0], dtype=np.complex128)[:, order]
        return d[order].copy(), vecs
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    return w[::-1].copy(), v[:, ::-1].copy()


def spectral_norm(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    if exactly_diagonal(a):
        return max_abs(np.diag(a))
    if min(a.shape) <= 512:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    # large matrices: power iteration on A^H A with deterministic start
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(60):
        w = a.conj().T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.sqrt(np.real(np.vdot(v, a.conj().T @ (a @ v)))))
