"""Numeric inner-loop kernels, numba-jitted when available.

The three hot loops of the package live here: Clenshaw evaluation of
Chebyshev series on point grids, power iteration (dense and diagonal
operators), and monomial evaluation of multivariate polynomials over
sample grids. Everything else in the package is numpy linear algebra
and gains nothing from jitting.

Selection: the jitted variants are used when numba imports and the
environment variable QROOT_NUMBA is not set to "0"/"off"/"false".
`benchmarks/bench_kernels.py` times both paths side by side.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

_flag = os.environ.get("QROOT_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "off", "false", "no")


# ---------------------------------------------------------------------------
# pure-numpy implementations (always available; the reference path)
# ---------------------------------------------------------------------------

def clenshaw_numpy(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_k coeffs[k]*T_k(x) for x in [-1, 1]."""
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(len(coeffs) - 1, 0, -1):
        b1, b2 = coeffs[k] + 2.0 * x * b1 - b2, b1
    return coeffs[0] + x * b1 - b2


def power_iteration_dense_numpy(a, v0, budget, stop_tol, check_every):
    """Rayleigh-quotient power iteration on a Hermitian matrix.

    Returns (estimate, iterations_run). Stops early once the estimate
    plateaus (change below stop_tol over a check window); the caller
    charges the full model budget regardless.
    """
    v = v0 / np.linalg.norm(v0)
    lam = float(np.real(np.vdot(v, a @ v)))
    it = 0
    last = lam
    while it < budget:
        w = a @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, it
        v = w / nrm
        it += 1
        if it % check_every == 0:
            lam = float(np.real(np.vdot(v, a @ v)))
            if abs(lam - last) < stop_tol:
                return lam, it
            last = lam
    lam = float(np.real(np.vdot(v, a @ v)))
    return lam, it


def power_iteration_diag_numpy(d, v0, budget, stop_tol, check_every):
    """Power iteration specialized to diagonal operators (elementwise)."""
    v = v0 / np.linalg.norm(v0)
    lam = float(np.real(np.vdot(v, d * v)))
    it = 0
    last = lam
    while it < budget:
        w = d * v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, it
        v = w / nrm
        it += 1
        if it % check_every == 0:
            lam = float(np.real(np.vdot(v, d * v)))
            if abs(lam - last) < stop_tol:
                return lam, it
            last = lam
    lam = float(np.real(np.vdot(v, d * v)))
    return lam, it


def monomial_grid_numpy(points: np.ndarray, coeffs: np.ndarray,
                        exps: np.ndarray) -> np.ndarray:
    """Evaluate sum_k coeffs[k] * prod_m points[:, m]**exps[k, m]."""
    n = points.shape[0]
    out = np.zeros(n)
    for k in range(coeffs.shape[0]):
        term = np.full(n, coeffs[k])
        for m in range(points.shape[1]):
            e = exps[k, m]
            if e:
                term = term * points[:, m] ** e
        out += term
    return out


# ---------------------------------------------------------------------------
# numba variants
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _clenshaw_nb(coeffs, x):
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for k in range(len(coeffs) - 1, 0, -1):
            tmp = coeffs[k] + 2.0 * x * b1 - b2
            b2 = b1
            b1 = tmp
        return coeffs[0] + x * b1 - b2

    @njit(cache=True)
    def _power_dense_nb(a, v0, budget, stop_tol, check_every):
        v = v0 / np.linalg.norm(v0)
        w = a @ v
        lam = (np.conj(v) * w).sum().real
        it = 0
        last = lam
        while it < budget:
            w = a @ v
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return 0.0, it
            v = w / nrm
            it += 1
            if it % check_every == 0:
                w = a @ v
                lam = (np.conj(v) * w).sum().real
                if abs(lam - last) < stop_tol:
                    return lam, it
                last = lam
        w = a @ v
        lam = (np.conj(v) * w).sum().real
        return lam, it

    @njit(cache=True)
    def _power_diag_nb(d, v0, budget, stop_tol, check_every):
        v = v0 / np.linalg.norm(v0)
        w = d * v
        lam = (np.conj(v) * w).sum().real
        it = 0
        last = lam
        while it < budget:
            w = d * v
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return 0.0, it
            v = w / nrm
            it += 1
            if it % check_every == 0:
                w = d * v
                lam = (np.conj(v) * w).sum().real
                if abs(lam - last) < stop_tol:
                    return lam, it
                last = lam
        w = d * v
        lam = (np.conj(v) * w).sum().real
        return lam, it

    @njit(cache=True)
    def _monomial_nb(points, coeffs, exps):
        n = points.shape[0]
        nvar = points.shape[1]
        out = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for k in range(coeffs.shape[0]):
                term = coeffs[k]
                for m in range(nvar):
                    e = exps[k, m]
                    for _ in range(e):
                        term *= points[i, m]
                acc += term
            out[i] = acc
        return out


if USE_NUMBA:
    clenshaw = _clenshaw_nb
    power_iteration_dense = _power_dense_nb
    # numpy's vectorized complex arithmetic beats the jitted loop for the
    # diagonal case at package sizes; see benchmarks/bench_kernels.py
    power_iteration_diag = power_iteration_diag_numpy
    monomial_grid = _monomial_nb
else:
    clenshaw = clenshaw_numpy
    power_iteration_dense = power_iteration_dense_numpy
    power_iteration_diag = power_iteration_diag_numpy
    monomial_grid = monomial_grid_numpy
