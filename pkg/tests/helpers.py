"""Shared test utilities: random composition trees with mirrored direct
arithmetic, and nonlinear-system corpora with known nonzero roots."""

from __future__ import annotations

import numpy as np

from qroot.block_encoding import (
    amplify,
    bounded_diag,
    from_state_diag,
    lin_combo,
    product,
    projector,
    scale_down,
    tensor,
    unitary_encoding,
)
from qroot.nonlinear_system import FunctionFamily, Kind


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_leaf(rng, dim):
    """A primitive encoding plus its expected effective matrix."""
    kind = rng.integers(0, 4)
    if kind == 0:
        v = rng.uniform(-0.9, 0.9, dim)
        return bounded_diag(v), np.diag(v.astype(np.complex128))
    if kind == 1:
        u = random_unitary(rng, dim)
        return unitary_encoding(u), u
    if kind == 2:
        j = int(rng.integers(0, dim))
        enc = projector(j, dim)
        return enc, enc.op.copy()
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return from_state_diag(psi), np.diag(psi)


def random_composition(rng, max_dim=64, ops=6):
    """Compose a random encoding tree, mirroring every step with direct
    matrix arithmetic on the expected effective matrix."""
    dim = int(2 ** rng.integers(1, 4))
    enc, expect = random_leaf(rng, dim)
    for _ in range(ops):
        choice = rng.integers(0, 5)
        if choice == 0:
            other, oexp = random_leaf(rng, enc.dim)
            enc, expect = product(enc, other), expect @ oexp
        elif choice == 1:
            terms, exps = [enc], [expect]
            m = int(rng.integers(2, 4))
            for _ in range(m - 1):
                o, oe = random_leaf(rng, enc.dim)
                terms.append(o)
                exps.append(oe)
            signs = [int(s) for s in rng.choice([-1, 1], size=m)]
            enc = lin_combo(terms, signs)
            expect = sum(s * e for s, e in zip(signs, exps)) / m
        elif choice == 2 and enc.dim * 2 <= max_dim:
            other, oexp = random_leaf(rng, 2)
            enc, expect = tensor(enc, other), np.kron(expect, oexp)
        elif choice == 3:
            p = float(rng.uniform(1.5, 4.0))
            enc, expect = scale_down(enc, p), expect / p
        else:
            smax = float(np.linalg.svd(expect, compute_uv=False)[0]) \
                if expect.size else 0.0
            if smax <= 0:
                continue
            gamma = min(float(rng.uniform(1.2, 3.0)), 0.85 / smax)
            if gamma <= 1.0:
                continue
            enc, expect = amplify(enc, gamma, 0.1, 1e-9), gamma * expect
    return enc, expect


def shared_system_with_root(rng, n, max_tries=50):
    """Shared-form sum-of-powers system with a known root away from zero.

    The linear layer stays a well-conditioned near-identity matrix; the
    quadratic layer is corrected by a rank-one term so the chosen root
    solves the system exactly without degrading the Jacobian."""
    for _ in range(max_tries):
        xstar = rng.uniform(0.1, 0.3, n) * rng.choice([-1, 1], n)
        squares = xstar**2
        base = np.eye(n) + 0.1 * rng.standard_normal((n, n)) / np.sqrt(n)
        quad = 0.1 * rng.standard_normal((n, n))
        quad = quad - np.outer(quad @ squares + base @ xstar,
                               squares) / float(squares @ squares)
        a = np.stack([base, quad], axis=1)
        family = FunctionFamily(Kind.SUM_OF_POWERS, a)
        if np.max(np.abs(family.eval(xstar))) > 1e-12:
            continue
        if np.linalg.cond(family.jacobian(xstar)) > 8.0:
            continue
        return family, xstar
    raise RuntimeError("failed to build a conditioned corpus instance")


def random_grid_polynomial(rng, nvars, max_degree=6, max_terms=4,
                           grid_points=None):
    """Random monomial polynomial rescaled so |f| <= 0.45 on the probe set
    (and on the supplied grid points, when given)."""
    from qroot.root_dissect import MultivariatePolynomial

    k = int(rng.integers(1, max_terms + 1))
    exps = rng.integers(0, max_degree + 1, size=(k, nvars))
    coeffs = rng.uniform(-1.0, 1.0, k)
    poly = MultivariatePolynomial(coeffs, exps)
    bound = 0.5 if nvars == 1 else 1.0
    probe = rng.uniform(-bound, bound, size=(512, nvars))
    corners = np.array(np.meshgrid(*[[-bound, bound]] * nvars)).T.reshape(-1, nvars)
    worst = max(float(np.max(np.abs(poly(probe)))),
                float(np.max(np.abs(poly(corners)))), 1e-9)
    if grid_points is not None:
        worst = max(worst, float(np.max(np.abs(poly(grid_points)))))
    return MultivariatePolynomial(coeffs * (0.45 / worst), exps)


def random_dissection_instance(rng, nvars, n):
    """(polynomial, grid) pair honoring the 1/2 value bound on the grid."""
    from qroot.root_dissect import SampleGrid

    bound = 0.5 if nvars == 1 else 1.0
    pts = rng.uniform(-bound, bound, size=(n, nvars))
    poly = random_grid_polynomial(rng, nvars, grid_points=pts)
    return poly, SampleGrid(pts)
