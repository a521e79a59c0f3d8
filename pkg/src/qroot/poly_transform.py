"""Polynomial spectral transforms of block-encoded Hermitian operators.

The transform itself is simulated by eigendecomposition; the ledger still
charges degree-many uses of the constituent encoding so query-cost claims
stay testable. Polynomials live in the Chebyshev basis with a certified
sup bound on [-1, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from . import _kernels
from .block_encoding import (
    AMPLIFY_DELTA,
    BlockEncoding,
    CostLedger,
    amplify,
)
from .matrix_core import eig_hermitian, hermitian_defect, max_abs

#: implementation constant in the inversion degree bound C * kappa * ln(kappa/eps)
INVERSION_DEGREE_CONSTANT = 6.0

#: cost-model constant for fractional powers, kappa * ln^2(kappa/eps) uses
FRACTIONAL_POWER_COST_CONSTANT = 1.0


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in the Chebyshev basis.

    sup_bound is certified by sampling on a dense Chebyshev grid of at
    least 10*degree points; it upper-bounds every sampled value.
    """

    cheb_coeffs: np.ndarray
    degree: int
    sup_bound: float

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        out = _kernels.clenshaw(np.ascontiguousarray(self.cheb_coeffs),
                                np.atleast_1d(x).astype(np.float64))
        return float(out[0]) if scalar else out

    def to_json(self) -> str:
        return json.dumps(list(map(float, self.cheb_coeffs)))

    @staticmethod
    def from_json(text: str) -> "Polynomial":
        return make_polynomial(json.loads(text))


def _cheb_grid(npts: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(npts + 1) / npts)


def make_polynomial(cheb_coeffs) -> Polynomial:
    """Build a Polynomial, trimming trailing zeros and certifying the sup."""
    c = np.asarray(cheb_coeffs, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coefficients must form a nonempty 1-d sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    nz = np.nonzero(c)[0]
    degree = int(nz[-1]) if nz.size else 0
    c = c[:degree + 1].copy()
    grid = _cheb_grid(max(32, 10 * max(1, degree)))
    sup = float(np.max(np.abs(_kernels.clenshaw(np.ascontiguousarray(c), grid))))
    return Polynomial(c, degree, sup * (1.0 + 1e-12))


@dataclass(frozen=True)
class InversionSpec:
    kappa: float
    eps: float

    def __post_init__(self):
        if self.kappa < 1.0:
            raise ValueError(f"condition number must be >= 1, got {self.kappa}")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"accuracy must lie in (0, 1/2), got {self.eps}")


class InversePolynomial(NamedTuple):
    """Odd inverse-approximating polynomial plus its fold-out scale.

    scale * poly(x) approximates 1/(2*kappa*x) on [1/kappa, 1] u [-1, -1/kappa]
    to eps/(2*kappa); poly itself is sup-bounded by 1/2 on [-1, 1]. The scale
    (>= 1) is what the sup constraint costs and is restored by amplification
    at the call site.
    """

    poly: Polynomial
    scale: float
    kappa: float
    eps: float


def inverse_polynomial(spec: InversionSpec) -> InversePolynomial:
    """Odd Chebyshev approximation of x -> 1/(2*kappa*x) on the band.

    Uses the truncated expansion of (1 - (1 - x^2)^b)/x whose Chebyshev
    coefficients are binomial survival probabilities; degree stays below
    INVERSION_DEGREE_CONSTANT * kappa * ln(kappa/eps).
    """
    return _inverse_cached(float(spec.kappa), float(spec.eps))


@lru_cache(maxsize=64)
def _inverse_cached(kappa: float, eps: float) -> InversePolynomial:
    if kappa <= 1.0 + 1e-12:
        # spectrum pinned at +-1; 1/(2x) there is x/2 exactly
        return InversePolynomial(make_polynomial([0.0, 0.5]), 1.0, kappa, eps)
    b = int(math.ceil(kappa**2 * math.log(4.0 * kappa / eps)))
    j0 = int(math.ceil(math.sqrt(b * math.log(32.0 * b / eps))))
    j0 = min(j0, b - 1)
    if j0 > 150_000:
        raise ValueError(
            f"inversion degree ~{2 * j0} is beyond the desk-scale budget "
            f"(kappa={kappa:.3g}, eps={eps:.3g})")
    j = np.arange(j0 + 1)
    tail = binom.sf(b + j, 2 * b, 0.5)  # 2^-2b * sum_{i>j} C(2b, b+i)
    odd = 4.0 * (-1.0) ** j * tail
    coeffs = np.zeros(2 * j0 + 2)
    coeffs[1::2] = odd / (2.0 * kappa)
    raw = make_polynomial(coeffs)
    scale = max(1.0, raw.sup_bound / 0.5) * (1.0 + 1e-12)
    if scale <= 1.0:
        return InversePolynomial(raw, 1.0, kappa, eps)
    # the certified sup rescales exactly with the coefficients
    bounded = Polynomial(raw.cheb_coeffs / scale, raw.degree,
                         raw.sup_bound / scale * (1.0 + 1e-12))
    return InversePolynomial(bounded, scale, kappa, eps)


def qsvt_apply(u: BlockEncoding, p: Polynomial) -> BlockEncoding:
    """Apply p to the spectrum of the encoded Hermitian block.

    Result encodes p(op/alpha) at alpha = 1; charges degree-many uses of
    the constituent and two extra ancillas; error bound becomes
    4*d*sqrt(eps/alpha) per the transform contract.
    """
    a = u.effective
    defect = hermitian_defect(a)
    if defect > 1e-10 * max(1.0, max_abs(a)):
        raise ValueError(f"operator is not Hermitian: max |A - A^H| = {defect:.3e}")
    if p.sup_bound > 0.5 + 1e-12:
        raise ValueError(
            f"polynomial sup bound {p.sup_bound:.6f} exceeds 1/2")
    w, v = eig_hermitian((a + a.conj().T) / 2.0)
    pw = p(w)
    op = (v * pw) @ v.conj().T
    d = max(1, p.degree)
    eps = 4.0 * d * math.sqrt(u.eps / u.alpha) if u.eps > 0 else 0.0
    cost = u.cost.times(d).merge(
        CostLedger(base_unitary_uses=1, modeled_depth=float(d * (u.ancillas + 1)),
                   qsvt_degree_total=d))
    return BlockEncoding(op, 1.0, u.ancillas + 2, eps, cost)


def invert(u: BlockEncoding, kappa: float, eps: float) -> BlockEncoding:
    """Encoding of (1/(2*kappa)) * (op/alpha)^-1 to accuracy eps.

    Precondition (checked by explicit SVD): every singular value of
    op/alpha lies in [1/kappa, 1]. The sup-bound fold of the inversion
    polynomial is restored by amplification, so the result's effective
    matrix carries the advertised 1/(2*kappa) normalization.
    """
    spec = InversionSpec(kappa, eps)
    sv = np.linalg.svd(u.effective, compute_uv=False)
    smax, smin = float(sv[0]), float(sv[-1])
    if smax > 1.0 + 1e-9 or smin < 1.0 / kappa * (1.0 - 1e-9):
        raise ValueError(
            f"spectrum [{smin:.6e}, {smax:.6e}] outside the inversion band "
            f"[{1.0 / kappa:.6e}, 1]")
    inv = inverse_polynomial(spec)
    transformed = qsvt_apply(u, inv.poly)
    if inv.scale <= 1.0 + 1e-12:
        return transformed
    return amplify(transformed, inv.scale, AMPLIFY_DELTA, eps / 4.0)


def fractional_power(u: BlockEncoding, c: float, eps: float,
                     kappa: float | None = None) -> BlockEncoding:
    """Encoding of (op/alpha)^c / 2 for positive spectrum in [1/kappa, 1].

    Simulated exactly per eigenvalue; the ledger charges
    O(kappa * ln^2(kappa/eps)) uses of the constituent.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"exponent must lie in (0, 1), got {c}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = u.effective
    w, v = eig_hermitian((a + a.conj().T) / 2.0)
    if kappa is None:
        if w[-1] <= 0:
            raise ValueError(f"operator is not positive: min eigenvalue {w[-1]:.3e}")
        kappa = 1.0 / w[-1]
    lo, hi = 1.0 / kappa, 1.0
    if w[-1] < lo * (1.0 - 1e-9) or w[0] > hi * (1.0 + 1e-9):
        raise ValueError(
            f"spectrum [{w[-1]:.6e}, {w[0]:.6e}] outside [{lo:.6e}, 1]")
    op = (v * (np.clip(w, lo, hi) ** c / 2.0)) @ v.conj().T
    d = max(1, int(math.ceil(
        FRACTIONAL_POWER_COST_CONSTANT * kappa * math.log(kappa / eps + math.e) ** 2)))
    cost = u.cost.times(d).merge(
        CostLedger(modeled_depth=float(d), qsvt_degree_total=d))
    return BlockEncoding(op, 1.0, u.ancillas + 2, u.eps + eps, cost)
