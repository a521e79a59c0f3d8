"""Extremal-eigenvalue and condition-number probes for block-encoded
operators, implemented as power iteration inside the query model.

The charged iteration budget is ceil((1/eps) * (log2 dim + log2(1/eps)));
the physical loop may stop early once the Rayleigh quotient plateaus, but
the ledger always charges the full budget. An exact eigensolver is used
only to validate preconditions (positivity) and to flag degenerate gaps,
never to produce the returned estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .block_encoding import (
    BlockEncoding,
    CostLedger,
    identity_encoding,
    lin_combo,
)
from .matrix_core import exactly_diagonal

DEFAULT_PROBE_SEED = 20240317

#: measured top-gap below which the estimate is flagged degenerate
DEGENERATE_GAP = 1e-6


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    additive_error: float
    iterations: int
    cost: CostLedger
    degenerate: bool = field(default=False)

    def __post_init__(self):
        if self.additive_error <= 0:
            raise ValueError("additive error must be positive")
        if self.iterations < 1:
            raise ValueError("iteration count must be at least 1")


def iteration_budget(dim: int, eps: float) -> int:
    """Charged power-iteration budget: (1/eps)(log2 dim + log2(1/eps))."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    return max(1, int(math.ceil((1.0 / eps) * (math.log2(max(2, dim))
                                               + math.log2(1.0 / eps)))))


def _run_power(block: np.ndarray, budget: int, eps: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(block.shape[0]) + 1j * rng.standard_normal(block.shape[0])
    stop = eps * 1e-4
    if exactly_diagonal(block):
        d = np.ascontiguousarray(np.diag(block))
        lam, _ = _kernels.power_iteration_diag(d, v0, budget, stop, 32)
    else:
        lam, _ = _kernels.power_iteration_dense(
            np.ascontiguousarray(block), v0, budget, stop, 32)
    return float(lam)


def max_eigenvalue(u: BlockEncoding, eps: float,
                   seed: int = DEFAULT_PROBE_SEED) -> SpectralEstimate:
    """Estimate the largest eigenvalue of op/alpha to additive accuracy eps.

    Requires the encoded block to be positive semidefinite (validated
    exactly; rejection reports the offending eigenvalue). Cost charges the
    full budget of applications of the constituent encoding.
    """
    block = u.effective
    budget = iteration_budget(u.dim, eps)
    if exactly_diagonal(block):
        spec = np.sort(np.real(np.diag(block)))[::-1]
    else:
        spec = np.sort(np.linalg.eigvalsh((block + block.conj().T) / 2.0))[::-1]
    if spec[-1] < -1e-10:
        raise ValueError(
            f"operator is not positive semidefinite: min eigenvalue {spec[-1]:.3e}")
    degenerate = bool(spec.size > 1 and (spec[0] - spec[1]) < DEGENERATE_GAP)
    lam = _run_power(block, budget, eps, seed)
    cost = u.cost.times(budget).merge(CostLedger(modeled_depth=float(budget)))
    return SpectralEstimate(lam, eps, budget, cost, degenerate)


def _shifted(u: BlockEncoding, sign: int) -> BlockEncoding:
    """(I + sign * op/alpha)/2 through the linear-combination recipe."""
    return lin_combo([identity_encoding(u.dim), u], [1, sign])


def min_via_shift(u: BlockEncoding, eps: float,
                  seed: int = DEFAULT_PROBE_SEED) -> float:
    """Smallest diagonal value of an encoded diag(f), |f| <= 1/2, error <= 2 eps."""
    fmax = float(np.max(np.abs(np.diag(u.effective))))
    if fmax > 0.5 + 1e-9:
        raise ValueError(f"entries must satisfy |f| <= 1/2, got max {fmax:.6f}")
    est = max_eigenvalue(_shifted(u, -1), eps, seed=seed)
    return 1.0 - 2.0 * est.value


def max_via_shift(u: BlockEncoding, eps: float,
                  seed: int = DEFAULT_PROBE_SEED) -> float:
    """Mirror of min_via_shift: largest diagonal value, error <= 2 eps."""
    fmax = float(np.max(np.abs(np.diag(u.effective))))
    if fmax > 0.5 + 1e-9:
        raise ValueError(f"entries must satisfy |f| <= 1/2, got max {fmax:.6f}")
    est = max_eigenvalue(_shifted(u, +1), eps, seed=seed)
    return 2.0 * est.value - 1.0


def probe_costs(u: BlockEncoding, eps: float) -> CostLedger:
    """Ledger charged by one shifted extremal probe on u."""
    budget = iteration_budget(u.dim, eps)
    return _shifted(u, -1).cost.times(budget).merge(
        CostLedger(modeled_depth=float(budget)))


def condition_number(u: BlockEncoding, eps: float,
                     sigma_min_floor: float | None = None,
                     seed: int = DEFAULT_PROBE_SEED) -> tuple[float, CostLedger]:
    """Estimate sigma_max/sigma_min of op/alpha via Gram-matrix probes.

    sigma_max^2 comes from power iteration on B^H B; sigma_min^2 from the
    complementary shift sigma_max^2 I - B^H B. If sigma_min_floor is given
    and the measured sigma_min falls below it, the call is rejected.
    """
    block = u.effective
    gram = block.conj().T @ block
    budget = iteration_budget(u.dim, eps)
    eps_sq = max(eps * 1e-2, 1e-12)
    top = _run_power(gram, budget, eps_sq, seed)
    top = max(top, 0.0)
    shifted = top * np.eye(u.dim) - gram
    low = top - _run_power(shifted, budget, eps_sq, seed + 1)
    low = max(low, 0.0)
    smax = math.sqrt(top)
    smin = math.sqrt(low)
    if sigma_min_floor is not None and smin < sigma_min_floor:
        raise ValueError(
            f"smallest singular value {smin:.6e} below floor {sigma_min_floor:.6e}")
    if smin <= 0:
        raise ValueError("operator is singular; condition number undefined")
    cost = u.cost.times(4 * budget).merge(
        CostLedger(modeled_depth=float(2 * budget)))
    return smax / smin, cost
