"""Composable block-encoding algebra with additive resource accounting.

A BlockEncoding carries a target operator ``op``, a subnormalization
``alpha`` (the dilated unitary holds op/alpha in its top-left block), an
error bound ``eps`` and a CostLedger. The simulator composes these tuples
exactly at the matrix level; the enclosing unitary is materialized only on
demand by :func:`dilate`.

Error bounds compose first-order (alpha-weighted sums); they are sound
upper estimates, never measurements. Ledger charges mirror the query model:
an operation that uses a constituent encoding m times merges m copies of
its ledger, so nested pipelines accumulate multiplicative cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .matrix_core import (
    as_cmatrix,
    as_cvector,
    exactly_diagonal,
    is_power_of_two,
    max_abs,
    spectral_norm,
)

#: modeled circuit depth charged per qubit of a state-preparation resource
DEPTH_PER_QUBIT = 1.0

#: default singular-value margin used by amplification call sites
AMPLIFY_DELTA = 0.1

_NORM_SLACK = 1e-9


@dataclass(frozen=True)
class CostLedger:
    """Additive resource counts standing in for circuit complexity.

    ``modeled_depth`` is the headline scalar used by the scaling fits.
    """

    base_unitary_uses: int = 0
    state_prep_queries: int = 0
    modeled_depth: float = 0.0
    qsvt_degree_total: int = 0

    def __post_init__(self):
        if (self.base_unitary_uses < 0 or self.state_prep_queries < 0
                or self.modeled_depth < 0 or self.qsvt_degree_total < 0):
            raise ValueError("ledger fields must be nonnegative")

    def merge(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(
            self.base_unitary_uses + other.base_unitary_uses,
            self.state_prep_queries + other.state_prep_queries,
            self.modeled_depth + other.modeled_depth,
            self.qsvt_degree_total + other.qsvt_degree_total,
        )

    def times(self, k) -> "CostLedger":
        """Scale every count by k >= 0 (k uses of the underlying circuit)."""
        if k < 0:
            raise ValueError("ledger multiplier must be nonnegative")
        return CostLedger(
            int(self.base_unitary_uses * k),
            int(self.state_prep_queries * k),
            self.modeled_depth * k,
            int(self.qsvt_degree_total * k),
        )

    @property
    def total(self) -> float:
        return self.modeled_depth

    def as_dict(self) -> dict:
        return {
            "base_unitary_uses": self.base_unitary_uses,
            "state_prep_queries": self.state_prep_queries,
            "modeled_depth": self.modeled_depth,
            "qsvt_degree_total": self.qsvt_degree_total,
        }


@dataclass(frozen=True)
class BlockEncoding:
    """Target operator plus (alpha, ancillas, eps, cost) metadata.

    The semantically encoded block is ``op / alpha``; spectral norm of
    ``op`` never exceeds alpha (up to float slack), so the block is a
    contraction and :func:`dilate` can complete it to a unitary.
    """

    op: np.ndarray
    alpha: float
    ancillas: int
    eps: float
    cost: CostLedger

    def __post_init__(self):
        object.__setattr__(self, "op", as_cmatrix(self.op))
        if self.alpha <= 0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if self.ancillas < 0:
            raise ValueError(f"ancillas must be nonnegative, got {self.ancillas}")
        nrm = spectral_norm(self.op)
        if nrm > self.alpha * (1.0 + 1e-12) + _NORM_SLACK:
            raise ValueError(
                f"spectral norm {nrm:.6e} exceeds subnormalization {self.alpha:.6e}")

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def effective(self) -> np.ndarray:
        """The block actually encoded: op/alpha."""
        return self.op / self.alpha


def _qubits(dim: int) -> int:
    return int(round(math.log2(dim))) if dim > 1 else 0


def identity_encoding(dim: int) -> BlockEncoding:
    """Exact encoding of the identity (one extra control qubit, O(1) depth)."""
    return BlockEncoding(np.eye(dim, dtype=np.complex128), 1.0, 1, 0.0,
                         CostLedger(modeled_depth=1.0))


def unitary_encoding(u: np.ndarray, depth: float | None = None,
                     base_uses: int = 0) -> BlockEncoding:
    """A unitary block-encodes itself (alpha = 1, no ancillas)."""
    u = as_cmatrix(u)
    if max_abs(u @ u.conj().T - np.eye(u.shape[0])) > 1e-10:
        raise ValueError("matrix is not unitary")
    if depth is None:
        depth = float(max(1, _qubits(u.shape[0])))
    return BlockEncoding(u, 1.0, 0, 0.0,
                         CostLedger(base_unitary_uses=base_uses, modeled_depth=depth))


def from_state_diag(psi) -> BlockEncoding:
    """Exact diagonal encoding diag(psi) of a unit-norm state psi.

    Charges one state-preparation query and Theta(log dim) modeled depth;
    ancilla count is log2(dim) + 3.
    """
    psi = as_cvector(psi)
    nrm = float(np.linalg.norm(psi))
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"state must be unit norm, got ||psi|| = {nrm:.12f}")
    if not is_power_of_two(psi.size):
        raise ValueError(f"dimension must be a power of two, got {psi.size}")
    q = _qubits(psi.size)
    return BlockEncoding(
        np.diag(psi), 1.0, q + 3, 0.0,
        CostLedger(base_unitary_uses=1, state_prep_queries=1,
                   modeled_depth=DEPTH_PER_QUBIT * max(1, q)))


def bounded_diag(v) -> BlockEncoding:
    """Diagonal encoding diag(v) at alpha = 1 for entrywise-bounded v.

    diag(v) has operator norm max|v_j| <= 1, so it is a valid alpha = 1
    encoding; the loader is modeled as an abstract state-preparation
    resource with the same charge as :func:`from_state_diag`. Vector-norm
    bookkeeping is unnecessary at the operator level.
    """
    v = as_cvector(v)
    if not is_power_of_two(v.size):
        raise ValueError(f"dimension must be a power of two, got {v.size}")
    m = max_abs(v)
    if m > 1.0 + 1e-12:
        raise ValueError(f"entries must satisfy |v_j| <= 1, got max {m:.6f}")
    q = _qubits(v.size)
    return BlockEncoding(
        np.diag(v), 1.0, q + 3, 0.0,
        CostLedger(base_unitary_uses=1, state_prep_queries=1,
                   modeled_depth=DEPTH_PER_QUBIT * max(1, q)))


def projector(j: int, dim: int) -> BlockEncoding:
    """Encoding of the rank-one projector |j><j|."""
    if not is_power_of_two(dim):
        raise ValueError(f"dimension must be a power of two, got {dim}")
    if not 0 <= j < dim:
        raise ValueError(f"index {j} out of range for dimension {dim}")
    p = np.zeros((dim, dim), dtype=np.complex128)
    p[j, j] = 1.0
    q = _qubits(dim)
    return BlockEncoding(p, 1.0, q + 3, 0.0,
                         CostLedger(base_unitary_uses=1, state_prep_queries=2,
                                    modeled_depth=DEPTH_PER_QUBIT * max(1, q)))


def product(u1: BlockEncoding, u2: BlockEncoding) -> BlockEncoding:
    """Encoding of op1 @ op2; one use of each constituent."""
    if u1.op.shape[1] != u2.op.shape[0]:
        raise ValueError(
            f"inner dimensions mismatch: {u1.op.shape} vs {u2.op.shape}")
    cost = u1.cost.merge(u2.cost).merge(CostLedger(modeled_depth=1.0))
    if exactly_diagonal(u1.op) and exactly_diagonal(u2.op):
        op = np.diag(np.diag(u1.op) * np.diag(u2.op))
    else:
        op = u1.op @ u2.op
    return BlockEncoding(op, u1.alpha * u2.alpha,
                         u1.ancillas + u2.ancillas,
                         u1.alpha * u2.eps + u2.alpha * u1.eps, cost)


def lin_combo(terms: list[BlockEncoding], signs=None) -> BlockEncoding:
    """Encoding of (1/m) * sum_i s_i * (op_i/alpha_i), uniform weights.

    Terms with unequal alphas are first rescaled to the largest alpha
    (scale_down), so the returned pair satisfies
    op/alpha = (1/m) sum_i s_i op_i/alpha_i with alpha = max_i alpha_i.
    Charges a single use of each term plus O(m) combination overhead.
    """
    if not terms:
        raise ValueError("lin_combo requires at least one term")
    m = len(terms)
    if signs is None:
        signs = [1] * m
    if len(signs) != m:
        raise ValueError("one sign per term required")
    if any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be +1 or -1")
    dim0 = terms[0].op.shape
    for t in terms[1:]:
        if t.op.shape != dim0:
            raise ValueError("all terms must share the same dimension")
    amax = max(t.alpha for t in terms)
    op = np.zeros(dim0, dtype=np.complex128)
    eps = 0.0
    cost = CostLedger(modeled_depth=float(m))
    anc = 0
    for s, t in zip(signs, terms):
        op += s * (amax / t.alpha) * t.op
        eps = max(eps, t.eps)
        cost = cost.merge(t.cost)
        anc = max(anc, t.ancillas)
    q = _qubits(1 << max(1, (m - 1).bit_length()))
    return BlockEncoding(op / m, amax, anc + q + 1, eps, cost)


def direct_sum(terms: list[BlockEncoding]) -> BlockEncoding:
    """Block-diagonal join of encodings with pairwise orthogonal supports.

    A selected (index-controlled) application of each constituent realizes
    the direct sum without the uniform-weight prefactor of a linear
    combination: one use of each term, depth additive plus the select
    overhead of log(m) control qubits.
    """
    if not terms:
        raise ValueError("direct_sum requires at least one term")
    amax = max(t.alpha for t in terms)
    blocks = []
    cost = CostLedger(modeled_depth=float(max(1, _qubits(
        1 << max(1, (len(terms) - 1).bit_length())))))
    eps = 0.0
    anc = 0
    for t in terms:
        blocks.append(t.op * (amax / t.alpha))
        cost = cost.merge(t.cost)
        eps = max(eps, t.eps * amax / t.alpha)
        anc = max(anc, t.ancillas)
    dim = sum(b.shape[0] for b in blocks)
    op = np.zeros((dim, dim), dtype=np.complex128)
    at = 0
    for b in blocks:
        d = b.shape[0]
        op[at:at + d, at:at + d] = b
        at += d
    q = _qubits(1 << max(1, (len(terms) - 1).bit_length()))
    return BlockEncoding(op, amax, anc + q, eps, cost)


def tensor(u1: BlockEncoding, u2: BlockEncoding) -> BlockEncoding:
    """Encoding of op1 (x) op2; parallel single uses, depth max + O(1)."""
    lg1, lg2 = u1.cost, u2.cost
    cost = CostLedger(
        lg1.base_unitary_uses + lg2.base_unitary_uses,
        lg1.state_prep_queries + lg2.state_prep_queries,
        max(lg1.modeled_depth, lg2.modeled_depth) + 1.0,
        lg1.qsvt_degree_total + lg2.qsvt_degree_total,
    )
    return BlockEncoding(np.kron(u1.op, u2.op), u1.alpha * u2.alpha,
                         u1.ancillas + u2.ancillas,
                         u1.alpha * u2.eps + u2.alpha * u1.eps, cost)


def scale_down(u: BlockEncoding, p: float) -> BlockEncoding:
    """Divide the encoded block by p > 1 (alpha <- alpha * p, O(1) cost)."""
    if p <= 1.0:
        raise ValueError(f"scale factor must exceed 1, got {p}")
    return replace(u, alpha=u.alpha * p,
                   cost=u.cost.merge(CostLedger(modeled_depth=1.0)))


def amplify_iterations(gamma: float, delta: float, eps_target: float) -> int:
    """Model count of base-unitary uses for amplification."""
    return int(math.ceil((gamma / delta) * math.log(max(gamma / eps_target, math.e))))


def amplify(u: BlockEncoding, gamma: float, delta: float,
            eps_target: float) -> BlockEncoding:
    """Multiply the encoded block by gamma > 1 (alpha <- alpha/gamma).

    Requires every singular value of op/alpha to sit below (1-delta)/gamma;
    violations are rejected with the offending value. Charges
    m = ceil((gamma/delta) ln(gamma/eps_target)) uses of the constituent.
    """
    if gamma <= 1.0:
        raise ValueError(f"amplification factor must exceed 1, got {gamma}")
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    smax = spectral_norm(u.effective)
    bound = (1.0 - delta) / gamma
    if smax > bound * (1.0 + 1e-9) + 1e-15:
        raise ValueError(
            f"amplification margin violated: max singular value {smax:.6e} "
            f"> (1-delta)/gamma = {bound:.6e}")
    m = amplify_iterations(gamma, delta, eps_target)
    cost = u.cost.times(2 * m).merge(CostLedger(modeled_depth=float(m)))
    return BlockEncoding(u.op, u.alpha / gamma, u.ancillas + 1,
                         gamma * u.eps + eps_target, cost)


def density_from_purification(phi, dim_b: int) -> BlockEncoding:
    """Exact encoding of rho = Tr_A |phi><phi| for phi on H_A (x) H_B.

    The traced-out register A is the leading factor. Charges two
    state-preparation queries (U and U^dagger once each).
    """
    phi = as_cvector(phi)
    nrm = float(np.linalg.norm(phi))
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"purification must be unit norm, got {nrm:.12f}")
    if phi.size % dim_b != 0:
        raise ValueError(f"total dimension {phi.size} not divisible by {dim_b}")
    mat = phi.reshape(phi.size // dim_b, dim_b)
    rho = mat.T @ mat.conj()  # rho[i,j] = sum_a phi[a,i] conj(phi[a,j])
    q = _qubits(max(2, dim_b))
    return BlockEncoding(rho, 1.0, _qubits(phi.size // dim_b) + 1, 0.0,
                         CostLedger(base_unitary_uses=2, state_prep_queries=2,
                                    modeled_depth=DEPTH_PER_QUBIT * q))


def column_to_diag(u: BlockEncoding) -> BlockEncoding:
    """Diagonal encoding of the first column of the encoded block.

    The constituent acts as the state-preparation unitary of the diagonal
    construction (O(1) controlled queries), so the full producing ledger is
    inherited.
    """
    col = u.op[:, 0]
    q = _qubits(u.dim)
    cost = u.cost.merge(CostLedger(base_unitary_uses=1, state_prep_queries=1,
                                   modeled_depth=DEPTH_PER_QUBIT * max(1, q)))
    return BlockEncoding(np.diag(col), u.alpha, u.ancillas + q + 3, u.eps, cost)


def take_block(u: BlockEncoding, dim: int) -> BlockEncoding:
    """Reinterpret the top-left dim x dim block as the encoded operator."""
    if dim > u.dim or dim < 1:
        raise ValueError(f"block dimension {dim} out of range")
    extra = _qubits(u.dim) - _qubits(dim)
    return replace(u, op=u.op[:dim, :dim].copy(), ancillas=u.ancillas + extra)


def transpose(u: BlockEncoding) -> BlockEncoding:
    return replace(u, op=u.op.T.copy())


def negate(u: BlockEncoding) -> BlockEncoding:
    """Global phase flip; free."""
    return replace(u, op=-u.op)


def rescale_declaration(u: BlockEncoding, s: float) -> BlockEncoding:
    """Multiply op and alpha by s > 0; the encoded block is unchanged.

    Pure bookkeeping used to present a composite at its natural scale
    (e.g. declaring C rather than C/max|lambda|).
    """
    if s <= 0:
        raise ValueError("scale must be positive")
    return replace(u, op=u.op * s, alpha=u.alpha * s)


def dilate(u: BlockEncoding) -> np.ndarray:
    """Two-block unitary completion with op/alpha in the top-left corner.

    Uses SVD defect square roots; valid whenever ||op/alpha|| <= 1.
    """
    b = u.effective
    w, s, vh = np.linalg.svd(b)
    if s.size and s[0] > 1.0 + 1e-9:
        raise ValueError(f"encoded block has norm {s[0]:.6e} > 1; cannot dilate")
    s = np.clip(s, 0.0, 1.0)
    c = np.sqrt(1.0 - s**2)
    top_right = w @ np.diag(c) @ w.conj().T
    bottom_left = vh.conj().T @ np.diag(c) @ vh
    bottom_right = -vh.conj().T @ np.diag(s) @ w.conj().T
    return np.block([[b, top_right], [bottom_left, bottom_right]])


def to_json_dict(u: BlockEncoding) -> dict:
    """Debug serialization (matrix entries, alpha, eps, ledger)."""
    return {
        "dim": u.dim,
        "op_real": np.real(u.op).tolist(),
        "op_imag": np.imag(u.op).tolist(),
        "alpha": u.alpha,
        "ancillas": u.ancillas,
        "eps": u.eps,
        "cost": u.cost.as_dict(),
    }


def from_json_dict(d: dict) -> BlockEncoding:
    op = np.asarray(d["op_real"], dtype=np.float64) + 1j * np.asarray(
        d["op_imag"], dtype=np.float64)
    return BlockEncoding(op, d["alpha"], d["ancillas"], d["eps"],
                         CostLedger(**d["cost"]))


def to_json(u: BlockEncoding) -> str:
    return json.dumps(to_json_dict(u), sort_keys=True)
