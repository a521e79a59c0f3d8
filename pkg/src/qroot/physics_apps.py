"""Closed chains of masses coupled by polynomial springs: equilibrium
systems, potential-energy estimation through simulated overlap tests,
time-discretized dynamics, and Lyapunov-exponent estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .block_encoding import (
    BlockEncoding,
    bounded_diag,
    column_to_diag,
    lin_combo,
    product,
    unitary_encoding,
)
from .circulant_pde import CirculantSpec, circulant_encode, fd_coefficients
from .matrix_core import hadamard_power
from .nonlinear_system import FunctionFamily, Kind, classical_newton


@dataclass(frozen=True)
class MassChainSpec:
    """Closed ring of n masses joined by springs with polynomial force law
    F = sum_p springs[p-1] * (stretch)^p."""

    masses: np.ndarray
    springs: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        k = np.asarray(self.springs, dtype=np.float64)
        if m.ndim != 1 or m.size < 2:
            raise ValueError("need at least two masses")
        if np.any(m <= 0):
            raise ValueError("masses must be positive")
        if k.ndim != 1 or k.size < 1:
            raise ValueError("need at least one spring coefficient")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "springs", k)

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def force_depth(self) -> int:
        return self.springs.size


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    step: float
    stencil_order: int = 1

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("horizon and step must be positive")
        n = self.horizon / self.step
        if abs(n - round(n)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of step")
        if round(n) < self.stencil_order:
            raise ValueError("stencil wider than the time horizon")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass(frozen=True)
class LyapunovConfig:
    renorm_interval: float  # T_L, a multiple of the grid step
    n_intervals: int        # N_L with N_L * T_L = horizon
    d0: float               # initial separation norm

    def __post_init__(self):
        if self.renorm_interval <= 0 or self.n_intervals < 1:
            raise ValueError("renormalization schedule must be positive")
        if self.d0 <= 0:
            raise ValueError("initial separation must be positive")


def _dense_diff(n: int) -> np.ndarray:
    """Row i maps x to x_{i+1} - x_i with wraparound."""
    c = -np.eye(n)
    for i in range(n):
        c[i, (i + 1) % n] = 1.0
    return c


def build_equilibrium_system(spec: MassChainSpec) -> FunctionFamily:
    """Zero-total-force equations as a family in difference coordinates.

    Equation i reads sum_p k_p (y_i^p - y_{i-1}^p) with y = (difference
    circulant) x, so the family premap carries the circulant and the
    coefficient tensor lives on single difference variables.
    """
    n, depth = spec.n, spec.force_depth
    a = np.zeros((n, depth, n))
    for i in range(n):
        for p in range(depth):
            a[i, p, i] += spec.springs[p]
            a[i, p, (i - 1) % n] -= spec.springs[p]
    return FunctionFamily(Kind.SUM_OF_POWERS, a,
                          premap_w=_dense_diff(n), premap_w0=np.zeros(n))


def potential_energy(spec: MassChainSpec, x: np.ndarray) -> float:
    """Direct-summation oracle: V = sum_i sum_p k_p/(p+1) (x_{i+1}-x_i)^(p+1)."""
    y = _dense_diff(spec.n) @ np.asarray(x, dtype=np.float64)
    total = 0.0
    for p in range(1, spec.force_depth + 1):
        total += float(np.sum(spec.springs[p - 1] / (p + 1) * y ** (p + 1)))
    return total


def equilibrium_energy(x_enc: BlockEncoding, spec: MassChainSpec,
                       shots: int | None = None, seed: int = 0) -> float:
    """Potential energy via the overlap pipeline on the encoded state.

    Builds diag(Cx) from the circulant product and column extraction,
    raises it to each force power, applies it to the uniform state and
    reads the overlap with the uniform state; exact mode reproduces the
    direct sum, shot mode adds binomial interference-test noise.
    """
    n = spec.n
    if x_enc.dim != n:
        raise ValueError(f"encoding dimension {x_enc.dim} != chain size {n}")
    q = max(1, int(math.log2(n)))
    h_enc = unitary_encoding(hadamard_power(q), depth=float(q))
    first = np.zeros(n)
    first[0], first[1 % n] = -1.0, 1.0
    c_enc = circulant_encode(CirculantSpec(first))
    x_col = product(x_enc, h_enc)
    y_col = product(c_enc, x_col)
    y_diag = column_to_diag(y_col)

    uniform = np.ones(n) / math.sqrt(n)
    rng = np.random.default_rng(seed)
    total = 0.0
    powered = None
    for p in range(1, spec.force_depth + 1):
        # powered holds p copies of diag(Cx/sqrt(n)); target holds p+1
        powered = y_diag if powered is None else product(powered, y_diag)
        target = product(powered, y_diag)
        amps = target.effective @ uniform
        overlap = float(np.real(uniform @ amps))
        if abs(overlap) > 1.0 + 1e-12:
            raise AssertionError("overlap magnitude exceeded one")
        if shots is not None:
            prob = (1.0 + overlap) / 2.0
            overlap = 2.0 * rng.binomial(shots, min(max(prob, 0.0), 1.0)) / shots - 1.0
        rescale = target.alpha * n ** ((p + 3) / 2.0)
        total += spec.springs[p - 1] / (p + 1) * overlap * rescale
    return total


# ---------------------------------------------------------------------------
# dynamics on a time grid
# ---------------------------------------------------------------------------

def build_dynamics_system(spec: MassChainSpec, grid: TimeGrid, x_init,
                          v_init) -> tuple[FunctionFamily, dict]:
    """Stacked equations of motion over the whole grid as one family.

    Unknowns are x(step), ..., x(horizon). Acceleration uses the symmetric
    stencil with out-of-range taps dropped; the tap at t = -step is seeded
    second order from the initial position, velocity, and acceleration, so
    the scheme keeps its interior order at the start.
    """
    n, big_n = spec.n, grid.n_steps
    order = grid.stencil_order
    x0 = np.asarray(x_init, dtype=np.float64)
    v0 = np.asarray(v_init, dtype=np.float64)
    if x0.shape != (n,) or v0.shape != (n,):
        raise ValueError("initial data must match the chain size")
    st = fd_coefficients(order)
    diff = _dense_diff(n)
    depth = spec.force_depth

    # inner variables: difference block (n big_n) then stencil sums (n big_n)
    nvars = n * big_n
    w = np.zeros((2 * nvars, nvars))
    w0 = np.zeros(2 * nvars)

    y0 = diff @ x0
    a0 = np.array([
        sum(spec.springs[p - 1] * (y0[i] ** p - y0[(i - 1) % n] ** p)
            for p in range(1, depth + 1)) / spec.masses[i]
        for i in range(n)
    ])
    x_virtual = x0 - grid.step * v0 + 0.5 * grid.step ** 2 * a0

    for m in range(big_n):
        for i in range(n):
            row = m * n + i
            if m == 0:
                w0[row] = y0[i]
            else:
                w[row, (m - 1) * n + (i + 1) % n] += 1.0
                w[row, (m - 1) * n + i] -= 1.0
            srow = nvars + m * n + i
            for j in range(-order, order + 1):
                t = m + j
                r = st.coefficients[j + order]
                if 1 <= t <= big_n:
                    w[srow, (t - 1) * n + i] += r
                elif t == 0:
                    w0[srow] += r * x0[i]
                elif t == -1:
                    w0[srow] += r * x_virtual[i]
                # deeper out-of-range taps dropped

    a = np.zeros((nvars, depth, 2 * nvars))
    for m in range(big_n):
        for i in range(n):
            eq = m * n + i
            for p in range(depth):
                a[eq, p, m * n + i] += spec.springs[p]
                a[eq, p, m * n + (i - 1) % n] -= spec.springs[p]
            a[eq, 0, nvars + m * n + i] -= spec.masses[i] / grid.step ** 2
    family = FunctionFamily(Kind.SUM_OF_POWERS, a, premap_w=w, premap_w0=w0)
    meta = {"n": n, "n_steps": big_n, "x_virtual": x_virtual, "a0": a0}
    return family, meta


def simulate_dynamics(spec: MassChainSpec, grid: TimeGrid, x_init, v_init,
                      newton_iters: int = 12) -> np.ndarray:
    """Trajectory (n_steps+1, n) from the stacked system, classical solve."""
    family, _ = build_dynamics_system(spec, grid, x_init, v_init)
    x0 = np.asarray(x_init, dtype=np.float64)
    guess = np.tile(x0, grid.n_steps)
    iterates = classical_newton(family, guess, newton_iters)
    path = iterates[-1].reshape(grid.n_steps, spec.n)
    return np.vstack([x0[None, :], path])


# ---------------------------------------------------------------------------
# first-order form and Lyapunov estimation
# ---------------------------------------------------------------------------

def first_order_chain(spec: MassChainSpec) -> FunctionFamily:
    """Momentum reduction: z = (x, p), x' = p/m, p' = spring forces."""
    n, depth = spec.n, spec.force_depth
    diff = _dense_diff(n)
    # inner variables: (p block, difference block)
    w = np.zeros((2 * n, 2 * n))
    w[:n, n:] = np.eye(n)      # p-block
    w[n:, :n] = diff           # y-block
    a = np.zeros((2 * n, depth, 2 * n))
    for i in range(n):
        a[i, 0, i] = 1.0 / spec.masses[i]
        for p in range(depth):
            a[n + i, p, n + i] += spec.springs[p]
            a[n + i, p, n + (i - 1) % n] -= spec.springs[p]
    return FunctionFamily(Kind.SUM_OF_POWERS, a, premap_w=w,
                          premap_w0=np.zeros(2 * n))


def linear_rate_family(rates: np.ndarray) -> FunctionFamily:
    """Decoupled test system x_i' = rates_i * x_i."""
    rates = np.asarray(rates, dtype=np.float64)
    n = rates.size
    a = rates[:, None, None] * np.eye(n)[:, None, :]
    return FunctionFamily(Kind.SUM_OF_POWERS, a)


def ode_trajectory(rhs: FunctionFamily, z0, grid: TimeGrid) -> np.ndarray:
    """Trapezoidal integration of z' = F(z); one local Newton per step."""
    z = np.asarray(z0, dtype=np.float64).copy()
    nv = rhs.n_vars
    if z.shape != (nv,):
        raise ValueError(f"initial state must have dimension {nv}")
    out = np.zeros((grid.n_steps + 1, nv))
    out[0] = z
    h = grid.step
    eye = np.eye(nv)
    for m in range(grid.n_steps):
        fz = rhs.eval(z)
        znew = z + h * fz  # explicit predictor
        for _ in range(8):
            g = znew - z - 0.5 * h * (rhs.eval(znew) + fz)
            jac = eye - 0.5 * h * rhs.jacobian(znew)
            step = np.linalg.solve(jac, g)
            znew = znew - step
            if float(np.linalg.norm(step)) < 1e-14:
                break
        z = znew
        out[m + 1] = z
    return out


def stacked_ode_family(rhs: FunctionFamily, z0, grid: TimeGrid
                       ) -> FunctionFamily:
    """Trapezoidal discretization of z' = F(z) as one stacked linear-premap
    family (only for right-hand sides that are themselves depth-1 linear)."""
    if rhs.depth != 1 or rhs.has_premap:
        raise ValueError("stacked construction supports plain linear systems")
    rate = rhs.a[:, 0, :]
    n = rate.shape[0]
    big_n = grid.n_steps
    h = grid.step
    z0 = np.asarray(z0, dtype=np.float64)
    nvars = n * big_n
    w = np.eye(nvars)
    w0 = np.zeros(nvars)
    blk = 0.5 * h * rate
    for m in range(big_n):
        rows = slice(m * n, (m + 1) * n)
        w[rows, rows] = np.eye(n) - blk
        if m == 0:
            w0[rows] = -(z0 + blk @ z0)
        else:
            prev = slice((m - 1) * n, m * n)
            w[rows, prev] -= np.eye(n) + blk
    a = np.eye(nvars)[:, None, :]
    return FunctionFamily(Kind.SUM_OF_POWERS, a, premap_w=w, premap_w0=w0)


@dataclass(frozen=True)
class LyapunovReport:
    value: float
    benettin_value: float
    separations: np.ndarray
    k_used: int
    flagged: bool


def separation_norm(xa: np.ndarray, xb: np.ndarray, shots: int | None = None,
                    rng=None) -> float:
    """||xa - xb|| read from the difference encoding applied to the uniform
    state (amplitude d/(2 sqrt(n))), optionally with estimation noise."""
    xa = np.asarray(xa, dtype=np.float64)
    n = xa.size
    pad = 1 << max(0, (n - 1).bit_length())
    za, zb = np.zeros(pad), np.zeros(pad)
    za[:n], zb[:n] = xa, xb
    scale = max(1.0, float(np.max(np.abs(za))), float(np.max(np.abs(zb))))
    diff = lin_combo([bounded_diag(za / scale), bounded_diag(zb / scale)],
                     [1, -1])
    uniform = np.ones(pad) / math.sqrt(pad)
    amp = float(np.linalg.norm(diff.effective @ uniform))
    d = amp * 2.0 * scale * math.sqrt(pad)
    if shots is not None and rng is not None:
        d = max(d + rng.normal(0.0, 1.0 / shots), 0.0)
    return d


def lyapunov_estimate(rhs: FunctionFamily, x0, x0_bar, grid: TimeGrid,
                      cfg: LyapunovConfig, shots: int | None = None,
                      seed: int = 0, escape_bound: float = 1e6
                      ) -> LyapunovReport:
    """Average exponential divergence rate of two trajectories.

    Follows the separation-against-initial formula
    (1/(N_L T_L)) sum_k ln(d_k/d_0) verbatim; the consecutive-ratio
    (renormalized) estimator is reported alongside for comparison.
    Trajectories escaping the bound truncate the estimate to the intervals
    already accumulated, flagged.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x0_bar = np.asarray(x0_bar, dtype=np.float64)
    d0 = float(np.linalg.norm(x0 - x0_bar))
    if d0 <= 0:
        raise ValueError("initial conditions must differ (d0 > 0)")
    if abs(d0 - cfg.d0) > 1e-9 * max(1.0, cfg.d0):
        raise ValueError(f"declared d0 {cfg.d0} != measured {d0}")
    span = cfg.n_intervals * cfg.renorm_interval
    if abs(span - grid.horizon) > 1e-9:
        raise ValueError("N_L * T_L must equal the horizon")
    stride = cfg.renorm_interval / grid.step
    if abs(stride - round(stride)) > 1e-9:
        raise ValueError("renormalization interval must be a multiple of step")
    stride = int(round(stride))

    traj_a = ode_trajectory(rhs, x0, grid)
    traj_b = ode_trajectory(rhs, x0_bar, grid)
    rng = np.random.default_rng(seed)

    log_sum = 0.0
    seps = [d0]
    flagged = False
    k_used = 0
    for k in range(1, cfg.n_intervals + 1):
        idx = k * stride
        if (np.max(np.abs(traj_a[idx])) > escape_bound
                or np.max(np.abs(traj_b[idx])) > escape_bound):
            flagged = True
            break
        dk = separation_norm(traj_a[idx], traj_b[idx], shots, rng)
        seps.append(dk)
        log_sum += math.log(dk / d0)
        k_used = k
    denom = max(1, k_used) * cfg.renorm_interval
    value = log_sum / denom
    benettin = math.log(seps[-1] / d0) / denom if seps[-1] > 0 else value
    return LyapunovReport(value=value, benettin_value=benettin,
                          separations=np.asarray(seps), k_used=k_used,
                          flagged=flagged)
