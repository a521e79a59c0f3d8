"""Structured nonlinear function families with analytic derivatives, plus
the classical Newton and Levenberg-Marquardt reference solvers that serve
as ground-truth oracles for the simulated pipeline.

Three family kinds over x in R^n (coefficient tensor a indexed by
equation j, layer i, variable k):

  sum_of_powers            f_j = sum_i sum_k a[j,i,k] x_k^i
  power_of_sums            f_j = sum_i ( sum_k a[j,i,k] x_k )^i
  product_of_affine_powers f_j = prod_i ( sum_k a[j,i,k] x_k + b[j,i] )^i

An optional affine premap y = W x + w0 substitutes y for x, which lets
builders express equations in derived coordinates (e.g. spring
differences) while keeping the family format.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

DOMAIN_BOUND = 0.5
VALUE_BOUND = 0.5

SINGULAR_COND = 1e14


class Kind(str, enum.Enum):
    SUM_OF_POWERS = "sum_of_powers"
    POWER_OF_SUMS = "power_of_sums"
    PRODUCT_OF_AFFINE_POWERS = "product_of_affine_powers"


class SingularJacobianError(RuntimeError):
    """Newton halt: carries the iteration index and iterates so far."""

    def __init__(self, iteration: int, iterates):
        super().__init__(f"Jacobian numerically singular at iteration {iteration}")
        self.iteration = iteration
        self.iterates = iterates


@dataclass(frozen=True)
class JacobianBound:
    m_grad: float  # sup-norm bound on every equation gradient
    lam: float     # Lambda with sigma_min(J) >= 1/Lambda on the domain

    def __post_init__(self):
        if self.m_grad <= 0:
            raise ValueError("gradient bound must be positive")
        if self.lam < 1:
            raise ValueError("Lambda must be at least 1")


@dataclass(frozen=True)
class SystemState:
    """Domain point; coordinates live in [-1/2, 1/2]."""

    x: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.x, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("state must be a finite 1-d vector")
        object.__setattr__(self, "x", v)

    @property
    def in_domain(self) -> bool:
        return bool(np.max(np.abs(self.x)) <= DOMAIN_BOUND + 1e-12)


@dataclass(frozen=True)
class FunctionFamily:
    kind: Kind
    a: np.ndarray                       # (n_eq, K, n_inner)
    b: np.ndarray | None = None         # (n_eq, K), affine offsets
    premap_w: np.ndarray | None = None  # (n_inner, n_vars)
    premap_w0: np.ndarray | None = None
    shared_form: bool = True
    m_grad: float | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 3:
            raise ValueError("coefficient tensor must have shape (n_eq, K, n)")
        object.__setattr__(self, "a", a)
        if self.kind is Kind.PRODUCT_OF_AFFINE_POWERS:
            if self.b is None:
                raise ValueError("affine products require offsets b")
            b = np.asarray(self.b, dtype=np.float64)
            if b.shape != a.shape[:2]:
                raise ValueError(f"offsets shape {b.shape} != {a.shape[:2]}")
            object.__setattr__(self, "b", b)
        elif self.b is not None:
            raise ValueError("offsets are only valid for affine products")
        if (self.premap_w is None) != (self.premap_w0 is None):
            raise ValueError("premap requires both W and w0")
        if self.premap_w is not None:
            w = np.asarray(self.premap_w, dtype=np.float64)
            w0 = np.asarray(self.premap_w0, dtype=np.float64)
            if w.ndim != 2 or w.shape[0] != a.shape[2] or w0.shape != (w.shape[0],):
                raise ValueError("premap shapes inconsistent with tensor")
            object.__setattr__(self, "premap_w", w)
            object.__setattr__(self, "premap_w0", w0)

    @property
    def n_eq(self) -> int:
        return self.a.shape[0]

    @property
    def depth(self) -> int:
        """Power/layer count K."""
        return self.a.shape[1]

    @property
    def n_vars(self) -> int:
        return self.premap_w.shape[1] if self.premap_w is not None else self.a.shape[2]

    @property
    def has_premap(self) -> bool:
        return self.premap_w is not None

    def _inner(self, x: np.ndarray) -> np.ndarray:
        if self.premap_w is not None:
            return self.premap_w @ x + self.premap_w0
        return x

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars,):
            raise ValueError(f"state must have dimension {self.n_vars}")
        return x

    def eval(self, x, check_domain: bool = False) -> np.ndarray:
        """Componentwise values (f_1(x), ..., f_neq(x))."""
        x = self._check(x)
        if check_domain and np.max(np.abs(x)) > DOMAIN_BOUND + 1e-12:
            raise ValueError("state outside the [-1/2, 1/2] working domain")
        y = self._inner(x)
        k = self.depth
        powers = np.vander(y, k + 1, increasing=True).T  # powers[i] = y**i
        if self.kind is Kind.SUM_OF_POWERS:
            return np.einsum("jik,ik->j", self.a, powers[1:])
        lin = self.a @ y  # (n_eq, K) layer values
        if self.kind is Kind.POWER_OF_SUMS:
            exps = np.arange(1, k + 1)
            return np.sum(lin ** exps, axis=1)
        exps = np.arange(1, k + 1)
        return np.prod((lin + self.b) ** exps, axis=1)

    def _grad_inner(self, y: np.ndarray) -> np.ndarray:
        """Jacobian with respect to the inner variables, shape (n_eq, n_inner)."""
        k = self.depth
        i_range = np.arange(1, k + 1)
        if self.kind is Kind.SUM_OF_POWERS:
            dp = i_range[:, None] * np.vander(y, k, increasing=True).T
            return np.einsum("jik,ik->jk", self.a, dp)
        lin = self.a @ y
        if self.kind is Kind.POWER_OF_SUMS:
            w = i_range * lin ** (i_range - 1)
            return np.einsum("ji,jik->jk", w, self.a)
        u = lin + self.b  # (n_eq, K) affine factors
        jac = np.zeros((self.n_eq, y.size))
        for j in range(self.n_eq):
            pw = u[j] ** i_range
            for i in range(k):
                e = i + 1
                if u[j, i] == 0.0:
                    if e > 1:
                        continue  # factor 0^e with e>1 keeps derivative zero
                    others = np.prod(np.delete(pw, i))
                    jac[j] += others * self.a[j, i]
                else:
                    others = np.prod(np.delete(pw, i))
                    jac[j] += others * e * u[j, i] ** (e - 1) * self.a[j, i]
        return jac

    def gradient(self, x, j: int) -> np.ndarray:
        """Analytic gradient of equation j at x."""
        return self.jacobian(x)[j]

    def jacobian(self, x) -> np.ndarray:
        x = self._check(x)
        inner = self._grad_inner(self._inner(x))
        if self.premap_w is not None:
            return inner @ self.premap_w
        return inner

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind.value, "a": self.a.tolist(),
             "shared_form": self.shared_form}
        if self.b is not None:
            d["b"] = self.b.tolist()
        if self.premap_w is not None:
            d["premap"] = {"w": self.premap_w.tolist(),
                           "w0": self.premap_w0.tolist()}
        if self.m_grad is not None:
            d["m_grad"] = self.m_grad
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @staticmethod
    def from_json_dict(d: dict) -> "FunctionFamily":
        pm = d.get("premap")
        return FunctionFamily(
            kind=Kind(d["kind"]),
            a=np.asarray(d["a"], dtype=np.float64),
            b=np.asarray(d["b"], dtype=np.float64) if "b" in d else None,
            premap_w=np.asarray(pm["w"], dtype=np.float64) if pm else None,
            premap_w0=np.asarray(pm["w0"], dtype=np.float64) if pm else None,
            shared_form=bool(d.get("shared_form", True)),
            m_grad=d.get("m_grad"),
        )

    @staticmethod
    def from_json(text: str) -> "FunctionFamily":
        return FunctionFamily.from_json_dict(json.loads(text))


def linear_family(mat: np.ndarray, rhs=None) -> FunctionFamily:
    """F(x) = A x - rhs as a depth-1 affine-product family."""
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[0]
    rhs = np.zeros(n) if rhs is None else np.asarray(rhs, dtype=np.float64)
    a = mat[:, None, :]
    b = -rhs[:, None]
    return FunctionFamily(Kind.PRODUCT_OF_AFFINE_POWERS, a, b)


def gradient_bound(family: FunctionFamily, samples: np.ndarray) -> float:
    """Measured sup-norm gradient bound over sample states."""
    worst = 0.0
    for x in samples:
        worst = max(worst, float(np.max(np.abs(family.jacobian(x)))))
    return worst


def classical_newton(family: FunctionFamily, x0, iterations: int
                     ) -> list[np.ndarray]:
    """Reference iterates x_{t+1} = x_t - J(x_t)^-1 F(x_t) via dense solve."""
    x = np.asarray(x0, dtype=np.float64).copy()
    iterates = [x.copy()]
    for t in range(iterations):
        jac = family.jacobian(x)
        if np.linalg.cond(jac) > SINGULAR_COND:
            raise SingularJacobianError(t, iterates)
        x = x - np.linalg.solve(jac, family.eval(x))
        iterates.append(x.copy())
    return iterates


def classical_lm(family: FunctionFamily, x0, damping: float,
                 iterations: int) -> list[np.ndarray]:
    """Damped iterates of (J^T J + damping I) step = -J^T F, x <- x + step."""
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    x = np.asarray(x0, dtype=np.float64).copy()
    iterates = [x.copy()]
    n = family.n_vars
    for _ in range(iterations):
        jac = family.jacobian(x)
        rhs = -jac.T @ family.eval(x)
        x = x + np.linalg.solve(jac.T @ jac + damping * np.eye(n), rhs)
        iterates.append(x.copy())
    return iterates


def default_initial_state(n: int, seed: int) -> np.ndarray:
    """Uniform draw over [-0.4, 0.4]^n; keeps iterates inside the domain margin."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.4, 0.4, size=n)
