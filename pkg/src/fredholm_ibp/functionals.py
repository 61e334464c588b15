"""Smooth cylindrical functionals and their pathwise Malliavin derivatives.

A smooth functional is ``f(x) = g(z_1, ..., z_n)`` with ``z_k = int e_k dx``
for step functions ``e_k``.  Its derivative in ``t`` is the step function
``sum_k (d_k g)(z) e_k(t)``; the second derivative is the tensor
``sum_{k,l} (d_k d_l g)(z) e_k(t) e_l(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import InvalidArgumentError
from .grid import Grid, make_grid
from .kernel_ops import StepFunction, merge_steps

FD_STEPS = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True, eq=False)
class SmoothFunctional:
    g: ex.Expr
    integrands: Tuple[StepFunction, ...]
    id: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        ints = tuple(self.integrands)
        if not ints:
            raise InvalidArgumentError("a smooth functional needs at least one integrand")
        if not all(isinstance(e, StepFunction) for e in ints):
            raise InvalidArgumentError("integrands must be StepFunction instances")
        used = self.g.variables()
        if used and max(used) > len(ints):
            raise InvalidArgumentError(
                f"g uses z{max(used)} but only {len(ints)} integrands were given"
            )
        object.__setattr__(self, "integrands", ints)

    @property
    def n(self) -> int:
        return len(self.integrands)

    @property
    def label(self) -> str:
        return self.id or self.g.to_prefix()

    @cached_property
    def grad_exprs(self) -> Tuple[ex.Expr, ...]:
        return tuple(self.g.diff(k + 1) for k in range(self.n))

    @cached_property
    def hess_exprs(self) -> dict:
        """Upper-triangle second partials ``{(k, l): expr}`` with ``k <= l``."""
        return {
            (k, l): self.grad_exprs[k].diff(l + 1)
            for k in range(self.n)
            for l in range(k, self.n)
        }

    def scaled(self, c: float) -> "SmoothFunctional":
        return SmoothFunctional(ex.mul(ex.Const(float(c)), self.g), self.integrands)

    def to_dict(self) -> dict:
        d = {"g": self.g.to_prefix(), "integrands": [e.to_dict() for e in self.integrands]}
        if self.id is not None:
            d["id"] = self.id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothFunctional":
        try:
            g = ex.parse(d["g"])
            ints = tuple(StepFunction.from_dict(e) for e in d["integrands"])
        except (KeyError, TypeError) as err:
            raise InvalidArgumentError(f"malformed functional: {err}") from None
        return cls(g, ints, d.get("id"))


@dataclass(frozen=True, eq=False)
class SecondDerivative:
    """``D^2_{t,s} f(x) = sum c_kl e_k(t) e_l(s)``."""

    coefficients: np.ndarray
    integrands: Tuple[StepFunction, ...]

    def __call__(self, t, s):
        et = np.array([e(t) for e in self.integrands])
        es = np.array([e(s) for e in self.integrands])
        return np.einsum("k...,kl,l...->...", et, self.coefficients, es)


def _grid_of(x) -> Grid:
    x = np.asarray(x, dtype=float)
    return make_grid(x.shape[-1] - 1)


def increment_matrix(f: SmoothFunctional, grid: Grid) -> np.ndarray:
    """``(n+1, n_int)`` matrix ``A`` with ``Z = paths @ A``."""
    return np.column_stack([e.increments(grid) for e in f.integrands])


def integrand_matrix(f: SmoothFunctional, grid: Grid) -> np.ndarray:
    """Node samples ``E[i, k] = e_k(t_i)``."""
    return np.column_stack([e.sample(grid) for e in f.integrands])


def gradient(f: SmoothFunctional, Z: np.ndarray) -> np.ndarray:
    """Partials ``d_k g`` at each row of ``Z``; shape ``Z.shape``."""
    Z = np.asarray(Z, dtype=float)
    return np.stack([d.evaluate(Z) for d in f.grad_exprs], axis=-1)


def hessian(f: SmoothFunctional, Z: np.ndarray) -> np.ndarray:
    """Second partials, exactly symmetric; shape ``Z.shape + (n,)``."""
    Z = np.asarray(Z, dtype=float)
    out = np.empty(Z.shape + (f.n,))
    for (k, l), d in f.hess_exprs.items():
        v = d.evaluate(Z)
        out[..., k, l] = v
        out[..., l, k] = v
    return out


def pathwise_integral(e: StepFunction, x, grid: Optional[Grid] = None) -> float:
    """``int e dx = sum_k a_k (x(b_k) - x(b_{k-1}))``; breakpoints must be nodes."""
    x = np.asarray(x, dtype=float)
    grid = grid or _grid_of(x)
    grid.check(x, "path")
    total = 0.0
    for lo, hi, a in e.pieces(grid):
        total += a * (x[hi] - x[lo])
    return float(total)


def _z(f: SmoothFunctional, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grid = _grid_of(x)
    return np.array([pathwise_integral(e, x, grid) for e in f.integrands])


def evaluate(f: SmoothFunctional, x) -> float:
    """``f(x) = g(z_1(x), ..., z_n(x))``."""
    return f.g.evaluate(_z(f, x))


def malliavin_d1(f: SmoothFunctional, x) -> StepFunction:
    coeffs = gradient(f, _z(f, x))
    return merge_steps(f.integrands, coeffs)


def malliavin_d2(f: SmoothFunctional, x) -> SecondDerivative:
    return SecondDerivative(hessian(f, _z(f, x)), f.integrands)


def t_section(f: SmoothFunctional, t: float) -> SmoothFunctional:
    """The functional ``x -> D_t f(x)`` for fixed ``t``."""
    et = [e(t) for e in f.integrands]
    g_t = ex.add(*(ex.mul(ex.Const(float(c)), d) for c, d in zip(et, f.grad_exprs)))
    return SmoothFunctional(g_t, f.integrands)


def primitive(y, grid: Grid) -> np.ndarray:
    """Cumulative trapezoid integral ``int_0^{t_i} y``; exact for piecewise-linear ``y``."""
    y = grid.check(y, "y")
    return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * grid.cell_widths)])


def derivative_pairing(f: SmoothFunctional, x, y) -> float:
    """``<D f(x), y>``: each piece of ``D f`` integrated against ``y`` by trapezoid."""
    grid = _grid_of(x)
    iy = primitive(y, grid)
    return float(sum(a * (iy[hi] - iy[lo]) for lo, hi, a in malliavin_d1(f, x).pieces(grid)))


def gateaux_fd(f: SmoothFunctional, x, y) -> float:
    """Directional derivative of ``f`` at ``x`` along ``I y = int_0^. y``.

    Central differences at three step sizes, combined by two Richardson steps.
    """
    x = np.asarray(x, dtype=float)
    direction = primitive(y, _grid_of(x))

    def central(eps):
        return (evaluate(f, x + eps * direction) - evaluate(f, x - eps * direction)) / (2 * eps)

    d1, d2, d3 = (central(h) for h in FD_STEPS)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d3 - d2) / 3
    return (16 * r2 - r1) / 15


def hermite(q: int, v):
    """Probabilists' Hermite polynomial ``H_q(v)`` via the three-term recurrence."""
    if isinstance(q, bool) or int(q) != q or q < 0:
        raise InvalidArgumentError(f"Hermite degree must be a nonnegative integer, got {q!r}")
    v = np.asarray(v, dtype=float)
    prev, cur = np.zeros_like(v), np.ones_like(v)
    for k in range(int(q)):
        prev, cur = cur, v * cur - k * prev
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class SteinResult:
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    residual: float
    zscore: float
    M: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def zscore(residual: float, stderr: float) -> float:
    if stderr > 0:
        return residual / stderr
    return 0.0 if residual == 0 else math.copysign(math.inf, residual)


def stein_residual_1d(samples: Sequence[float], f: ex.Expr) -> SteinResult:
    """Monte-Carlo estimates of ``E f'(X)`` and ``E X f(X)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InvalidArgumentError("need at least 2 samples")
    if f.variables() - {1}:
        raise InvalidArgumentError("the test function must use only z1")
    zcol = x[:, None]
    lhs_v = f.diff(1).evaluate(zcol)
    rhs_v = x * f.evaluate(zcol)
    root_m = math.sqrt(x.size)
    lhs, rhs = float(lhs_v.mean()), float(rhs_v.mean())
    lse = float(lhs_v.std(ddof=1) / root_m)
    rse = float(rhs_v.std(ddof=1) / root_m)
    return SteinResult(lhs, rhs, lse, rse, lhs - rhs, zscore(lhs - rhs, math.hypot(lse, rse)), int(x.size))
