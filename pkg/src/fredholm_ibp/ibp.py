"""Monte-Carlo estimates of both sides of the integration-by-parts identities.

For a Fredholm kernel ``K`` and a smooth functional ``f`` the strong identity
at time ``t`` reads::

    E[X_t D_t f(X)] = E[ int K(t, s) K*[D^2_{t,.} f(X)](s) ds ]

and the weak identity integrates both sides over ``t``.  With
``D^2 = sum c_kl e_k(t) e_l(s)`` the right side per path is
``sum_kl c_kl e_k(t) h_l(t)`` where ``h_l(t) = int K(t, s) (K* e_l)(s) ds``
does not depend on the path, so everything reduces to a few matrix products.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .expr import Const, Cos, Sin, Var, mul, power
from .fredholm import BracketFunction, wiener_variance
from .functionals import (
    SmoothFunctional,
    gradient,
    hessian,
    increment_matrix,
    integrand_matrix,
    zscore,
)
from .grid import Grid
from .kernel_ops import Kernel, StepFunction, adjoint_apply
from .simulate import PathEnsemble

FORMS = ("strong_at_t", "weak", "bm", "martingale", "bridge_orthogonal", "bridge_canonical")
COROLLARY_FORMS = ("bm", "martingale", "bridge_orthogonal", "bridge_canonical")


@dataclass(frozen=True)
class IbpReport:
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    residual: float
    zscore: float
    M: int
    form: str
    t: Optional[float] = None
    functional_id: str = ""

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.lhs_stderr, self.rhs_stderr)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestVerdict:
    reports: List[IbpReport]
    alpha: float
    max_abs_zscore: float
    reject: bool

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "reports": [r.to_dict() for r in self.reports],
            "alpha": self.alpha,
            "max_abs_zscore": self.max_abs_zscore,
            "reject": self.reject,
        }


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    m = v.shape[0]
    se = float(v.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return float(v.mean()), se


def _report(lhs_v, rhs_v, form, f: SmoothFunctional, t=None) -> IbpReport:
    lhs, lse = _mean_se(lhs_v)
    rhs, rse = _mean_se(rhs_v)
    res = lhs - rhs
    return IbpReport(lhs, rhs, lse, rse, res, zscore(res, math.hypot(lse, rse)),
                     int(lhs_v.shape[0]), form, t, f.label)


class _Setup:
    """Per-(ensemble, functional) quantities shared by every form."""

    def __init__(self, grid: Grid, ens: PathEnsemble, f: SmoothFunctional):
        if ens.grid != grid:
            raise InvalidArgumentError(f"ensemble grid n={ens.grid.n} does not match kernel n={grid.n}")
        self.grid = grid
        self.X = ens.paths
        self.E = integrand_matrix(f, grid)
        Z = self.X @ increment_matrix(f, grid)
        self.grad = gradient(f, Z)
        self.hess = hessian(f, Z)

    def weak_lhs(self) -> np.ndarray:
        P = self.X @ (self.grid.weights[:, None] * self.E)
        return np.einsum("mk,mk->m", self.grad, P)

    def weak_rhs(self, inner: np.ndarray) -> np.ndarray:
        """Right side per path given ``inner[i, l]``, the s-integral for ``e_l`` at ``t_i``."""
        G = self.E.T @ (self.grid.weights[:, None] * inner)
        return np.einsum("mkl,kl->m", self.hess, G)


def _generic_inner(K: Kernel, f: SmoothFunctional) -> np.ndarray:
    """``h_l(t_i) = sum_j w_j K[i, j] (K* e_l)(s_j)``."""
    kstar = np.column_stack([adjoint_apply(K, e) for e in f.integrands])
    return K.matrix @ (K.grid.weights[:, None] * kstar)


def ibp_strong(K: Kernel, ens: PathEnsemble, f: SmoothFunctional, t: float) -> IbpReport:
    i = K.grid.node_index(t)
    s = _Setup(K.grid, ens, f)
    inner = _generic_inner(K, f)
    lhs_v = s.X[:, i] * (s.grad @ s.E[i])
    rhs_v = np.einsum("mkl,k,l->m", s.hess, s.E[i], inner[i])
    return _report(lhs_v, rhs_v, "strong_at_t", f, float(K.grid.nodes[i]))


def ibp_weak(K: Kernel, ens: PathEnsemble, f: SmoothFunctional) -> IbpReport:
    s = _Setup(K.grid, ens, f)
    return _report(s.weak_lhs(), s.weak_rhs(_generic_inner(K, f)), "weak", f)


def _stieltjes_inner(E: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """``inner[i, l] = int_[0, t_i) e_l dA`` for step ``e_l`` and cell increments of ``A``."""
    cells = E[:-1] * increments[:, None]
    return np.vstack([np.zeros((1, E.shape[1])), np.cumsum(cells, axis=0)])


def _bridge_orthogonal_inner(grid: Grid, E: np.ndarray) -> np.ndarray:
    # int_0^1 (1_t(s) - t) (e(s) - int e) ds, exact for step e
    t, cw = grid.nodes, grid.cell_widths
    centered = E[:-1] - (cw @ E[:-1])[None, :]
    j = np.arange(grid.n)
    weights = cw[None, :] * ((j[None, :] < np.arange(grid.size)[:, None]) - t[:, None])
    return weights @ centered


def _bridge_canonical_inner(grid: Grid, E: np.ndarray) -> np.ndarray:
    # int_0^t (1-t)/(1-s)^2 [(1-s) e(s) - int_s^1 e(u) du] ds, integrated cell by cell
    # in closed form; on [s_j, s_{j+1}) the bracket equals e_j (1 - s_{j+1}) - tail_{j+1}.
    t, cw, n = grid.nodes, grid.cell_widths, grid.n
    cells = E[:-1] * cw[:, None]
    tail = np.vstack([np.cumsum(cells[::-1], axis=0)[::-1], np.zeros((1, E.shape[1]))])
    j = np.arange(n - 1)
    bracket = E[j] * (1.0 - t[j + 1])[:, None] - tail[j + 1]
    dinv = 1.0 / (1.0 - t[j + 1]) - 1.0 / (1.0 - t[j])
    cum = np.vstack([np.zeros((1, E.shape[1])), np.cumsum(bracket * dinv[:, None], axis=0)])
    inner = np.zeros_like(E)
    inner[:n] = (1.0 - t[:n])[:, None] * cum
    return inner


def ibp_corollary(
    form: str,
    ens: PathEnsemble,
    f: SmoothFunctional,
    bracket: Optional[BracketFunction] = None,
) -> IbpReport:
    """Weak identity with the right side written out for a specific process."""
    if form not in COROLLARY_FORMS:
        raise InvalidArgumentError(f"unknown corollary form {form!r}; choose from {COROLLARY_FORMS}")
    if (form == "martingale") != (bracket is not None):
        raise InvalidArgumentError("a bracket is required for, and only for, the martingale form")
    grid = ens.grid
    s = _Setup(grid, ens, f)
    if form == "bm":
        inner = _stieltjes_inner(s.E, grid.cell_widths)
    elif form == "martingale":
        if bracket.grid != grid:
            raise InvalidArgumentError("bracket grid does not match the ensemble")
        inner = _stieltjes_inner(s.E, np.diff(bracket.samples))
    elif form == "bridge_orthogonal":
        inner = _bridge_orthogonal_inner(grid, s.E)
    else:
        inner = _bridge_canonical_inner(grid, s.E)
    return _report(s.weak_lhs(), s.weak_rhs(inner), form, f)


def char_function_check(K: Kernel, ens: PathEnsemble, e: StepFunction, thetas: Sequence[float]):
    """Empirical characteristic function of ``int e dX`` against ``exp(-c theta^2 / 2)``."""
    thetas = list(thetas)
    if not thetas:
        raise InvalidArgumentError("need at least one theta")
    if ens.grid != K.grid:
        raise InvalidArgumentError("ensemble and kernel grids differ")
    z = ens.paths @ e.increments(K.grid)
    c = wiener_variance(K, e)
    out = []
    for th in thetas:
        emp = complex(np.mean(np.exp(1j * float(th) * z)))
        out.append((float(th), emp, math.exp(-0.5 * c * float(th) ** 2)))
    return out


def default_family() -> List[SmoothFunctional]:
    """Quadratics pin the covariance, cubics probe third moments, trig pairs the law of an increment."""
    fam = []
    half_sq = mul(Const(0.5), power(Var(1), 2))
    third_cube = mul(Const(1.0 / 3.0), power(Var(1), 3))
    for u in (0.25, 0.5, 0.75, 1.0):
        fam.append(SmoothFunctional(half_sq, (StepFunction.indicator(u),), f"half_square(u={u})"))
    for u in (0.5, 1.0):
        fam.append(SmoothFunctional(third_cube, (StepFunction.indicator(u),), f"third_cube(u={u})"))
    incr = StepFunction.interval(0.5, 1.0)
    for theta in (1.0, 3.0):
        arg = mul(Const(theta), Var(1))
        fam.append(SmoothFunctional(Cos(arg), (incr,), f"cos(theta={theta:g})"))
        fam.append(SmoothFunctional(Sin(arg), (incr,), f"sin(theta={theta:g})"))
    return fam


def bonferroni_threshold(alpha: float, m: int) -> float:
    return NormalDist().inv_cdf(1.0 - alpha / (2.0 * m))


def gaussianity_test(
    K: Kernel,
    ens: PathEnsemble,
    family: Optional[Sequence[SmoothFunctional]] = None,
    alpha: float = 0.01,
) -> TestVerdict:
    """Reject when any weak-identity z-score exceeds the Bonferroni threshold."""
    family = default_family() if family is None else list(family)
    if not family:
        raise InvalidArgumentError("the test family is empty")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    reports = [ibp_weak(K, ens, f) for f in family]
    zs = np.array([abs(r.zscore) for r in reports])
    max_abs = float(np.max(np.where(np.isnan(zs), np.inf, zs)))
    return TestVerdict(reports, float(alpha), max_abs, bool(max_abs > bonferroni_threshold(alpha, len(family))))
