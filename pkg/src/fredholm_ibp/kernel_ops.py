"""Kernels on the grid, their integral operators, and adjoints on step functions.

Conventions
-----------
The elementary indicator is ``1_t = 1_[0, t)``.  A step function with
breakpoints ``0 = b_0 < ... < b_m = 1`` and values ``a_1..a_m`` is the sum
``sum_k a_k (1_{b_k} - 1_{b_{k-1}})``, so it takes the value ``a_k`` on
``[b_{k-1}, b_k)`` and is 0 at ``t = 1``.  Point values never enter an
integral; the convention only fixes diagonal entries of indicator kernels
and the node samples of step functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, UnsupportedKernelError
from .grid import NODE_TOL, Grid, quadrature


@dataclass(frozen=True, eq=False)
class StepFunction:
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if b.size < 2 or v.size != b.size - 1:
            raise InvalidArgumentError(
                f"need m+1 breakpoints for m values, got {b.size} and {v.size}"
            )
        if b[0] != 0.0 or b[-1] != 1.0:
            raise InvalidArgumentError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise InvalidArgumentError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("step values must be finite")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    # constructors -----------------------------------------------------

    @classmethod
    def indicator(cls, t: float) -> "StepFunction":
        """``1_t``: value 1 on ``[0, t)``."""
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError(f"indicator time {t} outside [0, 1]")
        if t == 0.0:
            return cls.zero()
        if t == 1.0:
            return cls([0.0, 1.0], [1.0])
        return cls([0.0, t, 1.0], [1.0, 0.0])

    @classmethod
    def interval(cls, a: float, b: float, value: float = 1.0) -> "StepFunction":
        """``value * (1_b - 1_a)`` for ``0 <= a < b <= 1``."""
        a, b = float(a), float(b)
        if not 0.0 <= a < b <= 1.0:
            raise InvalidArgumentError(f"bad interval [{a}, {b})")
        bps = [0.0] + ([a] if a > 0 else []) + ([b] if b < 1 else []) + [1.0]
        vals = ([0.0] if a > 0 else []) + [value] + ([0.0] if b < 1 else [])
        return cls(bps, vals)

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls([0.0, 1.0], [0.0])

    @classmethod
    def constant(cls, c: float) -> "StepFunction":
        return cls([0.0, 1.0], [c])

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(d["breakpoints"], d["values"])

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    # evaluation -------------------------------------------------------

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        out = np.where(inside, self.values[np.clip(k, 0, self.values.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def sample(self, grid: Grid) -> np.ndarray:
        """Values at the grid nodes (right-continuous, 0 at t = 1)."""
        return self(grid.nodes)

    def integral(self) -> float:
        return float(np.dot(self.values, np.diff(self.breakpoints)))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    # grid bookkeeping -------------------------------------------------

    def node_indices(self, grid: Grid) -> np.ndarray:
        """Node index of every breakpoint; raises if any breakpoint is off-grid."""
        x = self.breakpoints * grid.n
        idx = np.rint(x).astype(int)
        if np.any(np.abs(x - idx) > NODE_TOL * grid.n):
            bad = self.breakpoints[np.abs(x - idx) > NODE_TOL * grid.n]
            raise InvalidArgumentError(
                f"breakpoints {bad.tolist()} are not nodes of the n={grid.n} grid"
            )
        return idx

    def on_grid(self, grid: Grid) -> bool:
        try:
            self.node_indices(grid)
        except InvalidArgumentError:
            return False
        return True

    def snap(self, grid: Grid) -> "StepFunction":
        """Move breakpoints to their nearest nodes (ties toward 0).

        Pieces that collapse to zero length are dropped.
        """
        idx = np.array([grid.nearest_index(b) for b in self.breakpoints])
        idx[0], idx[-1] = 0, grid.n
        keep_b = [0]
        keep_v = []
        for k in range(self.values.size):
            if idx[k + 1] > idx[k]:
                keep_v.append(self.values[k])
                keep_b.append(idx[k + 1])
        return StepFunction(grid.nodes[keep_b], keep_v)

    def pieces(self, grid: Grid):
        """Yield ``(i_lo, i_hi, a)`` node-index triples of the on-grid pieces."""
        idx = self.node_indices(grid)
        for k, a in enumerate(self.values):
            yield int(idx[k]), int(idx[k + 1]), float(a)

    def increments(self, grid: Grid) -> np.ndarray:
        """Vector ``c`` with ``int e dx = c @ x`` for any path ``x`` on the grid."""
        c = np.zeros(grid.size)
        for lo, hi, a in self.pieces(grid):
            c[hi] += a
            c[lo] -= a
        return c


def merge_steps(steps: Sequence[StepFunction], coeffs: Sequence[float]) -> StepFunction:
    """``sum_k coeffs[k] * steps[k]`` on the union of breakpoints."""
    bps = np.unique(np.concatenate([s.breakpoints for s in steps] or [np.array([0.0, 1.0])]))
    left = bps[:-1]
    vals = np.zeros(left.size)
    for c, s in zip(coeffs, steps):
        vals = vals + float(c) * s(left)
    return StepFunction(bps, vals)


@dataclass(frozen=True, eq=False)
class BVMeasure:
    """The measure ``K(du, s_j)`` for every s-node ``j``.

    Row ``j`` is one atom (``atom_loc[j]``, ``atom_weight[j]``; NaN location
    means no atom) plus a density in ``u``.  ``density[j, i]`` is the density
    on the cell ``[u_i, u_{i+1})``; the last column is unused.  Against a step
    function with node breakpoints the density part is integrated exactly.
    """

    atom_loc: np.ndarray
    atom_weight: np.ndarray
    density: np.ndarray


@dataclass(frozen=True, eq=False)
class Kernel:
    grid: Grid
    matrix: np.ndarray = field(repr=False)
    closed_form: Optional[str] = None
    bv_measure: Optional[BVMeasure] = field(default=None, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.grid.size, self.grid.size):
            raise InvalidArgumentError(
                f"kernel matrix shape {m.shape} does not match grid of {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError("kernel matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def weighted_norm(self) -> float:
        """Discrete ``||K||_{L2 x L2}`` under the product trapezoid rule."""
        w = self.grid.weights
        return float(np.sqrt(w @ (self.matrix**2) @ w))


def _same_grid(k: Kernel, g: Grid):
    if k.grid != g:
        raise InvalidArgumentError(f"grid mismatch: kernel n={k.grid.n}, other n={g.n}")


def apply_operator(k: Kernel, f) -> np.ndarray:
    """``(Tf)(t_i) = sum_j w_j K[i, j] f_j``."""
    f = k.grid.check(f)
    return k.matrix @ (k.grid.weights * f)


def adjoint_apply(k: Kernel, e: StepFunction) -> np.ndarray:
    """``T* e`` at the s-nodes: ``sum_k a_k (K(b_k, .) - K(b_{k-1}, .))``.

    Breakpoints are snapped to nodes first.  Uses kernel rows directly, no
    quadrature.
    """
    e = e.snap(k.grid)
    out = np.zeros(k.grid.size)
    for lo, hi, a in e.pieces(k.grid):
        if a != 0.0:
            out = out + a * (k.matrix[hi] - k.matrix[lo])
    return out


def dom_inner(k: Kernel, e1: StepFunction, e2: StepFunction) -> float:
    """Inner product in dom(T*): the L2 pairing of the two adjoint images."""
    return quadrature(adjoint_apply(k, e1) * adjoint_apply(k, e2), k.grid)


def _require_bv(k: Kernel) -> BVMeasure:
    if k.bv_measure is None:
        raise UnsupportedKernelError(
            f"kernel {k.closed_form or '<matrix>'} carries no bounded-variation measure"
        )
    return k.bv_measure


def bv_adjoint_apply(k: Kernel, f: StepFunction) -> np.ndarray:
    """``T* f(s) = int f(u) K(du, s)`` evaluated from the stored measure."""
    bv = _require_bv(k)
    g = k.grid
    f = f.snap(g)
    fvals = f.sample(g)
    has_atom = ~np.isnan(bv.atom_loc)
    loc = np.where(has_atom, bv.atom_loc, 0.0)
    cell = np.clip(np.searchsorted(g.nodes, loc, side="right") - 1, 0, g.n)
    atoms = np.where(has_atom, bv.atom_weight * fvals[cell], 0.0)
    dens = bv.density[:, : g.n] @ (g.cell_widths * fvals[: g.n])
    return atoms + dens


def duality_residual(k: Kernel, f: StepFunction, g) -> float:
    """``|int T*f(t) g(t) dt - int f(t) Tg(dt)|`` on the grid."""
    _require_bv(k)
    grid = k.grid
    g = grid.check(g, "g")
    f = f.snap(grid)
    lhs = quadrature(bv_adjoint_apply(k, f) * g, grid)
    tg = apply_operator(k, g)
    rhs = float(np.dot(f.sample(grid)[: grid.n], np.diff(tg)))
    return abs(lhs - rhs)
