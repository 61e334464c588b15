"""Uniform grid on [0, 1] and trapezoid quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# Relative tolerance used to decide whether a real number sits on a node.
NODE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes ``t_i = i/n`` with trapezoid weights ``(d/2, d, ..., d, d/2)``."""

    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def node_index(self, t: float) -> int:
        """Index of the node equal to ``t``; raises if ``t`` is off-grid."""
        x = float(t) * self.n
        i = int(round(x))
        if not 0 <= i <= self.n or abs(x - i) > NODE_TOL * max(1, self.n):
            raise InvalidArgumentError(f"t={t!r} is not a node of the n={self.n} grid")
        return i

    def nearest_index(self, t: float) -> int:
        """Nearest node index, ties broken toward 0."""
        i = int(np.ceil(float(t) * self.n - 0.5))
        return min(max(i, 0), self.n)

    def check(self, f, name: str = "f") -> np.ndarray:
        """Return ``f`` as a float array, validating its length against the grid."""
        arr = np.asarray(f, dtype=float)
        if arr.shape[-1:] != (self.size,):
            raise InvalidArgumentError(
                f"{name} has length {arr.shape[-1] if arr.ndim else 0}, grid has {self.size} nodes"
            )
        return arr


def make_grid(n: int) -> Grid:
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidArgumentError(f"grid needs n >= 2 subintervals, got {n!r}")
    n = int(n)
    nodes = np.arange(n + 1, dtype=float) / n
    nodes[-1] = 1.0
    d = 1.0 / n
    weights = np.full(n + 1, d)
    weights[0] = weights[-1] = d / 2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(n, nodes, weights)


def quadrature(f, g: Grid) -> float | np.ndarray:
    """Trapezoid rule ``sum_i w_i f(t_i)``; a 2-D ``f`` is integrated row-wise."""
    arr = g.check(f)
    out = arr @ g.weights
    return float(out) if arr.ndim == 1 else out
