"""Covariances, Fredholm square roots and the closed-form kernel catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, NotPositiveSemidefiniteError
from .grid import Grid, quadrature
from .kernel_ops import BVMeasure, Kernel, StepFunction, dom_inner

PSD_TOL = 1e-10
CATALOG = ("bm", "bridge_orthogonal", "bridge_canonical", "martingale")
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    grid: Grid
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.array(self.matrix, dtype=float)
        if r.shape != (self.grid.size, self.grid.size):
            raise InvalidArgumentError(
                f"covariance shape {r.shape} does not match grid of {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(r)):
            raise InvalidArgumentError("covariance has non-finite entries")
        scale = np.max(np.abs(r)) if r.size else 0.0
        if np.max(np.abs(r - r.T)) > 8 * _EPS * scale:
            raise InvalidArgumentError("covariance matrix is not symmetric")
        r.setflags(write=False)
        object.__setattr__(self, "matrix", r)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True, eq=False)
class BracketFunction:
    """Bracket ``<M>_t`` of a Gaussian martingale sampled at the grid nodes."""

    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = self.grid.check(self.samples, "bracket").copy()
        if a[0] != 0.0:
            raise InvalidArgumentError("bracket must vanish at t = 0")
        if np.any(np.diff(a) < 0):
            raise InvalidArgumentError("bracket must be nondecreasing")
        if a[-1] > 1.0:
            raise InvalidArgumentError(
                f"bracket reaches {a[-1]} > 1 at t = 1; rescale time so that <M>_1 <= 1"
            )
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "BracketFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def inverse(self, s) -> np.ndarray:
        """Right-continuous inverse ``sup{u : <M>_u <= s}``, linear between nodes.

        On a flat stretch at level ``s`` this returns the right end of the flat;
        this is the choice under which ``u < inverse(s)`` matches ``s < <M>_u``
        for the half-open indicator convention.
        """
        a = self.samples
        nodes = self.grid.nodes
        s = np.atleast_1d(np.asarray(s, dtype=float))
        i = np.searchsorted(a, s, side="right") - 1
        out = np.ones_like(s)
        mid = (i >= 0) & (i < self.grid.n)
        ii = i[mid]
        frac = (s[mid] - a[ii]) / (a[ii + 1] - a[ii])
        loc = nodes[ii] + frac * (nodes[ii + 1] - nodes[ii])
        # keep the location inside its cell despite rounding
        out[mid] = np.minimum(loc, np.nextafter(nodes[ii + 1], 0.0))
        out[i < 0] = 0.0
        return out


def trace_check(R: CovarianceMatrix) -> float:
    """Trapezoid value of ``int_0^1 R(t, t) dt``."""
    return quadrature(np.diag(R.matrix), R.grid)


def _weighted_gram(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (a * w) @ b.T


def covariance_from_kernel(K: Kernel) -> CovarianceMatrix:
    """``R[i, j] = sum_m w_m K[i, m] K[j, m]``."""
    r = _weighted_gram(K.matrix, K.matrix, K.grid.weights)
    r = 0.5 * (r + r.T)
    # diagonal through the same quadrature call as dom_inner, so that
    # wiener_variance(K, 1_t) reproduces R[t, t] bit for bit
    np.fill_diagonal(r, [quadrature(row * row, K.grid) for row in K.matrix])
    return CovarianceMatrix(K.grid, r)


def psd_sqrt(R: CovarianceMatrix) -> tuple[np.ndarray, float]:
    """Symmetric PSD square root of the plain matrix and its smallest eigenvalue.

    Eigenvalues down to ``-PSD_TOL * lambda_max`` are clipped to 0.
    """
    lam, q = np.linalg.eigh(R.matrix)
    lam_min = float(lam[0])
    lam_max = float(max(lam[-1], 0.0))
    if lam_min < -PSD_TOL * lam_max or (lam_max == 0.0 and lam_min < 0.0):
        raise NotPositiveSemidefiniteError(
            f"smallest eigenvalue {lam_min:.3e} below -{PSD_TOL:g} * {lam_max:.3e}"
        )
    root = (q * np.sqrt(np.clip(lam, 0.0, None))) @ q.T
    return 0.5 * (root + root.T), lam_min


def factorize(R: CovarianceMatrix) -> Kernel:
    """Fredholm kernel of ``R``: the symmetric square root, un-weighted.

    With ``S = sqrt(R)`` the kernel matrix is ``S diag(w)^(-1/2)`` so that
    :func:`covariance_from_kernel` returns ``S S = R``.
    """
    root, _ = psd_sqrt(R)
    return Kernel(R.grid, root / np.sqrt(R.grid.weights)[None, :], closed_form=None)


def _bm_matrix(g: Grid) -> np.ndarray:
    # K[i, j] = 1 iff s_j < t_i
    idx = np.arange(g.size)
    return (idx[None, :] < idx[:, None]).astype(float)


def catalog_kernel(name: str, g: Grid, bracket: Optional[BracketFunction] = None) -> Kernel:
    """Closed-form Fredholm kernels with their measures ``K(du, s)``."""
    if name not in CATALOG:
        raise InvalidArgumentError(f"unknown catalog kernel {name!r}; choose from {CATALOG}")
    if (name == "martingale") != (bracket is not None):
        raise InvalidArgumentError("a bracket is required for, and only for, the martingale kernel")
    if bracket is not None and bracket.grid != g:
        raise InvalidArgumentError("bracket grid does not match")

    t = g.nodes
    size = g.size
    ind = _bm_matrix(g)
    atom_loc = t.copy()
    atom_weight = np.ones(size)
    density = np.zeros((size, size))

    if name == "bm":
        matrix = ind
    elif name == "bridge_orthogonal":
        matrix = ind - t[:, None]
        density[:] = -1.0
    elif name == "bridge_canonical":
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (1.0 - t[:, None]) / (1.0 - t[None, :])
        matrix = np.where(ind > 0, ratio, 0.0)
        # K(du, s) = delta_s(du) - 1{u > s} du / (1 - s); the s = 1 column is 0
        cells = t[None, :] >= t[:, None]
        with np.errstate(divide="ignore"):
            scale = np.where(t < 1.0, 1.0 / (1.0 - t), 0.0)
        density = -(cells * scale[:, None])
    else:
        a = bracket.samples
        matrix = (t[None, :] < a[:, None]).astype(float)
        atom_loc = bracket.inverse(t)

    for arr in (matrix, atom_loc, atom_weight, density):
        arr.setflags(write=False)
    return Kernel(g, matrix, closed_form=name, bv_measure=BVMeasure(atom_loc, atom_weight, density))


def catalog_covariance(name: str, g: Grid, bracket: Optional[BracketFunction] = None) -> CovarianceMatrix:
    """Analytic covariance of the catalog processes sampled at the nodes."""
    t = g.nodes
    lo = np.minimum(t[:, None], t[None, :])
    if name == "bm":
        r = lo
    elif name in ("bridge", "bridge_orthogonal", "bridge_canonical"):
        r = lo - t[:, None] * t[None, :]
    elif name == "martingale":
        if bracket is None:
            raise InvalidArgumentError("martingale covariance needs a bracket")
        idx = np.arange(g.size)
        r = bracket.samples[np.minimum(idx[:, None], idx[None, :])]
    else:
        raise InvalidArgumentError(f"unknown catalog covariance {name!r}")
    return CovarianceMatrix(g, r)


def wiener_variance(K: Kernel, e: StepFunction) -> float:
    """Variance of ``int e dX`` for the Fredholm process with kernel ``K``."""
    return dom_inner(K, e, e)
