"""Path ensembles: Gaussian Fredholm paths and a compensated-Poisson control."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng
from .errors import InvalidArgumentError
from .fredholm import CovarianceMatrix, psd_sqrt
from .grid import Grid
from .kernel_ops import Kernel, apply_operator

# Paths are produced in fixed-size blocks so the arithmetic per path does not
# depend on the worker count.
BLOCK = 4096


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    grid: Grid
    paths: np.ndarray = field(repr=False)
    generator: str = "external"
    seed: Optional[int] = None

    def __post_init__(self):
        p = np.array(self.paths, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] != self.grid.size:
            raise InvalidArgumentError(
                f"paths must be M x {self.grid.size} with M >= 1, got {p.shape}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "paths", p)

    @property
    def M(self) -> int:
        return self.paths.shape[0]

    @property
    def meta(self) -> dict:
        return {"generator": self.generator, "seed": self.seed, "M": self.M, "n": self.grid.n}


def _check_m(M: int) -> int:
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise InvalidArgumentError(f"need M >= 1 paths, got {M!r}")
    return int(M)


def _blocked(M: int, width: int, fill: Callable[[np.ndarray], np.ndarray], workers: int) -> np.ndarray:
    out = np.empty((M, width))
    starts = range(0, M, BLOCK)

    def run(start):
        rows = np.arange(start, min(start + BLOCK, M))
        out[rows] = fill(rows)

    if workers > 1 and M > BLOCK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def sample_cholesky(R: CovarianceMatrix, M: int, seed: int, workers: int = 1) -> PathEnsemble:
    """Centered Gaussian paths with covariance ``R``.

    The factor is the symmetric eigen square root rather than a Cholesky
    factor: catalog covariances are singular (``X_0 = 0``, bridge ``X_1 = 0``).
    """
    M = _check_m(M)
    seed = rng.check_seed(seed)
    root, _ = psd_sqrt(R)
    size = R.grid.size
    cols = np.arange(size)

    def fill(rows):
        return rng.normals(seed, rng.STREAMS["cholesky"], rows, cols) @ root

    return PathEnsemble(R.grid, _blocked(M, size, fill, workers), "cholesky", seed)


def cosine_basis(g: Grid, count: int) -> np.ndarray:
    """First ``count`` functions ``1, sqrt(2) cos(k pi t)`` as columns."""
    k = np.arange(count)
    basis = np.sqrt(2.0) * np.cos(np.pi * g.nodes[:, None] * k[None, :])
    basis[:, 0] = 1.0
    return basis


def sample_series(K: Kernel, N_trunc: int, M: int, seed: int, workers: int = 1) -> PathEnsemble:
    """Truncated series ``X_t = sum_k (K e_k)(t) xi_k`` over the cosine basis."""
    g = K.grid
    if isinstance(N_trunc, bool) or int(N_trunc) != N_trunc or not 1 <= N_trunc <= g.n:
        raise InvalidArgumentError(f"N_trunc must lie in [1, {g.n}], got {N_trunc!r}")
    M = _check_m(M)
    seed = rng.check_seed(seed)
    basis = cosine_basis(g, int(N_trunc))
    coef = np.column_stack([apply_operator(K, basis[:, k]) for k in range(basis.shape[1])])
    cols = np.arange(basis.shape[1])

    def fill(rows):
        return rng.normals(seed, rng.STREAMS["series"], rows, cols) @ coef.T

    return PathEnsemble(g, _blocked(M, g.size, fill, workers), "series", seed)


def sample_compensated_poisson(intensity: float, g: Grid, M: int, seed: int, workers: int = 1) -> PathEnsemble:
    """Paths of ``N_t - lambda t`` from exponential inter-arrival times."""
    lam = float(intensity)
    if not lam > 0 or not np.isfinite(lam):
        raise InvalidArgumentError(f"intensity must be positive, got {intensity!r}")
    M = _check_m(M)
    seed = rng.check_seed(seed)
    stream = rng.STREAMS["poisson"]
    first = int(lam + 10 * np.sqrt(lam) + 10)

    def fill(rows):
        width = first
        arrivals = np.cumsum(rng.exponentials(seed, stream, rows, np.arange(width)), axis=1) / lam
        # extend rows whose last arrival is still inside [0, 1)
        while np.any(arrivals[:, -1] < 1.0):
            more = rng.exponentials(seed, stream, rows, np.arange(width, 2 * width)) / lam
            arrivals = np.hstack([arrivals, arrivals[:, -1:] + np.cumsum(more, axis=1)])
            width *= 2
        # arrival a counts at node i iff a < t_i, i.e. i >= #(nodes <= a)
        first_node = np.searchsorted(g.nodes, arrivals, side="right")
        nb = g.size + 1
        flat = (np.arange(rows.size)[:, None] * nb + first_node).ravel()
        hist = np.bincount(flat, minlength=rows.size * nb).reshape(rows.size, nb)
        counts = np.cumsum(hist, axis=1)[:, : g.size]
        return counts - lam * g.nodes[None, :]

    return PathEnsemble(g, _blocked(M, g.size, fill, workers), "poisson", seed)
