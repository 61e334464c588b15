"""CSV and JSON formats for matrices, brackets, ensembles and reports.

All writes go through a temporary file in the target directory followed by
an atomic rename, so a failed command never leaves a partial file behind.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidArgumentError
from .fredholm import BracketFunction, CovarianceMatrix
from .grid import Grid, make_grid
from .kernel_ops import Kernel
from .simulate import PathEnsemble


def atomic_write(files: dict[Path | str, str]) -> None:
    """Write several text files; each appears only once its content is complete."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _row(values: Iterable[float]) -> str:
    return ",".join(repr(float(v)) for v in values)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return obj  # json emits Infinity / NaN
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2) + "\n"


# matrices ---------------------------------------------------------------------


def matrix_csv(matrix: np.ndarray, n: int) -> str:
    lines = [f"n={n}"] + [_row(r) for r in np.asarray(matrix).tolist()]
    return "\n".join(lines) + "\n"


def read_matrix_csv(path) -> tuple[Grid, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("n="):
            raise InvalidArgumentError(f"{path}: first line must be 'n=<n>', got {header!r}")
        try:
            n = int(header[2:])
        except ValueError:
            raise InvalidArgumentError(f"{path}: bad header {header!r}") from None
        try:
            m = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as err:
            raise InvalidArgumentError(f"{path}: {err}") from None
    grid = make_grid(n)
    if m.shape != (grid.size, grid.size):
        raise InvalidArgumentError(f"{path}: expected {grid.size}x{grid.size} values, got {m.shape}")
    return grid, m


def read_kernel_csv(path) -> Kernel:
    grid, m = read_matrix_csv(path)
    return Kernel(grid, m)


def read_covariance_csv(path) -> CovarianceMatrix:
    grid, m = read_matrix_csv(path)
    return CovarianceMatrix(grid, m)


# brackets ---------------------------------------------------------------------


def bracket_csv(b: BracketFunction) -> str:
    rows = ["t,bracket"] + [_row(r) for r in zip(b.grid.nodes, b.samples)]
    return "\n".join(rows) + "\n"


def read_bracket_csv(path) -> BracketFunction:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and not lines[0][0].isdigit() and lines[0][0] not in "+-.":
        lines = lines[1:]
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines])
    except ValueError as err:
        raise InvalidArgumentError(f"{path}: {err}") from None
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise InvalidArgumentError(f"{path}: bracket CSV needs two columns (t, <M>_t)")
    grid = make_grid(data.shape[0] - 1)
    if np.max(np.abs(data[:, 0] - grid.nodes)) > 1e-9:
        raise InvalidArgumentError(f"{path}: times must be the uniform nodes i/n")
    return BracketFunction(grid, data[:, 1])


# ensembles --------------------------------------------------------------------


def ensemble_csv(ens: PathEnsemble) -> str:
    lines = [_row(ens.grid.nodes)] + [_row(r) for r in ens.paths.tolist()]
    return "\n".join(lines) + "\n"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def read_ensemble_csv(path) -> PathEnsemble:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as err:
        raise InvalidArgumentError(f"{path}: {err}") from None
    if data.shape[0] < 2:
        raise InvalidArgumentError(f"{path}: need a node row and at least one path")
    grid = make_grid(data.shape[1] - 1)
    if np.max(np.abs(data[0] - grid.nodes)) > 1e-9:
        raise InvalidArgumentError(f"{path}: first row must be the uniform nodes i/n")
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        with open(side) as fh:
            meta = json.load(fh)
    return PathEnsemble(grid, data[1:], meta.get("generator", "external"), meta.get("seed"))
