"""Counter-based variates keyed by ``(seed, stream, path, counter)``.

Every draw is a pure function of its coordinates, so a path's variates do not
depend on how many other paths are generated or in which order.  Bits come
from two rounds of the SplitMix64 finalizer; uniforms carry 53 bits and lie
strictly inside (0, 1).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgumentError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_PATH_GAMMA = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

STREAMS = {"cholesky": 1, "series": 2, "poisson": 3, "stein": 4, "aux": 5}


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _path_keys(seed: int, stream: int, rows: np.ndarray) -> np.ndarray:
    base = _mix64(np.array([int(seed) & _MASK64], dtype=np.uint64) ^ _GOLDEN)
    base = _mix64(base + np.array([int(stream)], dtype=np.uint64) * _PATH_GAMMA)
    return _mix64(base ^ (rows.astype(np.uint64) * _PATH_GAMMA + _GOLDEN))


def uniforms(seed: int, stream: int, rows, cols) -> np.ndarray:
    """Array of shape ``(len(rows), len(cols))`` of U(0, 1) variates."""
    rows = np.asarray(rows, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    keys = _path_keys(seed, stream, rows)[:, None]
    bits = _mix64(keys + _mix64((cols[None, :] + np.uint64(1)) * _GOLDEN))
    return ((bits >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def normals(seed: int, stream: int, rows, cols) -> np.ndarray:
    return ndtri(uniforms(seed, stream, rows, cols))


def exponentials(seed: int, stream: int, rows, cols) -> np.ndarray:
    return -np.log(uniforms(seed, stream, rows, cols))


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed:
        raise InvalidArgumentError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed
