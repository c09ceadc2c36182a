"""Scalar fractional Brownian motion on dyadic grids of [0, 1].

Sampling uses an exact Cholesky factor of the Gram matrix for grids up to
``CHOLESKY_MAX_POINTS`` points, circulant embedding of the increment
sequence above that, and plain Gaussian increments when ``H == 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "CHOLESKY_MAX_POINTS",
    "DyadicGrid",
    "ScalarPath",
    "check_hurst",
    "fbm_covariance",
    "gram_matrix",
    "sample_fbm",
    "sample_fbm_paths",
]

CHOLESKY_MAX_POINTS = 2**10
RIDGE = 1e-12


def check_hurst(H: float, rough: bool = False) -> float:
    """Validate a Hurst index; ``rough=True`` additionally demands H > 1/3."""
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {H}")
    if rough and not H > 1.0 / 3.0:
        raise ValueError(f"rough-path machinery needs H > 1/3, got {H}")
    return H


@dataclass(frozen=True)
class DyadicGrid:
    """Points ``i / 2**level`` for ``i = 0 .. 2**level``."""

    level: int

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 0:
            raise ValueError(f"grid level must be a nonnegative integer, got {self.level}")

    @property
    def n_intervals(self) -> int:
        return 2**self.level

    @property
    def mesh(self) -> float:
        return 2.0**-self.level

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) / self.n_intervals

    def __len__(self) -> int:
        return self.n_intervals + 1

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid point."""
        x = float(t) * self.n_intervals
        i = int(round(x))
        if abs(x - i) > 1e-9 or not 0 <= i <= self.n_intervals:
            raise ValueError(f"time {t} is not on the level-{self.level} dyadic grid")
        return i

    def stride_to(self, coarse: "DyadicGrid") -> int:
        """Number of fine steps per interval of a coarser grid."""
        if coarse.level > self.level:
            raise ValueError(f"level {coarse.level} is finer than level {self.level}")
        return 2 ** (self.level - coarse.level)


@dataclass(frozen=True)
class ScalarPath:
    grid: DyadicGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.grid),):
            raise ValueError("one value per grid point expected")
        if self.values[0] != 0.0:
            raise ValueError("fBm paths start at the origin")

    def increment(self, i: int, j: int) -> float:
        return float(self.values[j] - self.values[i])


def fbm_covariance(H, s, t):
    """Covariance ``E[x_s x_t] = (s^2H + t^2H - |t - s|^2H) / 2``.

    Accepts scalars or broadcastable arrays of nonnegative times.
    """
    H = check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative")
    two_h = 2.0 * H
    out = 0.5 * (s**two_h + t**two_h - np.abs(t - s) ** two_h)
    return float(out) if out.ndim == 0 else out


def gram_matrix(H: float, grid: DyadicGrid) -> np.ndarray:
    """Covariance of the path at the nonzero grid points ``t_1 .. t_N``."""
    t = grid.points[1:]
    return fbm_covariance(H, t[:, None], t[None, :])


def _cholesky(G: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        pass
    ridge = RIDGE * float(np.max(np.diag(G)))
    try:
        return np.linalg.cholesky(G + ridge * np.eye(len(G)))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"Gram matrix not positive definite even after ridge {ridge:.3e}"
        ) from exc


@lru_cache(maxsize=32)
def _cholesky_factor(H: float, level: int) -> np.ndarray:
    L = _cholesky(gram_matrix(H, DyadicGrid(level)))
    L.setflags(write=False)
    return L


@lru_cache(maxsize=32)
def _circulant_sqrt_eigs(H: float, level: int) -> np.ndarray:
    # fGn autocovariance at unit mesh; scaled by mesh^H afterwards
    n = 2**level
    k = np.arange(n + 1, dtype=float)
    two_h = 2.0 * H
    acov = 0.5 * (np.abs(k + 1) ** two_h - 2 * k**two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([acov, acov[-2:0:-1]])
    eigs = np.fft.fft(row).real
    if eigs.min() < -1e-8 * eigs.max():
        raise np.linalg.LinAlgError("circulant embedding is not nonnegative definite")
    out = np.sqrt(np.clip(eigs, 0.0, None) / len(row))
    out.setflags(write=False)
    return out


def _circulant_increments(H: float, level: int, z: np.ndarray) -> np.ndarray:
    """Exact fGn increments from ``2 * 2**level`` complex normals per path.

    ``z`` has shape (n_paths, 2, 2 * n) holding real and imaginary parts.
    """
    n = 2**level
    lam = _circulant_sqrt_eigs(H, level)
    w = np.fft.fft(lam * (z[:, 0] + 1j * z[:, 1]), axis=-1)
    return w.real[:, :n] * (2.0**-level) ** H


def sample_fbm_paths(H: float, grid: DyadicGrid, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Array of shape (n_paths, len(grid)) of independent fBm samples."""
    H = check_hurst(H)
    n = grid.n_intervals
    out = np.zeros((n_paths, n + 1))
    if H == 0.5:
        out[:, 1:] = np.cumsum(rng.standard_normal((n_paths, n)) * np.sqrt(grid.mesh), axis=1)
    elif n <= CHOLESKY_MAX_POINTS:
        L = _cholesky_factor(H, grid.level)
        out[:, 1:] = rng.standard_normal((n_paths, n)) @ L.T
    else:
        z = rng.standard_normal((n_paths, 2, 2 * n))
        out[:, 1:] = np.cumsum(_circulant_increments(H, grid.level, z), axis=1)
    return out


def sample_fbm(H: float, grid: DyadicGrid, seed) -> ScalarPath:
    """One fBm sample; ``seed`` is anything ``np.random.default_rng`` accepts."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ScalarPath(grid, sample_fbm_paths(H, grid, 1, rng)[0])
