"""Hermitian fractional Brownian motion built from independent scalar fBms."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fbm import DyadicGrid, ScalarPath, check_hurst, fbm_covariance, sample_fbm_paths

__all__ = [
    "HermitianPath",
    "ScalarPathBundle",
    "assemble_hfbm",
    "assemble_values",
    "bundle_keys",
    "hfbm_covariance",
    "load_path",
    "sample_bundle",
    "sample_hfbm",
    "sample_hfbm_batch",
    "save_path",
    "substream",
]

# kind tags for RNG substreams
REAL, IMAG = 0, 1


def bundle_keys(d: int) -> list:
    """``(i, j, kind)`` for every scalar path behind a d-dimensional HfBm.

    Real parts live on the lower triangle including the diagonal,
    imaginary parts on the strict lower triangle (1-based indices).
    """
    keys = [(i, j, REAL) for i in range(1, d + 1) for j in range(1, i + 1)]
    keys += [(i, j, IMAG) for i in range(1, d + 1) for j in range(1, i)]
    return keys


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class ScalarPathBundle:
    dim: int
    H: float
    x: dict
    x_tilde: dict
    seed: int | None = None

    def __post_init__(self):
        d = self.dim
        want_x = {(i, j) for i in range(1, d + 1) for j in range(1, i + 1)}
        want_xt = {(i, j) for i in range(1, d + 1) for j in range(1, i)}
        if set(self.x) != want_x or set(self.x_tilde) != want_xt:
            raise ValueError("bundle must hold x(i, j) for j <= i and x~(i, j) for j < i")
        grids = {p.grid for p in list(self.x.values()) + list(self.x_tilde.values())}
        if len(grids) != 1:
            raise ValueError("all bundle paths must share one grid")

    @property
    def grid(self) -> DyadicGrid:
        return next(iter(self.x.values())).grid

    def scaled(self, lam: float) -> "ScalarPathBundle":
        def scale(paths):
            return {k: ScalarPath(p.grid, lam * p.values) for k, p in paths.items()}

        return ScalarPathBundle(self.dim, self.H, scale(self.x), scale(self.x_tilde), self.seed)


def sample_bundle(d: int, H: float, grid: DyadicGrid, seed: int) -> ScalarPathBundle:
    """Sample every scalar path from its own ``(i, j, kind)`` substream."""
    H = check_hurst(H)
    x, x_tilde = {}, {}
    for i, j, kind in bundle_keys(d):
        values = sample_fbm_paths(H, grid, 1, substream(seed, i, j, kind))[0]
        (x if kind == REAL else x_tilde)[(i, j)] = ScalarPath(grid, values)
    return ScalarPathBundle(d, H, x, x_tilde, seed)


def assemble_values(real: np.ndarray, imag: np.ndarray) -> np.ndarray:
    """Hermitian matrices from per-entry real paths.

    ``real[..., i, j]`` (j <= i) and ``imag[..., i, j]`` (j < i) hold the
    scalar paths; upper-triangle inputs are ignored.
    """
    d = real.shape[-1]
    lower = np.tril(np.ones((d, d), dtype=bool), -1)
    re = np.where(lower, real, 0.0) / np.sqrt(2 * d)
    im = np.where(lower, imag, 0.0) / np.sqrt(2 * d)
    out = np.empty(real.shape, dtype=complex)
    out.real = re + np.swapaxes(re, -1, -2)
    out.imag = im - np.swapaxes(im, -1, -2)
    diag = np.arange(d)
    out.real[..., diag, diag] = real[..., diag, diag] / np.sqrt(d)
    return out


@dataclass(frozen=True)
class HermitianPath:
    """Matrices ``X_t`` on a dyadic grid, ``values`` of shape (len(grid), d, d)."""

    dim: int
    grid: DyadicGrid
    values: np.ndarray
    H: float
    seed: int | None = None

    def __post_init__(self):
        if self.values.shape != (len(self.grid), self.dim, self.dim):
            raise ValueError("values must have shape (len(grid), d, d)")
        if not np.array_equal(self.values, np.conj(np.swapaxes(self.values, -1, -2))):
            raise ValueError("matrices must be exactly Hermitian")

    def at(self, i: int) -> np.ndarray:
        return self.values[i]

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.values[j] - self.values[i]

    def restrict(self, level: int) -> "HermitianPath":
        """The same sample seen on a coarser dyadic grid."""
        coarse = DyadicGrid(level)
        step = self.grid.stride_to(coarse)
        return HermitianPath(self.dim, coarse, self.values[::step], self.H, self.seed)


def assemble_hfbm(bundle: ScalarPathBundle) -> HermitianPath:
    d = bundle.dim
    n = len(bundle.grid)
    real = np.zeros((n, d, d))
    imag = np.zeros((n, d, d))
    for (i, j), p in bundle.x.items():
        real[:, i - 1, j - 1] = p.values
    for (i, j), p in bundle.x_tilde.items():
        imag[:, i - 1, j - 1] = p.values
    return HermitianPath(d, bundle.grid, assemble_values(real, imag), bundle.H, bundle.seed)


def sample_hfbm(d: int, H: float, level: int, seed: int) -> HermitianPath:
    return assemble_hfbm(sample_bundle(d, H, DyadicGrid(level), seed))


def sample_hfbm_batch(d: int, H: float, level: int, n_paths: int, seed: int, chunk: int = 0) -> np.ndarray:
    """Array (n_paths, len(grid), d, d) of independent HfBm samples.

    Every ``(i, j, kind)`` entry draws from the substream
    ``(chunk, i, j, kind)``, so a chunk is reproducible on its own.
    """
    grid = DyadicGrid(level)
    real = np.zeros((n_paths, len(grid), d, d))
    imag = np.zeros_like(real)
    for i, j, kind in bundle_keys(d):
        paths = sample_fbm_paths(H, grid, n_paths, substream(seed, chunk, i, j, kind))
        (real if kind == REAL else imag)[:, :, i - 1, j - 1] = paths
    return assemble_values(real, imag)


def hfbm_covariance(H: float, s: float, t: float, i: int, j: int, k: int, l: int, d: int) -> float:
    """``E[X_s(i, j) X_t(k, l)] = c_H(s, t) [i = l][j = k] / d``."""
    for idx in (i, j, k, l):
        if not 1 <= idx <= d:
            raise IndexError(f"index {idx} outside 1..{d}")
    if i != l or j != k:
        return 0.0
    return fbm_covariance(H, s, t) / d


_MAGIC = b"HFBM"
_HEADER = struct.Struct("<4sIIIdq")
_NO_SEED = -1


def save_path(path: HermitianPath, file) -> None:
    """Header (magic, version, d, level, H, seed) then row-major complex64 matrices."""
    seed = _NO_SEED if path.seed is None else int(path.seed)
    header = _HEADER.pack(_MAGIC, 1, path.dim, path.grid.level, float(path.H), seed)
    Path(file).write_bytes(header + np.ascontiguousarray(path.values, dtype="<c8").tobytes())


def load_path(file) -> HermitianPath:
    raw = Path(file).read_bytes()
    magic, version, d, level, H, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{file}: not an HfBm path dump")
    grid = DyadicGrid(level)
    data = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size)
    values = data.reshape(len(grid), d, d).astype(complex)
    return HermitianPath(d, grid, values, H, None if seed == _NO_SEED else seed)
