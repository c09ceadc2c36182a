"""Discrete Lévy areas above the HfBm and the product area they induce.

Areas over coarse dyadic intervals are sums over a finer grid:

* ``left``:      sum_m (Z_m - Z_s) (x) (Z_{m+1} - Z_m)
* ``trapezoid``: sum_m ((Z_m + Z_{m+1}) / 2 - Z_s) (x) (Z_{m+1} - Z_m)

At H = 1/2 these are the Itô and Stratonovich areas respectively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Tensor2, dual_tensor2, sharp_2_1
from .fbm import DyadicGrid, ScalarPath
from .process import HermitianPath, ScalarPathBundle, sample_hfbm_batch

__all__ = [
    "MODES",
    "LevyArea2",
    "MCEstimate",
    "ProductLevyArea",
    "area_blocks",
    "chen_defect",
    "classical_chen_defect",
    "dual_area_apply",
    "lift_complex_area",
    "product_area_apply",
    "roughness_profile",
    "scalar_area",
    "strato_minus_ito_area",
]

MODES = ("left", "trapezoid")


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown area mode {mode!r}; expected one of {MODES}")
    return mode


def area_blocks(Z: np.ndarray, stride: int, mode: str) -> np.ndarray:
    """Areas of a vector path over consecutive blocks of ``stride`` steps.

    ``Z`` has shape (..., n_steps + 1, m); the result has shape
    (..., n_steps // stride, m, m) with entry ``[b, a, c]`` the area of
    component ``a`` against component ``c`` over block ``b``.
    """
    _check_mode(mode)
    inc = np.diff(Z, axis=-2)
    n_steps, m = inc.shape[-2:]
    if n_steps % stride:
        raise ValueError("stride must divide the number of steps")
    inc = inc.reshape(inc.shape[:-2] + (n_steps // stride, stride, m))
    offsets = np.cumsum(inc, axis=-2)
    offsets -= inc if mode == "left" else 0.5 * inc
    return np.swapaxes(offsets, -1, -2) @ inc


def scalar_area(a: ScalarPath, b: ScalarPath, s: float, t: float, mode: str = "trapezoid") -> float:
    """Area ``int_s^t (a_u - a_s) db_u`` by fine-grid sums."""
    if a.grid != b.grid:
        raise ValueError("paths must share a grid")
    i, j = a.grid.index_of(s), a.grid.index_of(t)
    if i > j:
        raise ValueError("need s <= t")
    if i == j:
        return 0.0
    Z = np.stack([a.values[i : j + 1], b.values[i : j + 1]], axis=-1)
    return float(area_blocks(Z, j - i, mode)[0, 0, 1])


@dataclass(frozen=True)
class LevyArea2:
    """Classical area of the d^2 entries over adjacent coarse intervals.

    ``blocks[b, i, j, k, l]`` is the area of ``X(i, j)`` against
    ``X(k, l)`` over the b-th interval of the coarse grid. ``values``
    holds ``X`` at the coarse points; areas over longer intervals are
    assembled from blocks through Chen's relation, which is exact.
    """

    dim: int
    level: int
    fine_level: int
    mode: str
    blocks: np.ndarray
    values: np.ndarray

    @property
    def grid(self) -> DyadicGrid:
        return DyadicGrid(self.level)

    @classmethod
    def from_path(cls, path: HermitianPath, level: int, mode: str = "trapezoid") -> "LevyArea2":
        """Direct complex sums over the entries of the sampled matrices."""
        d = path.dim
        stride = path.grid.stride_to(DyadicGrid(level))
        Z = path.values.reshape(len(path.grid), d * d)
        blocks = area_blocks(Z, stride, mode).reshape(-1, d, d, d, d)
        return cls(d, level, path.grid.level, mode, blocks, path.values[::stride].copy())

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.values[j] - self.values[i]

    def between(self, i: int, j: int) -> np.ndarray:
        """Dense area ``X2_{t_i t_j}`` for coarse indices ``i <= j``."""
        if not 0 <= i <= j <= 2**self.level:
            raise ValueError(f"coarse indices must satisfy 0 <= i <= j <= {2**self.level}")
        d = self.dim
        if i == j:
            return np.zeros((d,) * 4, dtype=complex)
        lead = self.values[i:j] - self.values[i]
        inc = self.values[i + 1 : j + 1] - self.values[i:j]
        return self.blocks[i:j].sum(axis=0) + np.einsum("bij,bkl->ijkl", lead, inc)

    def coarsen(self, level: int | None = None) -> "LevyArea2":
        """Merge neighbouring blocks via Chen's relation."""
        level = self.level - 1 if level is None else level
        if not 0 <= level <= self.level:
            raise ValueError(f"cannot coarsen level {self.level} to {level}")
        out = self
        while out.level > level:
            v = out.values
            first, second = out.blocks[0::2], out.blocks[1::2]
            cross = np.einsum("bij,bkl->bijkl", v[1:-1:2] - v[0:-2:2], v[2::2] - v[1:-1:2])
            out = LevyArea2(out.dim, out.level - 1, out.fine_level, out.mode, first + second + cross, v[::2])
        return out


def _real_coordinates(d: int) -> np.ndarray:
    """Complex matrix ``M`` with ``X(i, j) = sum_a M[(i, j), a] z_a``.

    The real coordinates ``z`` are ``x(i, j)`` at flat position
    ``i * d + j`` (j <= i) and ``x~(i, j)`` at ``j * d + i`` (j < i).
    """
    M = np.zeros((d * d, d * d), dtype=complex)
    c = 1.0 / np.sqrt(2 * d)
    for i in range(d):
        M[i * d + i, i * d + i] = 1.0 / np.sqrt(d)
        for j in range(i):
            re, im = i * d + j, j * d + i
            M[i * d + j, re], M[i * d + j, im] = c, 1j * c
            M[j * d + i, re], M[j * d + i, im] = c, -1j * c
    return M


def lift_complex_area(bundle: ScalarPathBundle, level: int, mode: str = "trapezoid") -> LevyArea2:
    """Complex area assembled from the real areas of the scalar bundle.

    ``int dX(i,j) dX(k,l)`` is the bilinear combination of the four real
    areas of the underlying ``x`` / ``x~`` paths, with the 1/sqrt(2d)
    and 1/sqrt(d) normalisations and conjugation above the diagonal.
    """
    d = bundle.dim
    grid = bundle.grid
    stride = grid.stride_to(DyadicGrid(level))
    z = np.zeros((len(grid), d * d))
    for (i, j), p in bundle.x.items():
        z[:, (i - 1) * d + (j - 1)] = p.values
    for (i, j), p in bundle.x_tilde.items():
        z[:, (j - 1) * d + (i - 1)] = p.values
    real_areas = area_blocks(z, stride, mode)
    M = _real_coordinates(d)
    blocks = np.einsum("pa,bac,qc->bpq", M, real_areas, M).reshape(-1, d, d, d, d)
    values = (z[::stride] @ M.T).reshape(-1, d, d)
    # re-impose exact Hermitian symmetry lost to rounding in the matmul
    values = 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))
    return LevyArea2(d, level, grid.level, mode, blocks, values)


def _apply_dense(X2: np.ndarray, T: Tensor2) -> np.ndarray:
    """``X[T](i, j) = sum T((i,k),(l1,l2)) X2((k,l1),(l2,j))``."""
    out = np.zeros(X2.shape[:2], dtype=complex)
    for w, U, V in T.terms:
        out += w * np.einsum("ik,ab,kabj->ij", U, V, X2)
    if T.coeffs is not None:
        out += np.einsum("ikab,kabj->ij", T.coeffs, X2)
    return out


@dataclass(frozen=True)
class ProductLevyArea:
    """Product area ``X_st[U (x) V](i, j) = sum U(i,k) V(l1,l2) X2((k,l1),(l2,j))``."""

    area: LevyArea2

    def _indices(self, s: float, t: float):
        g = self.area.grid
        i, j = g.index_of(s), g.index_of(t)
        if i > j:
            raise ValueError("need s <= t")
        return i, j

    def apply(self, s: float, t: float, T: Tensor2) -> np.ndarray:
        if T.dim != self.area.dim:
            raise ValueError("dimension mismatch")
        return _apply_dense(self.area.between(*self._indices(s, t)), T)

    def dual_apply(self, s: float, t: float, T: Tensor2) -> np.ndarray:
        """``X*_st[U (x) V] = X_st[V* (x) U*]*``."""
        return np.conj(self.apply(s, t, dual_tensor2(T))).T

    def increment(self, s: float, t: float) -> np.ndarray:
        return self.area.increment(*self._indices(s, t))


def product_area_apply(PA: ProductLevyArea, s: float, t: float, T: Tensor2) -> np.ndarray:
    return PA.apply(s, t, T)


def dual_area_apply(PA: ProductLevyArea, s: float, t: float, T: Tensor2) -> np.ndarray:
    return PA.dual_apply(s, t, T)


def chen_defect(PA: ProductLevyArea, s: float, u: float, t: float, T: Tensor2) -> np.ndarray:
    """``X_st[T] - X_su[T] - X_ut[T] - (T # dX_su) dX_ut``; zero up to rounding."""
    if not s <= u <= t:
        raise ValueError("need s <= u <= t")
    lhs = PA.apply(s, t, T) - PA.apply(s, u, T) - PA.apply(u, t, T)
    return lhs - sharp_2_1(T, PA.increment(s, u)) @ PA.increment(u, t)


def classical_chen_defect(area: LevyArea2, i: int, k: int, j: int) -> np.ndarray:
    """Coordinate Chen defect over coarse indices ``i <= k <= j``."""
    if not i <= k <= j:
        raise ValueError("need ordered indices")
    cross = np.einsum("ab,ce->abce", area.increment(i, k), area.increment(k, j))
    return area.between(i, j) - area.between(i, k) - area.between(k, j) - cross


def roughness_profile(area: LevyArea2, gaps=None, statistic: str = "max"):
    """``(gap, |X_st|_op)`` per dyadic gap, reduced over aligned intervals by ``statistic``.

    The operator norm of ``T -> X_st[T]`` is the largest singular value
    of ``X2`` read as a (d^3, d) matrix. ``"max"`` is the Hölder-type
    sup; ``"mean"`` is the typical size, free of the extreme-value
    growth the sup picks up at small gaps.
    """
    reduce = {"max": max, "mean": lambda v: float(np.mean(v))}[statistic]
    d = area.dim
    n = 2**area.level
    gaps = [2**k for k in range(area.level + 1)] if gaps is None else gaps
    out = []
    for g in gaps:
        norms = [float(np.linalg.norm(area.between(i, i + g).reshape(d**3, d), 2)) for i in range(0, n - g + 1, g)]
        out.append((g / n, reduce(norms)))
    return out


@dataclass(frozen=True)
class MCEstimate:
    """Entrywise Monte Carlo mean with standard errors of real/imaginary parts."""

    mean: np.ndarray
    se_real: np.ndarray
    se_imag: np.ndarray
    n: int

    def within(self, target, n_se: float) -> np.ndarray:
        target = np.asarray(target)
        ok_re = np.abs(self.mean.real - target.real) <= n_se * self.se_real + 1e-15
        ok_im = np.abs(self.mean.imag - target.imag) <= n_se * self.se_imag + 1e-15
        return ok_re & ok_im


def strato_minus_ito_areas(
    pairs,
    d: int,
    H: float = 0.5,
    s: float = 0.0,
    t: float = 1.0,
    fine_level: int = 12,
    n_paths: int = 10_000,
    seed: int = 0,
    chunk_size: int = 64,
) -> list:
    """Monte Carlo means of ``(X^trap - X^left)_st[U (x) V]`` at H = 1/2, one per ``(U, V)``.

    All pairs are evaluated on the same sampled paths.
    """
    if H != 0.5:
        raise ValueError("the Itô/Stratonovich area difference is defined for H = 1/2 only")
    grid = DyadicGrid(fine_level)
    i, j = grid.index_of(s), grid.index_of(t)
    if j <= i:
        raise ValueError("need s < t")
    pairs = [(np.asarray(U, dtype=complex), np.asarray(V, dtype=complex)) for U, V in pairs]
    samples = [[] for _ in pairs]
    for chunk, start in enumerate(range(0, n_paths, chunk_size)):
        B = min(chunk_size, n_paths - start)
        X = sample_hfbm_batch(d, H, fine_level, B, seed, chunk)[:, i : j + 1]
        Z = X.reshape(B, j - i + 1, d * d)
        diff = area_blocks(Z, j - i, "trapezoid") - area_blocks(Z, j - i, "left")
        diff = diff.reshape(B, d, d, d, d)
        for out, (U, V) in zip(samples, pairs):
            out.append(np.einsum("ik,ab,nkabj->nij", U, V, diff))
    estimates = []
    for out in samples:
        vals = np.concatenate(out)
        n = len(vals)
        estimates.append(
            MCEstimate(
                vals.mean(axis=0),
                vals.real.std(axis=0, ddof=1) / np.sqrt(n),
                vals.imag.std(axis=0, ddof=1) / np.sqrt(n),
                n,
            )
        )
    return estimates


def strato_minus_ito_area(U, V, d: int, **kwargs) -> MCEstimate:
    """Monte Carlo mean of ``(X^trap - X^left)_st[U (x) V]``; see ``strato_minus_ito_areas``."""
    return strato_minus_ito_areas([(U, V)], d, **kwargs)[0]
