"""Controlled biprocesses and their integrals against the HfBm.

Integrands are grid-indexed sums of simple tensors. Each term of ``U`` is
``(w, A, B)`` with ``A``, ``B`` arrays of shape (n_points, d, d); terms of
the two derivative parts carry three such arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import NCPolynomial, Tensor2, Tensor3, frobenius, sharp_1_3, sharp_3_1
from .fbm import DyadicGrid, check_hurst
from .levy import LevyArea2
from .process import HermitianPath

__all__ = [
    "ControlledBiprocess",
    "ConvergenceError",
    "RoughDriver",
    "RoughIntegral",
    "componentwise_integral",
    "corrected_riemann_sum",
    "ito_integral",
    "ito_strato_check",
    "polynomial_biprocess",
    "remainder",
    "rough_integrate",
    "strato_correction",
    "strato_integral",
    "wong_zakai_integral",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message, deltas):
        super().__init__(f"{message}; deltas={list(deltas)}")
        self.deltas = list(deltas)


@dataclass(frozen=True)
class ControlledBiprocess:
    dim: int
    grid: DyadicGrid
    U: list
    deriv1: list = field(default_factory=list)
    deriv2: list = field(default_factory=list)

    def at(self, i: int):
        """``(U_t, U^{X,1}_t, U^{X,2}_t)`` at grid index ``i``."""
        d = self.dim
        U = Tensor2(d, [(w, A[i], B[i]) for w, A, B in self.U])
        T1 = Tensor3(d, [(w, A[i], B[i], C[i]) for w, A, B, C in self.deriv1])
        T2 = Tensor3(d, [(w, A[i], B[i], C[i]) for w, A, B, C in self.deriv2])
        return U, T1, T2

    def sample(self, idx) -> "ControlledBiprocess":
        """Restriction to the grid indices ``idx``."""

        def pick(terms):
            return [(w, *(M[idx] for M in mats)) for w, *mats in terms]

        return ControlledBiprocess(self.dim, self.grid, pick(self.U), pick(self.deriv1), pick(self.deriv2))


def _derivative_factors(P: NCPolynomial, powers: list) -> list:
    """``[(a_m, X^i, X^(m-1-i))]`` for the noncommutative derivative of ``P``."""
    out = []
    for m, a in enumerate(P.coefficients):
        if m and a != 0:
            out.extend((a, powers[i], powers[m - 1 - i]) for i in range(m))
    return out


def polynomial_biprocess(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath) -> ControlledBiprocess:
    """``U = P(X) (x) Q(X)``, ``U1 = dP(X) (x) Q(X)``, ``U2 = P(X) (x) dQ(X)``."""
    deg = max(P.degree, Q.degree, 0)
    powers = NCPolynomial.monomial(deg).powers(X.values)
    PX, QX = P(X.values, powers), Q(X.values, powers)
    U = [] if P.is_zero() or Q.is_zero() else [(1.0, PX, QX)]
    d1 = [] if Q.is_zero() else [(a, A, B, QX) for a, A, B in _derivative_factors(P, powers)]
    d2 = [] if P.is_zero() else [(b, PX, A, B) for b, A, B in _derivative_factors(Q, powers)]
    return ControlledBiprocess(X.dim, X.grid, U, d1, d2)


def remainder(W: ControlledBiprocess, X: HermitianPath, i: int, j: int) -> np.ndarray:
    """Dense ``U_flat_st = dU_st - dX_st # U1_s - U2_s # dX_st``."""
    Ui, T1, T2 = W.at(i)
    Uj, _, _ = W.at(j)
    dX = X.increment(i, j)
    return Uj.dense() - Ui.dense() - sharp_1_3(dX, T1).dense() - sharp_3_1(T2, dX).dense()


@dataclass
class RoughDriver:
    """The HfBm sample together with Lévy areas of one mode, cached per level."""

    path: HermitianPath
    mode: str = "trapezoid"
    _areas: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        check_hurst(self.path.H, rough=True)

    @property
    def fine_level(self) -> int:
        return self.path.grid.level

    def area(self, level: int) -> LevyArea2:
        if level not in self._areas:
            finer = [k for k in self._areas if k > level]
            if finer:
                self._areas[level] = self._areas[min(finer)].coarsen(level)
            else:
                self._areas[level] = LevyArea2.from_path(self.path, level, self.mode)
        return self._areas[level]


def _partition(W: ControlledBiprocess, D: RoughDriver, level: int, s: float, t: float):
    if W.dim != D.path.dim or W.grid != D.path.grid:
        raise ValueError("integrand and driver must share dimension and grid")
    if level > D.fine_level:
        raise ValueError(f"partition level {level} finer than the driver grid ({D.fine_level})")
    coarse = DyadicGrid(level)
    i0, i1 = coarse.index_of(s), coarse.index_of(t)
    if i0 >= i1:
        raise ValueError("empty partition: need s < t on the partition grid")
    stride = D.path.grid.stride_to(coarse)
    area = D.area(level)
    return W.sample(np.arange(i0, i1) * stride), area.blocks[i0:i1], np.diff(area.values[i0 : i1 + 1], axis=0)


def _product_area(blocks, A, B):
    """Batched ``X_b[A_b (x) B_b]``."""
    return np.einsum("bik,bxy,bkxyj->bij", A, B, blocks)


def corrected_riemann_sum(
    W: ControlledBiprocess, D: RoughDriver, level: int, s: float = 0.0, t: float = 1.0
) -> np.ndarray:
    """Riemann sum of ``U # dX`` with both area corrections, on a dyadic partition."""
    Wp, blocks, dX = _partition(W, D, level, s, t)
    out = np.zeros((W.dim, W.dim), dtype=complex)
    for w, A, B in Wp.U:
        out += w * (A @ dX @ B).sum(axis=0)
    for w, U1, U2, U3 in Wp.deriv1:
        out += w * (_product_area(blocks, U1, U2) @ U3).sum(axis=0)
    for w, U1, U2, U3 in Wp.deriv2:
        # X*[U2 (x) U3] = X[U3* (x) U2*]*
        dual = _product_area(blocks, np.conj(np.swapaxes(U3, 1, 2)), np.conj(np.swapaxes(U2, 1, 2)))
        out += w * (U1 @ np.conj(np.swapaxes(dual, 1, 2))).sum(axis=0)
    return out


@dataclass(frozen=True)
class RoughIntegral:
    value: np.ndarray
    levels: list
    deltas: list
    converged: bool


def rough_integrate(
    W: ControlledBiprocess,
    D: RoughDriver,
    s: float = 0.0,
    t: float = 1.0,
    tol: float = 1e-4,
    start_level: int | None = None,
    max_level: int | None = None,
    strict: bool = True,
) -> RoughIntegral:
    """Refine dyadic partitions until successive corrected sums agree to ``tol`` (relative).

    With ``strict`` a non-stabilising sequence raises ``ConvergenceError``;
    otherwise the last value is returned with ``converged=False``.
    """
    if start_level is None:
        start_level = 0
        while not _on_grid(s, start_level) or not _on_grid(t, start_level):
            start_level += 1
    max_level = D.fine_level if max_level is None else min(max_level, D.fine_level)
    levels, deltas = [start_level], []
    prev = corrected_riemann_sum(W, D, start_level, s, t)
    for level in range(start_level + 1, max_level + 1):
        cur = corrected_riemann_sum(W, D, level, s, t)
        delta = frobenius(cur - prev)
        levels.append(level)
        deltas.append(delta)
        prev = cur
        if delta <= tol * max(frobenius(cur), np.finfo(float).tiny):
            return RoughIntegral(cur, levels, deltas, True)
    if strict:
        raise ConvergenceError(f"corrected sums did not stabilise by level {max_level}", deltas)
    return RoughIntegral(prev, levels, deltas, False)


def _on_grid(t: float, level: int) -> bool:
    x = t * 2**level
    return abs(x - round(x)) < 1e-9


def componentwise_integral(
    W: ControlledBiprocess, D: RoughDriver, level: int, i: int, j: int, s: float = 0.0, t: float = 1.0
) -> complex:
    """Entry (i, j) as a classical rough integral of a d^2-dimensional controlled path.

    The path is ``Y_(k,l) = U((i,k),(l,j))`` with Gubinelli derivative
    ``Y'_(k,l),(m,n) = U1((i,m),(n,k),(l,j)) + U2((i,k),(l,m),(n,j))``,
    integrated as ``sum_b Y . dX + sum Y'_(k,l),(m,n) X2((m,n),(k,l))``.
    Indices are 1-based.
    """
    d = W.dim
    if not (1 <= i <= d and 1 <= j <= d):
        raise IndexError(f"entry ({i}, {j}) outside 1..{d}")
    i, j = i - 1, j - 1
    Wp, blocks, dX = _partition(W, D, level, s, t)
    K = len(dX)
    Y = np.zeros((K, d, d), dtype=complex)
    for w, A, B in Wp.U:
        Y += w * A[:, i, :, None] * B[:, None, :, j]
    Yp = np.zeros((K, d, d, d, d), dtype=complex)  # [b, k, l, m, n]
    for w, U1, U2, U3 in Wp.deriv1:
        Yp += w * np.einsum("bm,bnk,bl->bklmn", U1[:, i, :], U2, U3[:, :, j])
    for w, U1, U2, U3 in Wp.deriv2:
        Yp += w * np.einsum("bk,blm,bn->bklmn", U1[:, i, :], U2, U3[:, :, j])
    first = np.einsum("bkl,bkl->", Y, dX)
    second = np.einsum("bklmn,bmnkl->", Yp, blocks)
    return complex(first + second)


def _require_brownian(X: HermitianPath):
    if X.H != 0.5:
        raise ValueError(f"Itô/Stratonovich integrals need H = 1/2, got {X.H}")


def _restricted(X: HermitianPath, level: int | None) -> HermitianPath:
    return X if level is None or level == X.grid.level else X.restrict(level)


def ito_integral(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath, level: int | None = None) -> np.ndarray:
    """Left-point sum of ``P(X_u) dX_u Q(X_u)`` on the (possibly restricted) grid."""
    _require_brownian(X)
    V = _restricted(X, level).values
    dX = np.diff(V, axis=0)
    return (P(V[:-1]) @ dX @ Q(V[:-1])).sum(axis=0)


def strato_integral(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath, level: int | None = None) -> np.ndarray:
    """Trapezoid sum of ``P(X_u) dX_u Q(X_u)``."""
    _require_brownian(X)
    V = _restricted(X, level).values
    dX = np.diff(V, axis=0)
    PV, QV = P(V), Q(V)
    return 0.5 * (PV[:-1] @ dX @ QV[:-1] + PV[1:] @ dX @ QV[1:]).sum(axis=0)


def strato_correction(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath, level: int | None = None) -> np.ndarray:
    """``1/2 int_0^1 [Id x Tr_d x Id](dP(X_u) (x) Q(X_u) + P(X_u) (x) dQ(X_u)) du``, trapezoid rule."""
    Xr = _restricted(X, level)
    W = polynomial_biprocess(P, Q, Xr)
    d = X.dim
    f = np.zeros((len(Xr.grid), d, d), dtype=complex)
    for w, U1, U2, U3 in W.deriv1 + W.deriv2:
        tr = np.trace(U2, axis1=1, axis2=2) / d
        f += w * tr[:, None, None] * (U1 @ U3)
    h = Xr.grid.mesh
    return 0.5 * h * (f.sum(axis=0) - 0.5 * (f[0] + f[-1]))


def ito_strato_check(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath, level: int | None = None) -> float:
    """``|strato - ito - correction| / |correction|`` (absolute when the correction vanishes)."""
    corr = strato_correction(P, Q, X, level)
    resid = frobenius(strato_integral(P, Q, X, level) - ito_integral(P, Q, X, level) - corr)
    scale = frobenius(corr)
    return resid / scale if scale > 0 else resid


def wong_zakai_integral(P: NCPolynomial, Q: NCPolynomial, X: HermitianPath, level: int) -> np.ndarray:
    """Exact integral against the piecewise-linear interpolation on the level-``level`` grid.

    On each cell the integrand is a polynomial in time, so Gauss-Legendre
    with enough nodes integrates it exactly.
    """
    V = _restricted(X, level).values
    d = X.dim
    if P.is_zero() or Q.is_zero():
        return np.zeros((d, d), dtype=complex)
    n_nodes = math.ceil((P.degree + Q.degree + 1) / 2) + 1
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    base, dX = V[:-1], np.diff(V, axis=0)
    out = np.zeros((d, d), dtype=complex)
    for v, w in zip(nodes, weights):
        Y = base + v * dX
        out += w * (P(Y) @ dX @ Q(Y)).sum(axis=0)
    return out
