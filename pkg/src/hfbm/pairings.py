"""Pairings, genus and exact Wick / genus-expansion moments.

A pairing of ``{0, .., r-1}`` is stored as its partner array; moments of a
Gaussian matrix family with covariance ``c(s, t) [i = l][j = k] / d`` are

    phi_d(M_1 ... M_r) = sum_pi d^(-2 genus(pi)) prod_{(p, q) in pi} c(t_p, t_q).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .algebra import NCPolynomial
from .fbm import check_hurst, fbm_covariance

__all__ = [
    "MAX_LETTERS",
    "Increment",
    "MomentQuery",
    "Pairing",
    "PointValue",
    "count_cycles",
    "enumerate_pairings",
    "genus",
    "genus_expansion_moment",
    "genus_g_functional",
    "indicator_sum_check",
    "is_noncrossing",
    "nc_moment",
    "pairing_table",
    "riemann_integrand_moment",
    "word_query",
]

MAX_LETTERS = 16


@dataclass(frozen=True)
class Pairing:
    partner: tuple

    def __post_init__(self):
        r = len(self.partner)
        if r == 0 or r % 2:
            raise ValueError("a pairing needs an even, positive number of points")
        for p, q in enumerate(self.partner):
            if q == p or not 0 <= q < r or self.partner[q] != p:
                raise ValueError(f"not a fixed-point-free involution: {self.partner}")

    @classmethod
    def from_blocks(cls, blocks, one_based: bool = True) -> "Pairing":
        shift = 1 if one_based else 0
        r = 2 * len(blocks)
        partner = [-1] * r
        for p, q in blocks:
            partner[p - shift], partner[q - shift] = q - shift, p - shift
        return cls(tuple(partner))

    @property
    def r(self) -> int:
        return len(self.partner)

    def blocks(self) -> list:
        return [(p, q) for p, q in enumerate(self.partner) if p < q]


def _check_r(r: int):
    if r <= 0 or r % 2:
        raise ValueError(f"pairings need an even positive r, got {r}")
    if r > MAX_LETTERS:
        raise ValueError(f"r = {r} exceeds the enumeration guard {MAX_LETTERS}")


def _pairings(points: list) -> Iterator[list]:
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for k, q in enumerate(rest):
        for tail in _pairings(rest[:k] + rest[k + 1 :]):
            yield [(first, q)] + tail


def enumerate_pairings(r: int) -> Iterator[Pairing]:
    """Every perfect matching of ``{0, .., r-1}`` exactly once."""
    _check_r(r)
    for blocks in _pairings(list(range(r))):
        yield Pairing.from_blocks(blocks, one_based=False)


def count_cycles(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    cycles = 0
    for start in range(len(perm)):
        if not seen[start]:
            cycles += 1
            p = start
            while not seen[p]:
                seen[p] = True
                p = perm[p]
    return cycles


def genus(pi: Pairing) -> int:
    """``(r/2 + 1 - #cycles(gamma o pi)) / 2`` with ``gamma`` the long cycle."""
    r = pi.r
    composed = [(pi.partner[p] + 1) % r for p in range(r)]
    twice = r // 2 + 1 - count_cycles(composed)
    if twice % 2:
        raise ArithmeticError("odd genus numerator; pairing data corrupted")
    return twice // 2


def is_noncrossing(pi: Pairing) -> bool:
    """No blocks ``{p, p'}``, ``{q, q'}`` with ``p < q < p' < q'``."""
    blocks = pi.blocks()
    for (p, p2), (q, q2) in itertools.combinations(blocks, 2):
        if p < q < p2 < q2 or q < p < q2 < p2:
            return False
    return True


@lru_cache(maxsize=None)
def pairing_table(r: int):
    """``(pairs, genera)``: array (N, r/2, 2) of blocks and the genus of each pairing."""
    _check_r(r)
    pairings = list(enumerate_pairings(r))
    pairs = np.array([pi.blocks() for pi in pairings], dtype=np.int64)
    genera = np.array([genus(pi) for pi in pairings], dtype=np.int64)
    pairs.setflags(write=False)
    genera.setflags(write=False)
    return pairs, genera


def indicator_sum_check(sigma: Sequence[int], d: int) -> int:
    """Brute-force ``sum_{i_1..i_r} prod_p [i_p = i_sigma(p)]``; must equal ``d^#cycles``."""
    r = len(sigma)
    if sorted(sigma) != list(range(r)):
        raise ValueError("sigma must be a permutation of 0..r-1")
    if r > 8 or d > 4:
        raise ValueError("brute-force guard: r <= 8 and d <= 4")
    total = sum(
        all(idx[p] == idx[sigma[p]] for p in range(r)) for idx in itertools.product(range(d), repeat=r)
    )
    expected = d ** count_cycles(sigma)
    if total != expected:
        raise AssertionError(f"indicator sum {total} != d^#cycles = {expected}")
    return total


@dataclass(frozen=True)
class PointValue:
    t: float

    def combination(self):
        return ((self.t, 1.0),)


@dataclass(frozen=True)
class Increment:
    s: float
    t: float

    def combination(self):
        return ((self.t, 1.0), (self.s, -1.0))


@dataclass(frozen=True)
class MomentQuery:
    """Ordered letters with the fractional kernel extended bilinearly."""

    letters: tuple
    H: float

    def __post_init__(self):
        check_hurst(self.H)
        for letter in self.letters:
            for t, _ in letter.combination():
                if t < 0:
                    raise ValueError("letter times must be nonnegative")

    def covariance(self) -> np.ndarray:
        r = len(self.letters)
        C = np.zeros((r, r))
        combos = [letter.combination() for letter in self.letters]
        for a in range(r):
            for b in range(a, r):
                C[a, b] = C[b, a] = math.fsum(
                    ca * cb * fbm_covariance(self.H, s, t) for s, ca in combos[a] for t, cb in combos[b]
                )
        return C

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "letters": [
                {"point": l.t} if isinstance(l, PointValue) else {"increment": [l.s, l.t]} for l in self.letters
            ],
        }


def word_query(times: Sequence[float], H: float) -> MomentQuery:
    return MomentQuery(tuple(PointValue(float(t)) for t in times), H)


def _genus_sums(C: np.ndarray) -> np.ndarray:
    """``[sum_{genus(pi) = g} prod c(pi)]`` for g = 0 .. r/4."""
    r = len(C)
    if r == 0:
        return np.array([1.0])
    if r % 2:
        return np.zeros(1)
    pairs, genera = pairing_table(r)
    prods = np.prod(C[pairs[..., 0], pairs[..., 1]], axis=1)
    return np.array([math.fsum(prods[genera == g]) for g in range(r // 4 + 1)])


def _combine(sums: np.ndarray, d) -> float:
    if d == math.inf:
        return float(sums[0])
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer or inf, got {d}")
    return math.fsum(s * float(d) ** (-2 * g) for g, s in enumerate(sums))


def genus_expansion_moment(q: MomentQuery, d) -> float:
    """``phi_d`` of the letter product; ``d = inf`` keeps genus 0 only."""
    return _combine(_genus_sums(q.covariance()), d)


def nc_moment(q: MomentQuery) -> float:
    """Free limit: Wick sum over non-crossing pairings."""
    return genus_expansion_moment(q, math.inf)


def genus_g_functional(q: MomentQuery, g: int) -> float:
    """Genus-``g`` slice of the Wick sum (zero beyond r/4)."""
    if g < 0:
        raise ValueError("genus is nonnegative")
    sums = _genus_sums(q.covariance())
    return float(sums[g]) if g < len(sums) else 0.0


# ---------------------------------------------------------------------------
# Moments of Riemann-sum and Wong-Zakai integrands
# ---------------------------------------------------------------------------

_POINT, _INC = 0, 1


def _factor_words(P: NCPolynomial, Q: NCPolynomial, scheme: str) -> list:
    """Letter patterns of one factor ``P(Y) dY Q(Y)``.

    Each entry is ``(coefficient, kinds)`` with kinds a tuple of
    ``_POINT`` / ``_INC``. For ``wong-zakai`` the cell integral
    ``int_0^1 P(Y + v dY) dY Q(Y + v dY) dv`` is expanded: a word with
    ``k`` increments picked from P and Q carries ``1 / (k + 1)``.
    """
    out = []
    for p, a in enumerate(P.coefficients):
        for q, b in enumerate(Q.coefficients):
            if a == 0 or b == 0:
                continue
            if scheme == "left":
                out.append((a * b, (_POINT,) * p + (_INC,) + (_POINT,) * q))
                continue
            for choice in itertools.product((_POINT, _INC), repeat=p + q):
                k = sum(choice)
                out.append((a * b / (k + 1), choice[:p] + (_INC,) + choice[p:]))
    return out


def _cov_blocks(H: float, n: int) -> dict:
    """Covariance matrices over cell indices for each pair of letter kinds."""
    t = np.arange(2**n) / 2**n
    h = 2.0**-n

    def c(a, b):
        return fbm_covariance(H, a[:, None], b[None, :])

    pp = c(t, t)
    pi = c(t, t + h) - c(t, t)
    ii = c(t + h, t + h) - c(t + h, t) - c(t, t + h) + c(t, t)
    return {(_POINT, _POINT): pp, (_POINT, _INC): pi, (_INC, _POINT): pi.T, (_INC, _INC): ii}


def _pattern_genus_sums(kinds: tuple, slots: tuple, r: int, blocks: dict, n_cells: int) -> np.ndarray:
    R = len(kinds)
    pairs, genera = pairing_table(R)
    out = np.zeros(R // 4 + 1)
    letters = "abcdefghijklmnop"[:r]
    for row, g in zip(pairs, genera):
        operands, subs = [], []
        for p, q in row:
            sp, sq = slots[p], slots[q]
            M = blocks[(kinds[p], kinds[q])]
            if sp == sq:
                operands.append(np.diagonal(M))
                subs.append(letters[sp])
            else:
                operands.append(M)
                subs.append(letters[sp] + letters[sq])
        for k in range(r):
            if all(letters[k] not in s for s in subs):
                operands.append(np.ones(n_cells))
                subs.append(letters[k])
        out[g] += np.einsum(",".join(subs) + "->", *operands, optimize="greedy")
    return out


def riemann_integrand_moment(
    P: NCPolynomial,
    Q: NCPolynomial,
    r: int,
    n: int,
    H: float,
    d=math.inf,
    scheme: str = "left",
    by_genus: bool = False,
):
    """Exact ``phi_d((sum_i P(X_ti) dX_i Q(X_ti))^r)`` on the level-``n`` dyadic grid.

    ``scheme="wong-zakai"`` replaces each cell term by the integral against
    the linear interpolation. With ``by_genus`` the per-genus sums are
    returned instead of their d-weighted total.
    """
    H = check_hurst(H)
    if scheme not in ("left", "wong-zakai"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if r < 1:
        raise ValueError("r must be positive")
    letters_per_factor = max(P.degree, 0) + max(Q.degree, 0) + 1
    if r * letters_per_factor > 12 or n > 6:
        raise ValueError("combinatorial guard: r * (deg P + deg Q + 1) <= 12 and n <= 6")
    total_deg = r * letters_per_factor
    sums = np.zeros(total_deg // 4 + 1)
    if P.is_zero() or Q.is_zero():
        return sums if by_genus else 0.0
    words = _factor_words(P, Q, scheme)
    blocks = _cov_blocks(H, n)
    terms = [[] for _ in sums]
    for combo in itertools.product(words, repeat=r):
        coeff = math.prod(c for c, _ in combo)
        kinds = tuple(k for _, word in combo for k in word)
        if len(kinds) % 2:
            continue
        slots = tuple(j for j, (_, word) in enumerate(combo) for _ in word)
        part = _pattern_genus_sums(kinds, slots, r, blocks, 2**n)
        for g, v in enumerate(part):
            terms[g].append(coeff * v)
    sums = np.array([math.fsum(t) for t in terms])
    return sums if by_genus else _combine(sums, d)
