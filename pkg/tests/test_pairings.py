import itertools
import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfbm.algebra import NCPolynomial
from hfbm.fbm import fbm_covariance
from hfbm.pairings import (
    Increment,
    MomentQuery,
    Pairing,
    PointValue,
    count_cycles,
    enumerate_pairings,
    genus,
    genus_expansion_moment,
    genus_g_functional,
    indicator_sum_check,
    is_noncrossing,
    nc_moment,
    riemann_integrand_moment,
    word_query,
)


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def isserlis(C):
    """Gaussian moment by recursive expansion on the first letter."""

    @lru_cache(maxsize=None)
    def rec(idx):
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        return sum(C[first, j] * rec(rest[:k] + rest[k + 1 :]) for k, j in enumerate(rest))

    r = len(C)
    return 0.0 if r % 2 else rec(tuple(range(r)))


@pytest.mark.parametrize("r,count", [(2, 1), (4, 3), (6, 15), (8, 105), (10, 945)])
def test_pairing_counts(r, count):
    ps = list(enumerate_pairings(r))
    assert len(ps) == count
    assert len({p.partner for p in ps}) == count
    for p in ps:
        assert all(p.partner[p.partner[i]] == i and p.partner[i] != i for i in range(r))


@pytest.mark.parametrize("r", [0, 3, 18])
def test_pairing_guards(r):
    with pytest.raises(ValueError):
        list(enumerate_pairings(r))


def test_pairing_validation():
    with pytest.raises(ValueError):
        Pairing((0, 0))
    with pytest.raises(ValueError):
        Pairing((1, 2, 0))
    p = Pairing.from_blocks([(1, 3), (2, 4)])
    assert p.partner == (2, 3, 0, 1) and p.r == 4
    assert sorted(p.blocks()) == [(0, 2), (1, 3)]


def test_genus_examples():
    assert genus(Pairing.from_blocks([(1, 2)])) == 0
    assert genus(Pairing.from_blocks([(1, 3), (2, 4)])) == 1
    assert genus(Pairing.from_blocks([(1, 2), (3, 4)])) == 0
    assert is_noncrossing(Pairing.from_blocks([(1, 2), (3, 4)]))
    assert not is_noncrossing(Pairing.from_blocks([(1, 3), (2, 4)]))
    assert is_noncrossing(Pairing.from_blocks([(1, 4), (2, 3)]))


@pytest.mark.parametrize("r,dist", [(4, [2, 1]), (6, [5, 10]), (8, [14, 70, 21])])
def test_genus_distribution(r, dist):
    g = [genus(p) for p in enumerate_pairings(r)]
    assert [g.count(k) for k in range(r // 4 + 1)] == dist


@pytest.mark.parametrize("r", [2, 4, 6, 8, 10])
def test_noncrossing_iff_genus_zero(r):
    nc = 0
    for p in enumerate_pairings(r):
        g = genus(p)
        assert 0 <= g <= r / 4
        assert is_noncrossing(p) == (g == 0)
        nc += is_noncrossing(p)
    assert nc == catalan(r // 2)


def test_count_cycles():
    assert count_cycles([0, 1, 2]) == 3
    assert count_cycles([1, 2, 0]) == 1
    assert count_cycles([1, 0, 3, 2]) == 2


def test_indicator_sum_examples():
    assert indicator_sum_check([0, 1, 2], 2) == 8
    assert indicator_sum_check([1, 0], 3) == 3
    assert indicator_sum_check([1, 2, 0], 2) == 2
    with pytest.raises(ValueError):
        indicator_sum_check(list(range(9)), 2)
    with pytest.raises(ValueError):
        indicator_sum_check([0, 0], 2)


def test_letters_and_kernel():
    q = MomentQuery((PointValue(0.5), Increment(0.25, 1.0)), 0.7)
    C = q.covariance()
    c = lambda s, t: fbm_covariance(0.7, s, t)
    assert C[0, 1] == pytest.approx(c(0.5, 1.0) - c(0.5, 0.25), abs=1e-15)
    assert C[1, 1] == pytest.approx(0.75**1.4, abs=1e-14)
    assert np.array_equal(C, C.T)
    with pytest.raises(ValueError):
        word_query([-0.1, 0.5], 0.5)
    assert q.to_dict() == {"H": 0.7, "letters": [{"point": 0.5}, {"increment": [0.25, 1.0]}]}


@pytest.mark.parametrize("d", [1, 2, 3, 8])
def test_monomial_moments(d):
    H = 0.7
    assert genus_expansion_moment(word_query([1] * 4, H), d) == pytest.approx(2 + d**-2, abs=1e-14)
    assert genus_expansion_moment(word_query([1] * 6, H), d) == pytest.approx(5 + 10 * d**-2, abs=1e-13)
    assert genus_expansion_moment(word_query([1] * 3, H), d) == 0


def test_nc_moments():
    for k in range(1, 5):
        assert nc_moment(word_query([1] * (2 * k), 0.3)) == catalan(k)
    assert nc_moment(word_query([0.25, 0.75], 0.3)) == pytest.approx(fbm_covariance(0.3, 0.25, 0.75))
    with pytest.raises(ValueError):
        genus_expansion_moment(word_query([1, 1], 0.3), 0)


def test_expansion_tends_to_nc():
    q = word_query([0.25, 0.5, 1, 0.75, 0.5, 1], 0.6)
    sums = [genus_g_functional(q, g) for g in range(3)]
    for d in (2, 5, 40):
        gap = genus_expansion_moment(q, d) - nc_moment(q)
        assert gap == pytest.approx(sums[1] * d**-2 + sums[2] * d**-4, abs=1e-14)
    assert genus_g_functional(q, 2) == 0
    with pytest.raises(ValueError):
        genus_g_functional(q, -1)


def _witness(H):
    words = [([1, 2, 2, 1], 1), ([1, 2, 1, 2], -1), ([2, 1, 2, 1], -1), ([2, 1, 1, 2], 1)]
    return sum(sign * genus_g_functional(word_query(w, H), 1) for w, sign in words)


@pytest.mark.parametrize("H", [0.4, 0.5, 0.6])
def test_negativity_witness(H):
    want = 2 ** (2 * H + 1) * (2 ** (2 * H - 2) - 1)
    assert _witness(H) == pytest.approx(want, abs=1e-12)
    assert want < 0
    assert _witness(0.5) == pytest.approx(-2.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([0.4, 0.5, 0.7]),
    st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: len(v) % 2 == 0),
)
def test_d1_equals_isserlis(H, times):
    q = word_query(times, H)
    assert genus_expansion_moment(q, 1) == pytest.approx(isserlis(q.covariance()), abs=1e-12)


def test_isserlis_mixed_letters():
    rng = np.random.default_rng(0)
    for _ in range(10):
        letters = []
        for _ in range(6):
            s, t = np.sort(rng.uniform(0, 1, 2))
            letters.append(PointValue(t) if rng.random() < 0.5 else Increment(s, t))
        q = MomentQuery(tuple(letters), 0.4)
        assert genus_expansion_moment(q, 1) == pytest.approx(isserlis(q.covariance()), abs=1e-12)


def _riemann_brute(P, Q, r, n, H, d):
    """Expand the r-th power of the Riemann sum into letter words by hand."""
    h = 2.0**-n
    factors = []
    for i in range(2**n):
        t = i * h
        for p, a in enumerate(P.coefficients):
            for q, b in enumerate(Q.coefficients):
                if a * b:
                    letters = [PointValue(t)] * p + [Increment(t, t + h)] + [PointValue(t)] * q
                    factors.append((a * b, letters))
    total = 0.0
    for combo in itertools.product(factors, repeat=r):
        w = math.prod(c for c, _ in combo)
        letters = tuple(l for _, ls in combo for l in ls)
        total += w * genus_expansion_moment(MomentQuery(letters, H), d)
    return total


@pytest.mark.parametrize("d", [1, 2, math.inf])
def test_riemann_moment_vs_brute(d):
    P, Q = NCPolynomial([0.5, 1.0]), NCPolynomial([1.0, -0.5])
    got = riemann_integrand_moment(P, Q, 2, 2, 0.7, d)
    assert got == pytest.approx(_riemann_brute(P, Q, 2, 2, 0.7, d), rel=1e-10, abs=1e-12)


def test_riemann_moment_examples():
    one = NCPolynomial([1.0])
    X = NCPolynomial([0.0, 1.0])
    for d in (1, 3, math.inf):
        assert riemann_integrand_moment(one, one, 2, 3, 0.6, d) == pytest.approx(1.0, abs=1e-12)
        assert riemann_integrand_moment(one, one, 3, 2, 0.6, d) == 0
        assert riemann_integrand_moment(X, X, 1, 2, 0.6, d) == 0
    by_genus = riemann_integrand_moment(X, one, 2, 4, 0.7, by_genus=True)
    d2, d4, dinf = (riemann_integrand_moment(X, one, 2, 4, 0.7, d) for d in (2, 4, math.inf))
    assert dinf == pytest.approx(by_genus[0], abs=1e-14)
    assert (d2 - dinf) / (d4 - dinf) == pytest.approx(4.0, rel=1e-10)
    with pytest.raises(ValueError):
        riemann_integrand_moment(NCPolynomial([0, 0, 1]), NCPolynomial([0, 0, 1]), 3, 2, 0.7, 2)
    with pytest.raises(ValueError):
        riemann_integrand_moment(X, one, 2, 7, 0.7, 2)


def test_wong_zakai_moment_first_order():
    # phi_inf of the interpolated integral of X dX is half the terminal variance
    X = NCPolynomial([0.0, 1.0])
    one = NCPolynomial([1.0])
    for n in (0, 2, 4):
        assert riemann_integrand_moment(X, one, 1, n, 0.5, math.inf, scheme="wong-zakai") == pytest.approx(0.5, abs=1e-12)
        assert riemann_integrand_moment(X, one, 1, n, 0.5, math.inf) == pytest.approx(0.0, abs=1e-12)
