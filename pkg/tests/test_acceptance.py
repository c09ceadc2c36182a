"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v -s tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import itertools
import math
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from hfbm.algebra import NCPolynomial, Tensor2, matrix_unit
from hfbm.experiments import ExperimentConfig, loglog_slope, mc_trace_moment
from hfbm.fbm import DyadicGrid, fbm_covariance, gram_matrix, sample_fbm_paths
from hfbm.integral import (
    RoughDriver,
    componentwise_integral,
    corrected_riemann_sum,
    ito_integral,
    ito_strato_check,
    polynomial_biprocess,
    strato_integral,
)
from hfbm.levy import LevyArea2, ProductLevyArea, chen_defect, classical_chen_defect, strato_minus_ito_areas
from hfbm.pairings import (
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
from hfbm.process import sample_hfbm

RESULTS = {}
LINES = {}


def report(n, ok, detail):
    line = f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = ok
    LINES[n] = line
    print(line, flush=True)
    return ok


def _double_factorial(n):
    return math.prod(range(n, 0, -2))


def _catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def criterion_1():
    t0 = time.perf_counter()
    counts = all(sum(1 for _ in enumerate_pairings(r)) == _double_factorial(r - 1) for r in range(2, 13, 2))
    nc = [sum(is_noncrossing(p) for p in enumerate_pairings(2 * k)) for k in range(1, 6)]
    dists = {}
    for r in (4, 6, 8):
        g = [genus(p) for p in enumerate_pairings(r)]
        dists[r] = tuple(g.count(k) for k in range(r // 4 + 1))
    brute = True
    for r in range(1, 6):
        for sigma in itertools.permutations(range(r)):
            for d in (1, 2, 3):
                try:
                    indicator_sum_check(sigma, d)
                except AssertionError:
                    brute = False
    elapsed = time.perf_counter() - t0
    ok = (
        counts
        and nc == [1, 2, 5, 14, 42]
        and dists == {4: (2, 1), 6: (5, 10), 8: (14, 70, 21)}
        and brute
        and elapsed < 10
    )
    return ok, f"counts={counts} NC2={nc} genus={dists} brute={brute} time={elapsed:.1f}s"


def _isserlis(C):
    @lru_cache(maxsize=None)
    def rec(idx):
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        return sum(C[first, j] * rec(rest[:k] + rest[k + 1 :]) for k, j in enumerate(rest))

    return 0.0 if len(C) % 2 else rec(tuple(range(len(C))))


def criterion_2():
    rng = np.random.default_rng(2)
    worst = 0.0
    for H in (0.4, 0.5, 0.7):
        for r in range(1, 9):
            for _ in range(10):
                q = word_query(rng.uniform(0, 1, r), H)
                want = _isserlis(q.covariance())
                worst = max(worst, abs(genus_expansion_moment(q, 1) - want) / max(1.0, abs(want)))
    return worst <= 1e-12, f"max error vs Isserlis {worst:.2e} (tol 1e-12)"


def criterion_3():
    t0 = time.perf_counter()
    ok, parts = True, []
    for H in (0.5, 0.7):
        for power, target in ((4, 2.015625), (6, 5 + 10 / 64)):
            seed = 31 + int(10 * H) + power
            cfg = ExperimentConfig(mode="monomial", word=[1.0] * power, H=H, d_list=[8], n_paths=200_000, seed=seed)
            row = next(r for r in mc_trace_moment(cfg).rows if r["statistic"] == "mc")
            z = (row["value"] - target) / row["se"]
            ok &= abs(z) <= 4
            parts.append(f"H={H} X^{power}: {row['value']:.5f}±{row['se']:.5f} (z={z:+.2f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    return ok, "; ".join(parts) + f"; time={elapsed:.0f}s"


def criterion_4():
    rng = np.random.default_rng(4)
    d = 3
    X = sample_hfbm(d, 0.7, 10, 4)
    level = 6
    n = 2**level
    path_scale = max(np.linalg.norm(X.values[j] - X.values[i]) for i in range(0, 1025, 64) for j in range(i, 1025, 64)) ** 2
    worst = 0.0
    for mode in ("left", "trapezoid"):
        PA = ProductLevyArea(LevyArea2.from_path(X, level, mode))
        for _ in range(100):
            i, k, j = sorted(rng.integers(0, n + 1, 3))
            A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            T = Tensor2.simple(A, B) + Tensor2.from_dense(rng.normal(size=(d,) * 4))
            scale = 1 + T.norm() * path_scale
            D = chen_defect(PA, i / n, k / n, j / n, T)
            C = classical_chen_defect(PA.area, i, k, j)
            worst = max(worst, np.abs(D).max() / scale, np.abs(C).max() / (1 + path_scale))
    return worst <= 1e-12, f"max scaled Chen defect {worst:.2e} over 2x100 probes (tol 1e-12)"


def criterion_5():
    d = 3
    X = sample_hfbm(d, 0.7, 10, 5)
    D = RoughDriver(X)
    P = NCPolynomial([0, 0, 1])
    W = polynomial_biprocess(P, P, X)
    worst = 0.0
    for level in range(0, 11):
        S = corrected_riemann_sum(W, D, level)
        C = np.array([[componentwise_integral(W, D, level, i, j) for j in range(1, d + 1)] for i in range(1, d + 1)])
        scale = np.abs(S).max()
        err = np.abs(S - C).max()
        worst = max(worst, err / scale if scale > 0 else err)
    return worst <= 1e-10, f"max relative entrywise gap over levels 0..10: {worst:.2e} (tol 1e-10)"


def criterion_6():
    d = 4
    I = np.eye(d)
    E11, E12 = matrix_unit(d, 1, 1), matrix_unit(d, 1, 2)
    ok, parts = True, []
    cases = (("Id,Id", I, I), ("E11,E11", E11, E11), ("Id,E12", I, E12))
    estimates = strato_minus_ito_areas([(U, V) for _, U, V in cases], d, fine_level=12, n_paths=10_000, seed=6)
    for (name, U, V), est in zip(cases, estimates):
        target = 0.5 * np.trace(V) / d * U
        good = est.within(target, 4)
        zr = np.abs(est.mean.real - target.real) / np.maximum(est.se_real, 1e-300)
        ok &= bool(good.all())
        parts.append(f"({name}) entries within 4SE: {int(good.sum())}/{good.size}, max|z|={zr.max():.2f}")
    return ok, "; ".join(parts)


def criterion_7():
    X1 = NCPolynomial([0, 1])
    levels = (10, 12, 14)
    res = np.array(
        [[ito_strato_check(X1, X1, path, lv) for lv in levels] for path in (sample_hfbm(4, 0.5, 14, 700 + k) for k in range(20))]
    )
    med = np.median(res, axis=0)
    # d = 1: strato - ito against the scalar correction int X du
    scalar = []
    for k in range(20):
        path = sample_hfbm(1, 0.5, 14, 800 + k)
        x = path.values[:, 0, 0].real
        oracle = path.grid.mesh * (x.sum() - 0.5 * (x[0] + x[-1]))
        diff = (strato_integral(X1, X1, path) - ito_integral(X1, X1, path))[0, 0].real
        scalar.append(abs(diff - oracle) / abs(oracle))
    smed = float(np.median(scalar))
    ok = med[0] > med[1] > med[2] and med[2] <= 0.05 and smed <= 0.05
    return ok, f"d=4 medians {np.round(med, 4).tolist()} (levels 10/12/14); d=1 scalar median {smed:.4f} (tol 0.05)"


def criterion_8():
    ok, parts = True, []
    ds = [2, 4, 8, 16]
    for k in (2, 3):
        q = word_query([1.0] * (2 * k), 0.5)
        gaps = [genus_expansion_moment(q, d) - _catalan(k) for d in ds]
        slope = loglog_slope(ds, gaps)
        ok &= -2.01 <= slope <= -1.99 and nc_moment(q) == _catalan(k)
        parts.append(f"k={k} slope={slope:.6f}")
    # k = 1 has no correction at all: phi_d(X^2) = 1 for every d
    flat = all(genus_expansion_moment(word_query([1.0, 1.0], 0.5), d) == 1 for d in ds)
    ok &= flat
    return ok, "; ".join(parts) + f"; k=1 gap identically 0: {flat}"


def criterion_9():
    t0 = time.perf_counter()
    P, Q = NCPolynomial([0, 1]), NCPolynomial([1])
    vals = {d: riemann_integrand_moment(P, Q, 2, 4, 0.7, d) for d in (2, 4, math.inf)}
    ratio = (vals[2] - vals[math.inf]) / (vals[4] - vals[math.inf])
    cfg = ExperimentConfig(mode="young", H=0.7, P=[0, 1], Q=[1], r=2, coarse_level=4, fine_level=10, d_list=[4], n_paths=10_000, seed=9)
    row = next(r for r in mc_trace_moment(cfg).rows if r["statistic"] == "mc")
    z = (row["value"] - vals[4]) / row["se"]
    elapsed = time.perf_counter() - t0
    ok = 3.4 <= ratio <= 4.6 and abs(z) <= 4 and elapsed < 300
    return ok, f"gap ratio {ratio:.4f}; MC {row['value']:.5f}±{row['se']:.5f} vs exact {vals[4]:.5f} (z={z:+.2f}); time={elapsed:.0f}s"


def criterion_10():
    words = [([1, 2, 2, 1], 1), ([1, 2, 1, 2], -1), ([2, 1, 2, 1], -1), ([2, 1, 1, 2], 1)]
    ok, parts = True, []
    for H in (0.4, 0.5, 0.6):
        got = sum(s * genus_g_functional(word_query(w, H), 1) for w, s in words)
        want = 2 ** (2 * H + 1) * (2 ** (2 * H - 2) - 1)
        ok &= abs(got - want) <= 1e-12 and got < 0
        parts.append(f"H={H}: {got:.12f}")
    got = sum(s * genus_g_functional(word_query(w, 0.5), 1) for w, s in words)
    ok &= abs(got + 2) <= 1e-12
    return ok, "; ".join(parts)


def criterion_11():
    grid = DyadicGrid(3)
    ok, parts = True, []
    for H in (0.4, 0.5, 0.7):
        x = sample_fbm_paths(H, grid, 100_000, np.random.default_rng(11))[:, 1:]
        prods = x[:, :, None] * x[:, None, :]
        se = prods.std(axis=0, ddof=1) / np.sqrt(len(x))
        z = np.abs(prods.mean(axis=0) - gram_matrix(H, grid)) / se
        ok &= bool((z <= 5).all())
        parts.append(f"H={H} max|z|={z.max():.2f}")
    return ok, "; ".join(parts) + " (tol 5 SE, 8x8 entries)"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    assert report(n, ok, detail), detail


if __name__ == "__main__":
    for n, fn in CRITERIA.items():
        report(n, *fn())
    sys.exit(0 if all(RESULTS.values()) else 1)
