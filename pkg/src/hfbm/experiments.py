"""Monte Carlo trace moments, convergence sweeps in d and Itô/Stratonovich demos."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import NCPolynomial
from .fbm import DyadicGrid, check_hurst
from .integral import ito_strato_check, wong_zakai_integral
from .pairings import genus_expansion_moment, nc_moment, riemann_integrand_moment, word_query
from .process import HermitianPath, sample_hfbm_batch

__all__ = [
    "ExperimentConfig",
    "MomentReport",
    "convergence_sweep",
    "free_strato_first_moment",
    "integral_samples",
    "ito_strato_demo",
    "loglog_slope",
    "mc_trace_moment",
    "resolve_threads",
    "word_level",
]

log = logging.getLogger(__name__)

MODES = ("monomial", "young", "ito", "strato", "rough")
CSV_FIELDS = ["mode", "H", "d", "statistic", "value", "se", "target", "gap", "conjecture"]
THREADS_ENV = "HFBM_THREADS"
MAX_CHUNK_ELEMENTS = 2_000_000


@dataclass
class ExperimentConfig:
    H: float = 0.5
    gamma: float | None = None
    d_list: list = field(default_factory=lambda: [2, 4, 8, 16])
    coarse_level: int = 4
    fine_level: int = 10
    P: list = field(default_factory=lambda: [0.0, 1.0])
    Q: list = field(default_factory=lambda: [1.0])
    r: int = 1
    n_paths: int = 10_000
    seed: int = 0
    out: str | None = None
    mode: str = "monomial"
    word: list = field(default_factory=list)
    levels: list = field(default_factory=lambda: [10, 12, 14])
    chunk_size: int = 4096
    threads: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        check_hurst(self.H)
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.d_list or any(int(d) != d or d < 1 for d in self.d_list):
            raise ValueError("d_list must hold positive integers")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")
        if self.coarse_level < 0 or self.fine_level < self.coarse_level:
            raise ValueError("need 0 <= coarse_level <= fine_level")
        if self.mode in ("young", "rough"):
            gamma = self.gamma if self.gamma is not None else 0.5 * (self.H + max(1 / 3, 2 * self.H - 1))
            if not 1 / 3 < gamma < self.H:
                raise ValueError(f"rough runs need 1/3 < gamma < H; got gamma={gamma}, H={self.H}")
            self.gamma = gamma
        if self.mode == "young" and not self.H > 0.5:
            raise ValueError("young mode needs H > 1/2")
        if self.mode in ("ito", "strato") and self.H != 0.5:
            raise ValueError(f"{self.mode} mode needs H = 1/2")
        if self.mode == "rough" and not 1 / 3 < self.H < 0.5:
            raise ValueError("rough mode covers H in (1/3, 1/2)")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    @property
    def poly_P(self) -> NCPolynomial:
        return NCPolynomial(self.P)

    @property
    def poly_Q(self) -> NCPolynomial:
        return NCPolynomial(self.Q)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class MomentReport:
    mode: str
    H: float
    rows: list = field(default_factory=list)
    slope: float | None = None
    deltas: list = field(default_factory=list)
    query: dict | None = None
    conjecture: bool = False

    def add(self, d, statistic, value, se=None, target=None):
        gap = None if target is None or value is None else value - target
        self.rows.append(
            {
                "mode": self.mode,
                "H": self.H,
                "d": d,
                "statistic": statistic,
                "value": value,
                "se": se,
                "target": target,
                "gap": gap,
                "conjecture": self.conjecture,
            }
        )

    def sort(self):
        def key(row):
            d = row["d"]
            return math.inf if d in ("inf", math.inf, None) else float(d)

        self.rows.sort(key=key)

    def to_csv(self) -> str:
        self.sort()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row[k]) for k in CSV_FIELDS})
        if self.slope is not None:
            writer.writerow(
                {k: "" for k in CSV_FIELDS}
                | {"mode": self.mode, "H": _fmt(self.H), "d": "all", "statistic": "loglog_slope", "value": _fmt(self.slope)}
            )
        return buf.getvalue()

    def to_json(self) -> str:
        self.sort()
        return json.dumps(dataclasses.asdict(self), indent=2, default=_json_default)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def word_level(times: Sequence[float]) -> int:
    """Smallest dyadic level whose grid holds every time in ``times``."""
    for level in range(31):
        if all(abs(t * 2**level - round(t * 2**level)) < 1e-12 for t in times):
            if any(not 0 <= t <= 1 for t in times):
                raise ValueError("word times must lie in [0, 1]")
            return level
    raise ValueError(f"times {list(times)} are not dyadic")


def _require_word(config: ExperimentConfig):
    if not config.word:
        raise ValueError("monomial mode needs a non-empty word of times")


def _chunks(n_paths: int, chunk_size: int, points: int, d: int) -> list:
    size = max(1, min(chunk_size, MAX_CHUNK_ELEMENTS // (points * d * d)))
    return [(k, start, min(size, n_paths - start)) for k, start in enumerate(range(0, n_paths, size))]


def _run_chunks(fn, chunks, threads):
    threads = resolve_threads(threads)
    if threads == 1:
        return [fn(*c) for c in chunks]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def integral_samples(X: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    """Per-path integral matrices for a batch (B, len(fine grid), d, d)."""
    P, Q = config.poly_P, config.poly_Q
    step = 2 ** (config.fine_level - config.coarse_level)
    if config.mode in ("young", "ito"):
        V = X[:, ::step]
        dX = np.diff(V, axis=1)
        return (P(V[:, :-1]) @ dX @ Q(V[:, :-1])).sum(axis=1)
    if config.mode == "strato":
        dX = np.diff(X, axis=1)
        PV, QV = P(X), Q(X)
        return 0.5 * (PV[:, :-1] @ dX @ QV[:, :-1] + PV[:, 1:] @ dX @ QV[:, 1:]).sum(axis=1)
    if config.mode == "rough":
        d = X.shape[-1]
        out = np.empty((len(X), d, d), dtype=complex)
        for b, values in enumerate(X):
            path = HermitianPath(d, DyadicGrid(config.fine_level), values, config.H)
            out[b] = wong_zakai_integral(P, Q, path, config.coarse_level)
        return out
    raise ValueError(f"mode {config.mode!r} has no integral")


def _trace_power(M: np.ndarray, r: int) -> np.ndarray:
    return np.trace(np.linalg.matrix_power(M, r), axis1=-2, axis2=-1).real / M.shape[-1]


def _mc_one_d(config: ExperimentConfig, d: int):
    """Per-path samples of ``Tr_d(...)`` for one dimension."""
    if config.mode == "monomial":
        _require_word(config)
        level = word_level(config.word)
        idx = [round(t * 2**level) for t in config.word]

        def stat(X):
            prod = X[:, idx[0]]
            for k in idx[1:]:
                prod = prod @ X[:, k]
            return np.trace(prod, axis1=-2, axis2=-1).real / d

    else:
        level = config.fine_level

        def stat(X):
            return _trace_power(integral_samples(X, config), config.r)

    chunks = _chunks(config.n_paths, config.chunk_size, 2**level + 1, d)

    def run(k, start, size):
        return stat(sample_hfbm_batch(d, config.H, level, size, config.seed, k))

    return np.concatenate(_run_chunks(run, chunks, config.threads))


def _exact(config: ExperimentConfig, d):
    """Exact value from the pairing engine, or None when guards forbid it."""
    try:
        if config.mode == "monomial":
            return genus_expansion_moment(word_query(config.word, config.H), d)
        scheme = "wong-zakai" if config.mode in ("strato", "rough") else "left"
        return riemann_integrand_moment(
            config.poly_P, config.poly_Q, config.r, config.coarse_level, config.H, d, scheme=scheme
        )
    except ValueError as exc:
        log.info("exact engine skipped: %s", exc)
        return None


def mc_trace_moment(config: ExperimentConfig) -> MomentReport:
    """Monte Carlo estimate of ``phi_d`` with its standard error, next to the exact value."""
    report = MomentReport(config.mode, config.H, conjecture=config.mode == "rough")
    if config.mode == "monomial":
        report.query = word_query(config.word, config.H).to_dict()
    for d in sorted(config.d_list):
        samples = _mc_one_d(config, d)
        se = float(samples.std(ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else math.nan
        exact = _exact(config, d)
        report.add(d, "mc", float(samples.mean()), se=se, target=exact)
        if exact is not None:
            report.add(d, "exact", exact)
    return report


def loglog_slope(ds, gaps) -> float:
    """Least-squares slope of ``log|gap|`` against ``log d`` (zero gaps dropped)."""
    pts = [(math.log(d), math.log(abs(g))) for d, g in zip(ds, gaps) if g != 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def _semicircle_moment(k: int) -> Fraction:
    return Fraction(_catalan(k // 2)) if k % 2 == 0 else Fraction(0)


def free_strato_first_moment(P: NCPolynomial, Q: NCPolynomial) -> float:
    """``phi_inf`` of the free Stratonovich integral of ``P dX Q`` on [0, 1] at H = 1/2.

    The free Itô part has mean zero; the correction is
    ``1/2 int_0^1 phi([Id x phi x Id](dP (x) Q + P (x) dQ)) du`` with
    ``phi(X_u^k) = Catalan(k/2) u^(k/2)``.
    """
    total = Fraction(0)
    a = [Fraction(x).limit_denominator(10**12) for x in P.coefficients]
    b = [Fraction(x).limit_denominator(10**12) for x in Q.coefficients]

    def term(j, k):
        # int_0^1 phi(X_u^j) phi(X_u^k) du
        if j % 2 or k % 2:
            return Fraction(0)
        return _semicircle_moment(j) * _semicircle_moment(k) / (Fraction(j + k, 2) + 1)

    for m, am in enumerate(a):
        for i in range(m):
            for q, bq in enumerate(b):
                total += am * bq * term(m - 1 - i, i + q)
    for q, bq in enumerate(b):
        for i in range(q):
            for p, ap in enumerate(a):
                total += ap * bq * term(i, p + q - 1 - i)
    return float(total / 2)


def convergence_sweep(config: ExperimentConfig) -> MomentReport:
    """Exact (and Monte Carlo, when ``n_paths`` allows) moments across ``d_list`` against the free limit."""
    report = MomentReport(config.mode, config.H, conjecture=config.mode == "rough")
    if config.mode == "monomial":
        _require_word(config)
        q = word_query(config.word, config.H)
        report.query = q.to_dict()
        target = nc_moment(q)
    elif config.mode == "strato" and config.r == 1:
        target = free_strato_first_moment(config.poly_P, config.poly_Q)
    else:
        target = _exact(config, math.inf)
    ds, gaps = [], []
    for d in sorted(config.d_list):
        exact = _exact(config, d)
        if exact is not None:
            report.add(d, "exact", exact, target=target)
            if target is not None:
                ds.append(d)
                gaps.append(exact - target)
        if config.mode != "monomial" or config.n_paths > 1:
            samples = _mc_one_d(config, d)
            se = float(samples.std(ddof=1) / np.sqrt(len(samples)))
            report.add(d, "mc", float(samples.mean()), se=se, target=target)
    if target is not None:
        report.add("inf", "target", target)
    report.slope = loglog_slope(ds, gaps) if len(ds) >= 2 else None
    return report


def ito_strato_demo(config: ExperimentConfig) -> MomentReport:
    """Median Itô/Stratonovich conversion residual per fine level over ``n_paths`` paths."""
    if config.H != 0.5:
        raise ValueError("the conversion formula is stated at H = 1/2")
    P, Q = config.poly_P, config.poly_Q
    top = max(config.levels)
    report = MomentReport("ito-strato", config.H)
    for d in sorted(config.d_list):
        residuals = np.empty((config.n_paths, len(config.levels)))
        for k in range(config.n_paths):
            values = sample_hfbm_batch(d, 0.5, top, 1, config.seed, k)[0]
            path = HermitianPath(d, DyadicGrid(top), values, 0.5)
            residuals[k] = [ito_strato_check(P, Q, path, level) for level in config.levels]
        medians = np.median(residuals, axis=0)
        for level, med in zip(config.levels, medians):
            report.add(d, f"median_residual_level_{level}", float(med))
        report.deltas.append({"d": d, "levels": list(config.levels), "medians": medians.tolist()})
    return report
