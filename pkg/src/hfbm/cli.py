"""Command-line driver: ``hfbm <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .algebra import NCPolynomial
from .experiments import (
    ExperimentConfig,
    convergence_sweep,
    ito_strato_demo,
    mc_trace_moment,
    resolve_threads,
)
from .integral import RoughDriver, ito_integral, polynomial_biprocess, rough_integrate, strato_integral
from .pairings import genus_expansion_moment, riemann_integrand_moment, word_query
from .process import load_path, sample_hfbm, save_path

log = logging.getLogger("hfbm")


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def _config(args, **defaults) -> ExperimentConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    data = defaults | data
    overrides = {
        "H": args.H,
        "d_list": args.d,
        "P": args.P,
        "Q": args.Q,
        "r": args.r,
        "n_paths": args.n_paths,
        "coarse_level": args.coarse_level,
        "fine_level": args.fine_level,
        "mode": args.mode,
        "word": args.word,
        "levels": args.levels,
        "gamma": args.gamma,
        "seed": args.seed,
        "out": args.out,
        "threads": resolve_threads(args.threads),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _matrix_json(M: np.ndarray) -> dict:
    return {"real": M.real.tolist(), "imag": M.imag.tolist()}


def cmd_sample(args):
    cfg = _config(args)
    d = cfg.d_list[0]
    path = sample_hfbm(d, cfg.H, cfg.fine_level, cfg.seed)
    if not cfg.out:
        raise SystemExit("sample needs --out for the binary dump")
    save_path(path, cfg.out)
    print(json.dumps({"file": cfg.out, "d": d, "level": cfg.fine_level, "H": cfg.H, "seed": cfg.seed}))


def cmd_moment_exact(args):
    cfg = _config(args)
    result = {"mode": cfg.mode, "H": cfg.H, "values": []}
    if cfg.mode == "monomial":
        if not cfg.word:
            raise ValueError("monomial mode needs --word")
        q = word_query(cfg.word, cfg.H)
        result["query"] = q.to_dict()
        for d in [*cfg.d_list, math.inf]:
            result["values"].append({"d": str(d), "value": genus_expansion_moment(q, d)})
    else:
        scheme = "wong-zakai" if cfg.mode in ("strato", "rough") else "left"
        result["query"] = {"P": cfg.P, "Q": cfg.Q, "r": cfg.r, "n": cfg.coarse_level, "scheme": scheme}
        for d in [*cfg.d_list, math.inf]:
            value = riemann_integrand_moment(cfg.poly_P, cfg.poly_Q, cfg.r, cfg.coarse_level, cfg.H, d, scheme=scheme)
            result["values"].append({"d": str(d), "value": value})
    _emit(json.dumps(result, indent=2), cfg.out)


def cmd_moment_mc(args):
    cfg = _config(args)
    _emit(mc_trace_moment(cfg).to_json(), cfg.out)


def cmd_integrate(args):
    cfg = _config(args, mode="young", H=0.7)
    P, Q = NCPolynomial(cfg.P), NCPolynomial(cfg.Q)
    if args.path:
        X = load_path(args.path)
    else:
        X = sample_hfbm(cfg.d_list[0], cfg.H, cfg.fine_level, cfg.seed)
    report = {"d": X.dim, "H": X.H, "level": X.grid.level, "mode": cfg.mode}
    if cfg.mode == "ito":
        report["value"] = _matrix_json(ito_integral(P, Q, X, cfg.coarse_level))
    elif cfg.mode == "strato":
        report["value"] = _matrix_json(strato_integral(P, Q, X, cfg.coarse_level))
    else:
        W = polynomial_biprocess(P, Q, X)
        res = rough_integrate(W, RoughDriver(X), 0.0, 1.0, max_level=cfg.coarse_level, strict=False)
        report |= {"value": _matrix_json(res.value), "levels": res.levels, "deltas": res.deltas, "converged": res.converged}
    _emit(json.dumps(report, indent=2), cfg.out)


def cmd_ito_strato(args):
    cfg = _config(args, mode="ito", H=0.5)
    _emit(ito_strato_demo(cfg).to_csv(), cfg.out)


def cmd_sweep(args):
    cfg = _config(args)
    _emit(convergence_sweep(cfg).to_csv(), cfg.out)


COMMANDS = {
    "sample": (cmd_sample, "sample one HfBm path and write the binary dump"),
    "moment-exact": (cmd_moment_exact, "exact trace moments from the pairing engine (JSON)"),
    "moment-mc": (cmd_moment_mc, "Monte Carlo trace moments with standard errors (JSON)"),
    "integrate": (cmd_integrate, "rough, Itô or Stratonovich integral of P dX Q on one path (JSON)"),
    "ito-strato": (cmd_ito_strato, "median conversion residuals per fine level (CSV)"),
    "sweep": (cmd_sweep, "moment gaps across the d list against the free limit (CSV)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hfbm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--config", help="JSON config; flags override its fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, help="worker threads (default $HFBM_THREADS or 1)")
        p.add_argument("--out", help="output file (stdout when omitted)")
        p.add_argument("--H", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--d", type=_ints, help="comma-separated dimensions")
        p.add_argument("--P", type=_floats, help="coefficients a0,a1,...")
        p.add_argument("--Q", type=_floats)
        p.add_argument("--r", type=int)
        p.add_argument("--n-paths", type=int)
        p.add_argument("--coarse-level", type=int)
        p.add_argument("--fine-level", type=int)
        p.add_argument("--levels", type=_ints)
        p.add_argument("--mode", choices=["monomial", "young", "ito", "strato", "rough"])
        p.add_argument("--word", type=_floats, help="comma-separated dyadic times")
        if name == "integrate":
            p.add_argument("--path", help="binary path dump to integrate against")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
