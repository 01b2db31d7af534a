"""Command-line interface: ``htl simulate|limits|normalizers|verify|report``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from htl import __version__
from htl.acceptance import CRITERIA, run_criteria
from htl.config import (DEFAULT_R_GRID, DEFAULT_S_GRID, DEFAULT_SEED, PRESETS, ConfigError,
                        ExperimentConfig, preset, seed_from_env)
from htl.counting import CountingProcessModel
from htl.distributions import ParetoTypeModel
from htl.limits import LT_CASES, LimitLawSpec, lt_limit
from htl.montecarlo import make_grid
from htl.normalizers import normalizer_table, residuals

EXIT_OK, EXIT_GATES_FAILED, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--case", help="case id: 1, 2, 3a, 3b, 4a, 4b, 5, 6")
    p.add_argument("--t-ladder", type=_floats, help="comma-separated t values")
    p.add_argument("--reps", type=int, help="replications per t")
    p.add_argument("--seed", type=int, help="master seed (else HTL_SEED, else config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("claim-size model")
    g.add_argument("--family", default="exact_pareto")
    g.add_argument("--alpha", type=float)
    g.add_argument("--x-min", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--hall-C", type=float, default=1.0)
    g.add_argument("--hall-D", type=float, default=0.0)
    g.add_argument("--hall-beta", type=float, default=1.0)
    c = p.add_argument_group("counting process")
    c.add_argument("--counting", default="poisson",
                   help="deterministic, poisson, mixed_poisson_gamma")
    c.add_argument("--lambda", dest="lam", type=float, default=1.0)
    c.add_argument("--gamma-shape", type=float, default=3.0)
    c.add_argument("--gamma-rate", type=float, default=3.0)
    c.add_argument("--averaging", choices=("D", "p"), default="D")


def _model_dicts(args) -> tuple[dict, dict]:
    if args.alpha is None:
        raise ConfigError("--alpha is required without --config")
    dist = {"family": args.family, "alpha": args.alpha, "x_min": args.x_min, "rho": args.rho,
            "hall_C": args.hall_C, "hall_D": args.hall_D, "hall_beta": args.hall_beta}
    counting = {"kind": args.counting, "averaging": args.averaging}
    if args.counting == "poisson":
        counting["lambda"] = args.lam
    elif args.counting in ("mixed_poisson_gamma", "mixed-poisson-gamma"):
        counting.update(gamma_shape=args.gamma_shape, gamma_rate=args.gamma_rate)
    return dist, counting


def resolve_config(args, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """File keys, then HTL_SEED for the seed, then command-line flags."""
    if base is None:
        if getattr(args, "config", None) is not None:
            base = ExperimentConfig.load(args.config)
        else:
            if args.case is None:
                raise ConfigError("either --config or --case with model flags is required")
            dist, counting = _model_dicts(args)
            base = ExperimentConfig(distribution=dist, counting=counting, case=args.case)
    cfg = base.with_overrides(seed=seed_from_env(base.seed))
    cfg = cfg.with_overrides(case=args.case, t_ladder=args.t_ladder, replications=args.reps,
                             seed=args.seed, out=args.out, threads=args.threads)
    # round-trip so overridden fields get the same normalization as file keys
    return ExperimentConfig.from_dict(cfg.to_dict())


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    from htl.pipeline import run

    cfg = resolve_config(args).validate()
    started = time.perf_counter()
    report = run(cfg)
    for name, g in report["gates"].items():
        print(f"{name:16s} {'PASS' if g['passed'] else 'FAIL'}  value={g['value']:.6g} "
              f"threshold={g['threshold']:.6g}")
    print(f"wrote {cfg.out} in {time.perf_counter() - started:.1f}s")
    return EXIT_OK if report["passed"] else EXIT_GATES_FAILED


def cmd_limits(args) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        dist, counting = cfg.dist_model, cfg.counting_model
        case = args.case or cfg.case
        case3b_lt = cfg.case3b_lt
    else:
        if args.case is None:
            raise ConfigError("--case is required")
        d, c = _model_dicts(args)
        dist, counting = ParetoTypeModel.from_dict(d), CountingProcessModel.from_dict(c)
        case = args.case
        case3b_lt = args.case3b_lt
    if case not in LT_CASES:
        raise ConfigError(f"case {case} has no Laplace transform; choose one of {LT_CASES}")
    spec = LimitLawSpec.from_models(dist, counting.mixing, case, case3b_lt)
    r_vals = DEFAULT_R_GRID if args.r is None else args.r
    s_vals = DEFAULT_S_GRID if args.s is None else args.s
    if args.grid != "default" and (args.r is None and args.s is None):
        raise ConfigError("--grid accepts only 'default'; use --r/--s for custom grids")
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["case_id", "r", "s", "lt_theoretical"])
        for r, s in make_grid(r_vals, s_vals):
            w.writerow([case, repr(r), repr(s), repr(float(lt_limit(spec, r, s)))])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_normalizers(args) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        dist = cfg.dist_model
        case = args.case or cfg.case
        ladder = args.t_ladder or cfg.t_ladder
    else:
        if args.case is None:
            raise ConfigError("--case is required")
        dist = ParetoTypeModel.from_dict(_model_dicts(args)[0])
        case = args.case
        ladder = args.t_ladder or [1e2, 1e3, 1e4]
    w = csv.writer(sys.stdout, lineterminator="\n")
    fields = ["t", "a_t", "a_prime_t", "c_t", "ell_star_t", "b_t", "max_residual"]
    w.writerow(["case_id"] + fields)
    for t in ladder:
        table = normalizer_table(dist, t, case)
        row = table.to_dict()
        row["max_residual"] = max(residuals(dist, table).values())
        w.writerow([case] + ["" if row[f] is None else repr(float(row[f])) for f in fields])
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else seed_from_env(DEFAULT_SEED)
    threads = args.threads or 1
    out = Path(args.out or "htl_verify")
    if args.preset is not None:
        from htl.pipeline import run

        cfg = preset(args.preset, seed=seed, replications=args.reps, threads=threads,
                     out=str(out))
        if args.case is not None and args.case != cfg.case:
            raise ConfigError(f"preset {args.preset} runs case {cfg.case}, not {args.case}")
        if args.t_ladder:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "t_ladder": args.t_ladder})
        report = run(cfg)
        for name, g in report["gates"].items():
            print(f"{name:16s} {'PASS' if g['passed'] else 'FAIL'}  value={g['value']:.6g} "
                  f"threshold={g['threshold']:.6g}")
        return EXIT_OK if report["passed"] else EXIT_GATES_FAILED
    if args.all:
        names = list(CRITERIA)
    elif args.criterion:
        names = args.criterion
    elif args.case is not None:
        names = [n for n, presets in _CASE_CRITERIA.items() if args.case in presets]
        if not names:
            raise ConfigError(f"no acceptance criterion exercises case {args.case}")
    else:
        raise ConfigError("verify needs --all, --criterion, --case or --preset")
    results = run_criteria(names, seed=seed, reps=args.reps, threads=threads, out=out, echo=print)
    return EXIT_OK if all(r.passed for r in results) else EXIT_GATES_FAILED


_CASE_CRITERIA = {"A4": ("1",), "A5": ("4b",), "A6": ("6",), "A7": ("5",)}


def cmd_report(args) -> int:
    root = Path(args.out or "htl_out")
    files = sorted(root.rglob("summary.json")) + sorted(root.rglob("acceptance.json"))
    if not files:
        print(f"no reports under {root}", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    for path in files:
        data = json.loads(path.read_text())
        rel = path.relative_to(root)
        if path.name == "summary.json":
            print(f"{rel}: case {data['case']}  {'PASS' if data['passed'] else 'FAIL'}")
            for name, g in data["gates"].items():
                print(f"  {name:16s} {'PASS' if g['passed'] else 'FAIL'}  value={g['value']:.6g}")
        else:
            print(f"{rel}: acceptance  {'PASS' if data['passed'] else 'FAIL'}")
            for r in data["results"]:
                print(f"  {r['name']} {'PASS' if r['passed'] else 'FAIL'}  {r['title']}")
        ok = ok and data["passed"]
    return EXIT_OK if ok else EXIT_GATES_FAILED


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"htl {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configured case")
    _add_run_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limits", help="tabulate a limiting Laplace transform")
    p.add_argument("--config", type=Path)
    p.add_argument("--case")
    p.add_argument("--grid", default="default")
    p.add_argument("--r", type=_floats)
    p.add_argument("--s", type=_floats)
    p.add_argument("--case3b-lt", choices=("corrected", "s_free"), default="corrected")
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_model_flags(p)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("normalizers", help="tabulate normalizing sequences")
    p.add_argument("--config", type=Path)
    p.add_argument("--case")
    p.add_argument("--t-ladder", type=_floats)
    _add_model_flags(p)
    p.set_defaults(func=cmd_normalizers)

    p = sub.add_parser("verify", help="run acceptance criteria or a preset")
    p.add_argument("--all", action="store_true")
    p.add_argument("--criterion", nargs="+", choices=list(CRITERIA))
    p.add_argument("--case")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--t-ladder", type=_floats)
    p.add_argument("--reps", type=int, help="override every Monte Carlo size")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="re-summarize existing outputs")
    p.add_argument("--out", help="directory holding summary.json / acceptance.json files")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
