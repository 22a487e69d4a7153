"""Command line entry point.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 oracle check failed.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import ConfigError, NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ORACLE = 3


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (overrides config)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory (overrides config)")
    p.add_argument("--tol-rank", type=float, default=argparse.SUPPRESS, help="relative rank tolerance")
    p.add_argument("--tol-kernel", type=float, default=argparse.SUPPRESS, help="kernel eigenvalue threshold")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress console report")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="qfilterlab", parents=[common],
                                     description="Observability and stability checks for quantum filters.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("check-observability", "rank test for the observable space"),
        ("check-abscont", "kernel containment of the initial states"),
        ("simulate", "simulate filter pairs and write per-path CSV"),
        ("charfn", "exact vs Monte Carlo characteristic functions"),
        ("stability", "Monte Carlo filter stability curves"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("config", help="JSON experiment config")
    return parser


def _load(args):
    cfg = harness.load_config(args.config)
    changes = {}
    if "seed" in args:
        changes["master_seed"] = args.seed
    if "out" in args:
        changes["out_dir"] = Path(args.out)
    if "tol_rank" in args:
        changes["tol_rank"] = args.tol_rank
    if "tol_kernel" in args:
        changes["tol_kernel"] = args.tol_kernel
    return replace(cfg, **changes) if changes else cfg


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run(args):
    cfg = _load(args)
    say = (lambda *a: None) if getattr(args, "quiet", False) else print
    out = cfg.out_dir

    if args.command == "check-observability":
        rep = harness.run_observability_report(cfg.model, cfg.observables, cfg.tol_rank)
        say(harness.format_observability_report(rep))
        if out:
            _write_json(out / "observability.json", rep)
        return EXIT_OK

    if args.command == "check-abscont":
        rep = harness.run_abscont_report(cfg.rho_true, cfg.rho_filter, cfg.tol_kernel)
        say(harness.format_abscont_report(rep))
        if out:
            _write_json(out / "abscont.json", rep)
        return EXIT_OK

    if args.command == "simulate":
        summary = harness.write_simulation_csv(cfg, out or Path("."))
        say(f"simulated {cfg.n_paths} paths; clip events {summary['clip_events']}, "
            f"aborts {summary['aborts']}")
        return EXIT_OK

    if args.command == "charfn":
        rows = harness.run_charfn_check(cfg)
        for r in rows:
            say(f"grid {r.grid_id}: exact {r.exact:.6f}  mc {r.mc:.6f} +- {r.stderr:.2e}  z={r.zscore:.2f}")
        if out:
            harness.write_charfn_csv(out / "charfn.csv", rows)
        return EXIT_OK if harness.charfn_passed(rows) else EXIT_ORACLE

    if args.command == "stability":
        rep = harness.run_stability(cfg)
        md = rep.metadata
        say(f"observable: {md['observable']} (dim {md['observable_space_dim']}), "
            f"absolutely continuous: {md['absolutely_continuous']}")
        for name, v in rep.mean_abs_diff.items():
            say(f"  {name}: mean |diff| {v[0]:.4g} at t=0 -> {v[-1]:.4g} at t={rep.times[-1]:g}")
        say(f"  trace distance {rep.trace_distance[0]:.4g} -> {rep.trace_distance[-1]:.4g}")
        if out:
            rep.write_csv(out / "stability.csv")
            _write_json(out / "stability_meta.json", md)
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
