"""Command-line entry point: ``b92sim run | threshold | curves``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._validation import DomainError
from .config import PRESETS, ConfigError, load_config, parse_number, preset
from .feedback import control_function, control_slope_at_zero
from .harness import run_scenario
from .security import (BOUNDS, REFERENCE_OPTIMIZED_THRESHOLD_RAD, NoPositiveGainError,
                       gain_threshold)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
FIG2_THETAS = ("5*pi/18", "pi/3", "4*pi/9")


def _number(text):
    try:
        return parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(prog="b92sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a feedback scenario")
    run.add_argument("--config", type=Path, help="scenario file (INI key = value)")
    run.add_argument("--preset", choices=sorted(PRESETS), help="base scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--replicas", type=int)
    run.add_argument("--duration", type=_number, help="seconds of transmission")
    run.add_argument("--jobs", type=int, help="parallel worker processes")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--events-csv", action="store_true", help="also write decimated events")

    thr = sub.add_parser("threshold", help="largest misalignment with positive secure gain")
    thr.add_argument("--theta", type=_number, default=math.pi / 3)
    thr.add_argument("--bound", choices=sorted(BOUNDS), default="naive")
    thr.add_argument("--eta", type=_number, default=1.0)

    cur = sub.add_parser("curves", help="tabulate control functions R_k(theta, eps)")
    cur.add_argument("--theta", type=_number, action="append",
                     help="repeatable; defaults to 5pi/18, pi/3, 4pi/9")
    cur.add_argument("--points", type=int, default=721)
    cur.add_argument("--out", type=Path, help="CSV path (default stdout)")
    return parser


def _resolve_config(args):
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    base = preset(args.preset) if args.preset else None
    cfg = load_config(text, base=base)
    overrides = {k: v for k, v in (("seed", args.seed), ("replicas", args.replicas),
                                   ("duration", args.duration), ("jobs", args.jobs))
                 if v is not None}
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.events_csv:
        overrides["events_csv"] = True
    try:
        return dataclasses.replace(cfg, **overrides)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def cmd_run(args):
    cfg = _resolve_config(args)
    summary, _ = run_scenario(cfg)
    report = {**summary.to_dict(), "seed": cfg.seed, "preset": cfg.preset}
    del report["replicas"]
    print(json.dumps(report, indent=2))
    if cfg.out:
        print(f"outputs written to {cfg.out}", file=sys.stderr)
    return EXIT_OK


def cmd_threshold(args):
    doc = {"theta_rad": args.theta, "bound": args.bound,
           "reference_optimized_threshold_rad": REFERENCE_OPTIMIZED_THRESHOLD_RAD}
    try:
        doc["threshold_rad"] = gain_threshold(args.theta, args.bound, eta=args.eta)
    except NoPositiveGainError as exc:
        doc["threshold_rad"] = None
        doc["reason"] = str(exc)
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_curves(args):
    thetas = args.theta or [parse_number(t) for t in FIG2_THETAS]
    eps = np.linspace(-math.pi, math.pi, args.points)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_rad", "k", "eps_rad", "R", "tangent"])
        for theta in thetas:
            setpoint = control_function(0, theta, 0.0)
            slope = control_slope_at_zero(theta)
            for k in (0, 1):
                r = control_function(k, theta, eps)
                tangent = setpoint + (slope if k == 0 else -slope) * eps
                for e, rv, tv in zip(eps, r, tangent):
                    w.writerow([repr(theta), k, repr(float(e)), repr(float(rv)), repr(float(tv))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {"run": cmd_run, "threshold": cmd_threshold, "curves": cmd_curves}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
