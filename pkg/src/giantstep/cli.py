"""Command line interface: giantstep run | verify | staircase."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments.config import ConfigError
from .experiments.runner import (EXIT_CONFIG, EXIT_NUMERICAL, NumericalFailure,
                                 run_path, verify_manifest)
from .polynomial import parse_polynomial
from .staircase import is_staircase_learnable, staircase_sequence


def _cmd_run(args) -> int:
    try:
        manifest = run_path(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {manifest}")
    return 0


def _cmd_verify(args) -> int:
    code, lines = verify_manifest(args.manifest)
    for line in lines:
        print(line)
    return code


def _cmd_staircase(args) -> int:
    try:
        poly = parse_polynomial(args.target)
        seq = staircase_sequence(poly, t_max=args.t_max)
        payload = {
            "target": args.target,
            "dims": [s.dim for s in seq],
            "bases": [s.basis.tolist() for s in seq],
            "learnable": is_staircase_learnable(poly, t_max=args.t_max),
        }
    except ValueError as exc:
        print(f"invalid target: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"target: {args.target}")
        for t, sub in enumerate(seq):
            rows = "; ".join("[" + ", ".join(f"{x:+.6f}" for x in b) + "]" for b in sub.basis)
            print(f"  U_{t}: dim {sub.dim}" + (f"  {rows}" if rows else ""))
        print(f"  staircase-learnable: {payload['learnable']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="giantstep",
        description="Giant-step feature-learning experiments on multi-index Gaussian targets")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a TOML config")
    p_run.add_argument("config", help="path to the experiment config file")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="re-check a stored run against its criteria")
    p_verify.add_argument("manifest", help="path to a run-manifest.json")
    p_verify.set_defaults(func=_cmd_verify)

    p_stair = sub.add_parser("staircase", help="print the staircase subspace sequence")
    p_stair.add_argument("--target", required=True,
                         help="polynomial link, e.g. 'z1/3 + 2*z1*z2/3 + z2*z3'")
    p_stair.add_argument("--t-max", type=int, default=8)
    p_stair.add_argument("--json", action="store_true")
    p_stair.set_defaults(func=_cmd_staircase)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
