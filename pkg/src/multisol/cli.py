"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 no solutions, 4 validation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .geometry import EllipseDomain
from .galerkin import DiscreteProblem
from .problems import get_problem
from .runner import (
    ConfigError,
    export_energy_curves,
    export_field,
    load_bundle,
    load_config,
    load_paths,
    run,
    sweep_bundle,
    validate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NO_SOLUTIONS, EXIT_INVALID = 0, 2, 3, 4

# CLI flag -> RunConfig attribute
_OVERRIDES = {
    "problem": "problem",
    "lam": "lam",
    "delta": "delta",
    "bc": "bc",
    "a": "a",
    "b": "b",
    "M": "M",
    "N": "N",
    "max_iter": "max_iter",
    "max_basis": "max_basis",
    "starts": "starts_per_round",
    "b_end": "b_end",
    "steps": "sweep_steps",
    "output": "output",
    "seed": "seed",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p):
    p.add_argument("--config", help="ini file with run settings")
    p.add_argument("--problem", choices=["sine-gordon", "henon", "ginzburg-landau"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--bc", choices=["dirichlet", "neumann"])
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--max-basis", dest="max_basis", type=int)
    p.add_argument("--starts", type=int, help="enrichment starts per round")
    p.add_argument("--b-end", dest="b_end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--output", "-o")


def build_parser():
    parser = _Parser(prog="multisol", description="Multiple solutions of semilinear problems on elliptical disks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="compute solutions and write a bundle")
    _add_run_flags(p)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("sweep", help="continue the records of a bundle in b")
    p.add_argument("bundle")
    p.add_argument("--b-end", dest="b_end", type=float, required=True)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--reference", type=int, help="record id used for J/J_ref")

    p = sub.add_parser("export", help="write field samples or energy curves")
    p.add_argument("bundle")
    p.add_argument("--record", type=int, help="record id for a field export")
    p.add_argument("--energy", action="store_true", help="export the energy table of a swept bundle")
    p.add_argument("--nr", type=int, default=21)
    p.add_argument("--ntheta", type=int, default=64)
    p.add_argument("--reference", type=int, help="record id used for J/J_ref")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eigs", help="eigenvalues of the linear operator")
    p.add_argument("--bc", choices=["dirichlet", "neumann"], default="dirichlet")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--M", type=int, default=20)
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--count", type=int, default=6)

    p = sub.add_parser("validate", help="recompute residuals of a bundle")
    p.add_argument("bundle")
    return parser


def _cmd_run(args):
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read {args.config}: {err}") from None
    overrides = {attr: getattr(args, flag, None) for flag, attr in _OVERRIDES.items()}
    cfg = load_config(text, **overrides)
    bundle = run(cfg)
    print(f"{len(bundle.records)} record(s) written to {bundle.directory}")
    for i, rec in enumerate(bundle.records):
        print(f"  rec_{i:03d}  J = {rec.J: .10g}  |F|_inf = {rec.residual_inf:.2e}")
    return EXIT_OK if bundle.records else EXIT_NO_SOLUTIONS


def _cmd_sweep(args):
    paths = sweep_bundle(args.bundle, args.b_end, args.steps, args.reference)
    for p in paths:
        flag = " (truncated)" if p.truncated else ""
        print(f"record {p.record_id}: b {p.b[0]:.3f} -> {p.b[-1]:.3f}, J {p.J[0]:.6g} -> {p.J[-1]:.6g}{flag}")
    return EXIT_OK


def _cmd_export(args):
    if args.energy:
        paths = load_paths(args.bundle)
        if not paths:
            raise ConfigError("bundle has no continuation section; run `sweep` first")
        export_energy_curves(paths, args.out, args.reference)
        print(f"energy table written to {args.out}")
        return EXIT_OK
    if args.record is None:
        raise ConfigError("export needs --record or --energy")
    bundle = load_bundle(args.bundle)
    if not 0 <= args.record < len(bundle.records):
        raise ConfigError(f"record {args.record} not in bundle ({len(bundle.records)} records)")
    cfg = bundle.config
    export_field(cfg.discrete_problem(), bundle.records[args.record], args.out, args.nr, args.ntheta, cfg.digest())
    print(f"field written to {args.out}")
    return EXIT_OK


def _cmd_eigs(args):
    if args.M < 1 or args.N < 2 or not 0 < args.b <= args.a:
        raise ConfigError("need M >= 1, N >= 2 and 0 < b <= a")
    problem = get_problem("sine-gordon", bc=args.bc)
    dp = DiscreteProblem(EllipseDomain(args.a, args.b), problem, args.M, args.N)
    vals = dp.eigenvalues(args.count)
    for k, v in enumerate(vals, 1):
        print(f"{k:3d}  {v:.12f}")
    return EXIT_OK


def _cmd_validate(args):
    report = validate(args.bundle)
    for i, stored, now in report.failures:
        print(f"rec_{i:03d}: stored |F|_inf {stored:.3e}, recomputed {now:.3e}")
    print(f"{report.checked} record(s) checked, {len(report.failures)} failed")
    return EXIT_OK if report.ok else EXIT_INVALID


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "export": _cmd_export,
    "eigs": _cmd_eigs,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(over="ignore", invalid="ignore")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as err:
        if args.command == "validate":
            print(f"validation failed: {err}", file=sys.stderr)
            return EXIT_INVALID
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
