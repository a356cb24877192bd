"""Command-line entry point: ``simbf run | verify | power``.

Exit codes: 0 success, 1 bad experiment file or arguments, 2 when any
solver cell (or oracle check) failed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiment import ExperimentError, PowerModel, load_spec, run_experiment, total_power

EXIT_OK, EXIT_SPEC, EXIT_FAILED = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        spec = load_spec(args.spec, full_scale=args.full_scale)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    if args.trace:
        spec.trace = True
    try:
        result = run_experiment(spec, jobs=args.jobs)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    print(f"{result.ran} cells run, {result.skipped} reused, {result.failures} failed")
    print(f"results: {result.csv_path}")
    print(f"fairness: {result.fairness_path}")
    return EXIT_FAILED if result.failures else EXIT_OK


def _cmd_verify(args) -> int:
    from .oracle import run_checks

    checks = run_checks(args.seed)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}  ({c.seconds:.2f}s)")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def _cmd_power(args) -> int:
    model = PowerModel(args.p_rf, args.p0, args.p_sim)
    try:
        watts = total_power(model, args.p_max, args.m, args.l, args.n)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    print(f"{watts:.4f} W")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simbf", description="SIM downlink beamforming experiments")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment file")
    run.add_argument("--spec", required=True, help="experiment file (key = value)")
    run.add_argument("--trace", action="store_true", help="write JSON-lines solver traces")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--full-scale", action="store_true", help="start from the full-scale defaults, not the desk instance")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="compare closed forms against brute-force references")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=_cmd_verify)

    pw = sub.add_parser("power", help="total power consumption in watts")
    pw.add_argument("--m", type=int, required=True, help="RF chains")
    pw.add_argument("--l", type=int, required=True, help="metasurface layers")
    pw.add_argument("--n", type=int, required=True, help="meta-atoms per layer")
    pw.add_argument("--p-max", type=float, default=20.0, help="transmit power, dBm")
    pw.add_argument("--p-rf", type=float, default=30.0, help="per RF chain, dBm")
    pw.add_argument("--p0", type=float, default=40.0, help="base load, dBm")
    pw.add_argument("--p-sim", type=float, default=10.0, help="per meta-atom, dBm")
    pw.set_defaults(func=_cmd_power)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors count as spec errors
        return EXIT_SPEC if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_SPEC
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
