"""Run an experiment file and print the mean rows as a table.

    python3 scripts/run_sweep.py scripts/specs/pmax_sweep.cfg --jobs 1
"""

import argparse
import sys

from simbf.experiment import ExperimentError, load_spec, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("spec")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--full-scale", action="store_true")
    args = ap.parse_args(argv)
    try:
        spec = load_spec(args.spec, full_scale=args.full_scale)
        res = run_experiment(spec, jobs=args.jobs)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{'solver':<6} {spec.sweep:>6} {'min':>9} {'sum':>9} {'gm':>9} {'std':>9} {'min/max':>8}  ok")
    for r in res.rows:
        if r["kind"] != "mean" or r["min_rate"] is None:
            continue
        print(
            f"{r['solver']:<6} {r['value']:>6} {r['min_rate']:9.4f} {r['sum_rate']:9.4f} {r['gm_rate']:9.4f}"
            f" {r['rate_stddev']:9.2e} {r['min_max_ratio']:8.4f}  {r['status']}"
        )
    print(f"wrote {res.csv_path} and {res.fairness_path}")
    return 2 if res.failures else 0


if __name__ == "__main__":
    sys.exit(main())
