"""Command-line entry point.

Subcommands:
  run        execute an experiment matrix and write a RunRecord CSV
  oracle     compute and cache exact reference solutions (JSON fixtures)
  summarize  turn a RunRecord CSV into per-cell summary statistics
  dist-test  statistical validation of the integer mutation distribution
  bench      compare the compiled kernel backend against the pure-Python one

A JSON config file passed via --config overrides the grid flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, intdist
from ._kernels import BACKEND
from .quadforms import TEST_CASES


def _csv_list(conv):
    def parse(text: str):
        return tuple(conv(part) for part in text.split(",") if part)
    return parse


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--test-case", type=_csv_list(str), default=("TC0", "TC1", "TC2", "TC3"),
                        metavar="TC0,TC1,...", help=f"test cases from {TEST_CASES}")
    parser.add_argument("--dim", type=_csv_list(int), default=(8,), metavar="8,16")
    parser.add_argument("--cond", type=_csv_list(float), default=(10.0, 1e3, 1e6),
                        metavar="10,1000", help="condition numbers")
    parser.add_argument("--level", type=_csv_list(float), default=(10.0, 50.0),
                        metavar="10,50", help="constraint levels")
    parser.add_argument("--all-integer", action="store_true",
                        help="all-integer variant (n_r = 0)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miqes",
        description="Mixed-integer evolution strategies on quadratically "
                    "constrained quadratic programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment matrix")
    _add_grid_flags(run_p)
    run_p.add_argument("--solver", type=_csv_list(str), default=("mies", "cma_ih"))
    run_p.add_argument("--seeds", type=int, default=5, help="seeds per cell")
    run_p.add_argument("--budget", type=int, default=20_000)
    run_p.add_argument("--jobs", type=int, default=1, help="worker processes")
    run_p.add_argument("--trace", action="store_true", help="write per-run traces")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--config", help="JSON config file; overrides the flags")
    run_p.add_argument("--fixtures", help="oracle fixtures for an immediate summary")

    oracle_p = sub.add_parser("oracle", help="compute and cache oracle references")
    _add_grid_flags(oracle_p)
    oracle_p.add_argument("--fixtures", default="oracle_fixtures.json")
    oracle_p.add_argument("--max-nodes", type=int, default=5_000_000)

    sum_p = sub.add_parser("summarize", help="summarize a RunRecord CSV")
    sum_p.add_argument("--records", required=True)
    sum_p.add_argument("--fixtures", help="oracle fixtures JSON")
    sum_p.add_argument("--out", required=True)

    dist_p = sub.add_parser("dist-test", help="integer mutation distribution tests")
    dist_p.add_argument("--p", type=_csv_list(float), default=(0.1, 0.3, 0.5, 0.9))
    dist_p.add_argument("--samples", type=int, default=1_000_000)
    dist_p.add_argument("--seed", type=int, default=7)

    bench_p = sub.add_parser("bench", help="kernel backend benchmark")
    bench_p.add_argument("--dim", type=int, default=8)
    bench_p.add_argument("--lam", type=int, default=100)
    bench_p.add_argument("--repeats", type=int, default=200)
    bench_p.add_argument("--budget", type=int, default=20_000)
    return parser


def _cmd_run(args) -> int:
    config_dict = {
        "test_cases": args.test_case,
        "dims": args.dim,
        "conditions": args.cond,
        "levels": args.level,
        "solvers": args.solver,
        "seeds": args.seeds,
        "budget": args.budget,
        "all_integer": args.all_integer,
        "trace": args.trace,
        "jobs": args.jobs,
    }
    if args.config:
        with open(args.config) as fh:
            config_dict.update(json.load(fh))
    config = harness.MatrixConfig.from_dict(config_dict)
    records = harness.run_matrix(config)
    os.makedirs(args.out, exist_ok=True)
    records_path = os.path.join(args.out, "records.csv")
    harness.write_records_csv(records, records_path)
    print(f"wrote {len(records)} records to {records_path} (kernel backend: {BACKEND})")
    if config.trace:
        trace_dir = os.path.join(args.out, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        for record in records:
            harness.write_trace_csv(
                record, os.path.join(trace_dir, harness.trace_filename(record)))
        print(f"wrote traces to {trace_dir}")
    if args.fixtures:
        fixtures = harness.load_fixtures(args.fixtures)
        rows = harness.summarize(records, fixtures)
        summary_path = os.path.join(args.out, "summary.csv")
        harness.write_summary_csv(rows, summary_path)
        print(f"wrote summary to {summary_path}")
    return 0


def _cmd_oracle(args) -> int:
    fixtures = harness.load_fixtures(args.fixtures)
    instances = []
    for test_case in args.test_case:
        for dim in args.dim:
            for cond in args.cond:
                for level in args.level:
                    instances.append(harness.build_instance(
                        test_case, dim, cond, level, args.all_integer))
    fixtures, failed = harness.ensure_references(instances, fixtures,
                                                 max_nodes=args.max_nodes)
    harness.save_fixtures(fixtures, args.fixtures)
    for instance in instances:
        key = instance.key()
        if key in fixtures:
            print(f"{key}: f* = {fixtures[key]['f_star']:.12g} "
                  f"({fixtures[key]['status']}, {fixtures[key]['nodes_enumerated']} nodes)")
    for failure in failed:
        print(f"UNAVAILABLE {failure}", file=sys.stderr)
    print(f"fixtures saved to {args.fixtures} ({len(fixtures)} entries)")
    return 0 if not failed else 1


def _cmd_summarize(args) -> int:
    records = harness.read_records_csv(args.records)
    fixtures = harness.load_fixtures(args.fixtures) if args.fixtures else {}
    rows = harness.summarize(records, fixtures)
    harness.write_summary_csv(rows, args.out)
    print(f"wrote {len(rows)} summary rows to {args.out}")
    return 0


def _cmd_dist_test(args) -> int:
    rng = np.random.default_rng(args.seed)
    print(f"double-geometric distribution test, {args.samples} samples per p")
    print(f"{'p':>6} {'chi2':>12} {'p-value':>10} {'mean|z|':>10} {'expected':>10} {'rel.err':>8}")
    failures = 0
    for p in args.p:
        samples = intdist.sample_double_geometric_many(p, args.samples, rng)
        stat, p_value, _ = intdist.chi_square_fit(samples, p)
        mean_abs = float(np.mean(np.abs(samples)))
        expected = intdist.mean_step_from_p(p, 1)
        rel_err = abs(mean_abs - expected) / expected if expected > 0 else 0.0
        ok = p_value > 0.001 and rel_err < 0.02
        failures += 0 if ok else 1
        print(f"{p:>6.2f} {stat:>12.2f} {p_value:>10.4f} {mean_abs:>10.4f} "
              f"{expected:>10.4f} {rel_err:>8.2%} {'' if ok else ' FAIL'}")
    return 0 if failures == 0 else 1


def _cmd_bench(args) -> int:
    from .bench import run_benchmark
    for line in run_benchmark(args.dim, args.lam, args.repeats, args.budget):
        print(line)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "oracle": _cmd_oracle,
        "summarize": _cmd_summarize,
        "dist-test": _cmd_dist_test,
        "bench": _cmd_bench,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
