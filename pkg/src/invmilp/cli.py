"""Command-line entry point: ``invmilp <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data inconsistency, 3 resource or
numeric failure. Documents are JSON; tables are CSV with timing columns
kept separate so they can be masked.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DataInconsistencyError,
    ForwardProblemError,
    InvMilpError,
    NumericError,
    ResourceLimitError,
    UsageError,
)
from .forward import Dataset
from .milp import MilpProblem, check_feasible, solve_milp
from .objective import LearnerConfig
from .pipeline import dump_report, evaluate, result_from_report, run_pipeline


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dataset(path: str) -> Dataset:
    try:
        return Dataset.from_dict(_read_json(path))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path} is not a dataset document: {exc!r}") from exc


# -- commands ------------------------------------------------------------------


def cmd_gen(args) -> int:
    from .scheduling import make_dataset, random_truth

    rng = np.random.default_rng(args.seed)
    truth = random_truth(args.d, rng, args.forced)
    data = make_dataset(args.d, args.n, rng, truth)
    _emit(json.dumps(data.to_dict(), sort_keys=True) + "\n", args.out)
    return 0


def cmd_solve(args) -> int:
    try:
        problem = MilpProblem.from_dict(_read_json(args.problem))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{args.problem} is not a problem document: {exc!r}") from exc
    sol = solve_milp(problem, node_limit=args.node_limit)
    doc = {"status": sol.status.value, "nodes": sol.nodes, "lp_iterations": sol.lp_iterations}
    if sol.is_optimal:
        doc["objective_value"] = sol.objective_value
        doc["point"] = [float(v) for v in sol.point]
        doc["feasible"] = check_feasible(problem, sol.point).feasible
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_learn(args) -> int:
    data = _dataset(args.dataset)
    config = LearnerConfig(max_iters=args.iters, simplex_offset=args.offset, jobs=args.jobs)
    result = run_pipeline(data, config, epsilon=args.epsilon)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            result.trace.write_csv(fh)
    _emit(dump_report(result.report(data, args.trace)), args.out)
    return 0


def cmd_evaluate(args) -> int:
    result = result_from_report(_read_json(args.result))
    test = _dataset(args.test)
    rep = evaluate(result, test)
    doc = {"held_out_evaluation": True, **rep.to_dict()}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_bench(args) -> int:
    import io

    from .scheduling import run_benchmark, summarize_benchmark, write_benchmark_csv, write_summary_csv

    rows = run_benchmark(args.d, args.n, args.trials, args.iters, seed=args.seed, forced=args.forced, jobs=args.jobs)
    table = io.StringIO()
    write_benchmark_csv(rows, table)
    summary = io.StringIO()
    write_summary_csv(summarize_benchmark(rows), summary)
    if args.out:
        out = Path(args.out)
        out.write_text(table.getvalue())
        out.with_name(out.stem + ".summary.csv").write_text(summary.getvalue())
    else:
        sys.stdout.write(table.getvalue())
    sys.stderr.write(summary.getvalue())
    return 0


def cmd_theory(args) -> int:
    from .theory import generalization_curve, theory_constants

    t0 = time.perf_counter()
    c = theory_constants()
    ms = 1e3 * (time.perf_counter() - t0)
    checks = c.checks()
    print(f"dudley_integral {c.dudley.value:.10f} (error <= {c.dudley.error:.1e})")
    print(f"c_4sqrt2 {c.c_4sqrt2.value:.10f} (error <= {c.c_4sqrt2.error:.1e})")
    print(f"c_6 {c.c_6.value:.10f} (error <= {c.c_6.error:.1e})")
    for name, ok in checks.items():
        print(f"{name}: {'ok' if ok else 'FAILED'}")
    print(f"elapsed_ms {ms:.1f}", file=sys.stderr)
    if args.curve:
        table = generalization_curve(args.d, args.ns, args.trials, test_size=args.test_size, seed=args.seed)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                table.write_csv(fh)
        else:
            table.write_csv(sys.stdout)
    if not all(checks.values()):
        raise NumericError("a constant check failed")
    return 0


# -- parser --------------------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="invmilp", description="Inverse optimization for MILPs with learnable thresholds.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp, jobs=False):
        sp.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        sp.add_argument("--out", help="output path (default: stdout)")
        if jobs:
            sp.add_argument("--jobs", type=_positive, default=1, help="parallel forward solves")

    g = sub.add_parser("gen", help="generate scheduling instances and expert decisions")
    g.add_argument("--d", type=int, default=4, help="number of jobs")
    g.add_argument("--n", type=_positive, default=10, help="number of samples")
    g.add_argument("--forced", type=_nonneg, default=0, help="forced precedences in the true thresholds")
    common(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve a MILP problem document")
    s.add_argument("problem")
    s.add_argument("--node-limit", type=_positive, default=200_000)
    common(s)
    s.set_defaults(func=cmd_solve)

    lr = sub.add_parser("learn", help="learn thresholds and weights from a dataset")
    lr.add_argument("dataset")
    lr.add_argument("--iters", type=_positive, default=2000, help="iteration cap")
    lr.add_argument("--epsilon", type=float, default=0.0, help="target training loss")
    lr.add_argument("--offset", type=float, default=1e-3, help="weight simplex offset")
    lr.add_argument("--trace", help="write the loss trace CSV here")
    common(lr, jobs=True)
    lr.set_defaults(func=cmd_learn)

    e = sub.add_parser("evaluate", help="evaluate a run report on a held-out dataset")
    e.add_argument("result")
    e.add_argument("test")
    common(e)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="timing benchmark on random scheduling data")
    b.add_argument("--d", type=int, nargs="+", default=[4], help="job counts")
    b.add_argument("--n", type=_positive, default=10)
    b.add_argument("--trials", type=_nonneg, default=10)
    b.add_argument("--iters", type=_positive, default=2000)
    b.add_argument("--forced", type=_nonneg, default=0)
    common(b, jobs=True)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("theory-check", help="numeric constants, optionally the generalization curve")
    t.add_argument("--curve", action="store_true", help="also run the generalization curve")
    t.add_argument("--d", type=int, default=4)
    t.add_argument("--ns", type=_positive, nargs="+", default=[1, 2, 5, 10, 20])
    t.add_argument("--trials", type=_positive, default=20)
    t.add_argument("--test-size", type=_positive, default=200)
    common(t)
    t.set_defaults(func=cmd_theory)
    return p


EXIT_USAGE, EXIT_DATA, EXIT_RESOURCE = 1, 2, 3


def exit_code(exc: InvMilpError) -> int:
    if isinstance(exc, (DataInconsistencyError, ForwardProblemError)):
        return EXIT_DATA
    if isinstance(exc, (ResourceLimitError, NumericError)):
        return EXIT_RESOURCE
    return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InvMilpError as exc:
        print(f"invmilp: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
