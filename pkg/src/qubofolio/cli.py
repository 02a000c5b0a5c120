"""Command-line entry point: build, solve, quantum, sweep, report.

Exit codes are a stable contract:
  0 success, 2 spec validation error, 3 size-cap violation,
  4 unparseable input, 5 sweep with zero successful rows,
  6 layout mismatch between a solution and its config.
"""
from __future__ import annotations

import argparse
import json
import sys

from .evaluation import DEFAULT_Q_GRID, SOLVERS, economic_metrics, sweep_q
from .market_data import MarketDataError
from .model import ModelError, ProblemSpec, spec_from_json
from .qubo import (
    IsingModel,
    QuboError,
    QuboParseError,
    SparseQubo,
    build_bqp,
    build_qubo,
    energy,
    objective_breakdown,
    read_qubo_text,
    to_ising,
    to_sparse,
    write_ising_text,
    write_qubo_text,
)
from .quantum import (
    AnnealSchedule,
    QaoaParams,
    normalize_ising,
    QuantumSimError,
    anneal_run,
    qaoa_optimize,
    qaoa_run,
    vqe_run,
)
from .solvers import EXACT_CAP, SolveBudget, SolveReport
from .toy import toy_spec

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_CAP = 3
EXIT_PARSE = 4
EXIT_SWEEP = 5
EXIT_MISMATCH = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_spec(args) -> ProblemSpec:
    if getattr(args, "toy", False):
        return toy_spec(n=args.toy_n, T=args.toy_t, q=args.toy_q, seed=args.seed)
    if not args.config:
        raise CliError(EXIT_SPEC, "either --config or --toy is required")
    try:
        return spec_from_json(args.config)
    except FileNotFoundError as exc:
        raise CliError(EXIT_PARSE, str(exc))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{args.config}: invalid JSON: {exc}")
    except (ModelError, MarketDataError) as exc:
        raise CliError(EXIT_SPEC, str(exc))


def _add_toy_flags(parser):
    parser.add_argument("--toy", action="store_true",
                        help="generate a small built-in portfolio instead of reading --config")
    parser.add_argument("--toy-n", type=int, default=2, help="toy asset count (<= 3)")
    parser.add_argument("--toy-t", type=int, default=2, help="toy horizon (<= 2)")
    parser.add_argument("--toy-q", type=float, default=1e-5, help="toy risk-aversion weight")


def _bqp_json(spec: ProblemSpec) -> dict:
    bqp = build_bqp(spec)
    obj = bqp.objective

    def row_doc(kind, step, row):
        idx, coef, rhs = row
        return {"kind": kind, "step": step,
                "indices": [int(i) for i in idx],
                "coeffs": [float(c) for c in coef],
                "rhs": int(rhs)}

    constraints = []
    for t, row in enumerate(bqp.asset_rows, start=1):
        constraints.append(row_doc("asset", t, row))
    for t, row in enumerate(bqp.cash_rows, start=1):
        constraints.append(row_doc("cash", t, row))
    return {
        "objective": {
            "num_vars": obj.num_vars,
            "offset": obj.offset,
            "terms": [[int(i), int(j), float(v)]
                      for i, j, v in zip(obj.rows, obj.cols, obj.vals)],
        },
        "constraints": constraints,
    }


def cmd_build(args) -> int:
    spec = _load_spec(args)
    qubo = build_qubo(spec)
    sparse = to_sparse(qubo)
    write_qubo_text(sparse, args.out)
    print(f"wrote {args.out}: {sparse.num_vars} variables, {sparse.num_terms} terms")
    if args.ising:
        path = args.out + ".ising"
        write_ising_text(to_ising(sparse), path)
        print(f"wrote {path}")
    if args.bqp:
        path = args.out + ".bqp.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_bqp_json(spec), fh)
            fh.write("\n")
        print(f"wrote {path}")
    return EXIT_OK


def _load_problem(args):
    """Instance for solve/quantum: a parsed QUBO file or a built spec."""
    if getattr(args, "qubo", None):
        try:
            return read_qubo_text(args.qubo)
        except QuboParseError as exc:
            raise CliError(EXIT_PARSE, str(exc))
    spec = _load_spec(args)
    return build_qubo(spec)


def cmd_solve(args) -> int:
    problem = _load_problem(args)
    if isinstance(problem, IsingModel):
        raise CliError(EXIT_PARSE, "solve expects a QUBO file, got an Ising export")
    if args.solver == "exact" and problem.num_vars > EXACT_CAP:
        raise CliError(EXIT_CAP, f"exact solver caps at {EXACT_CAP} variables, "
                                 f"instance has {problem.num_vars}")
    budget = SolveBudget(time_limit=args.time_limit, seed=args.seed,
                         workers=args.workers, max_iterations=args.max_iterations)
    try:
        report = SOLVERS[args.solver](problem, budget)
    except QuboError as exc:
        raise CliError(EXIT_CAP, str(exc))
    report.save(args.out)
    print(f"{args.solver}: best energy {report.best_energy!r} "
          f"(lower bound {report.lower_bound!r}), wrote {args.out}")
    return EXIT_OK


def cmd_quantum(args) -> int:
    problem = _load_problem(args)
    if isinstance(problem, IsingModel):
        ising = problem
    else:
        ising = to_ising(problem)
    # currency-scale coefficients would swamp the unit-strength driver
    ising, scale = normalize_ising(ising)
    try:
        if args.algo == "qaoa":
            if args.layers == 0:
                doc = qaoa_run(ising, QaoaParams((), ()), shots=args.shots, seed=args.seed)
            else:
                params, _ = qaoa_optimize(ising, layers=args.layers, seed=args.seed)
                doc = qaoa_run(ising, params, shots=args.shots, seed=args.seed)
        elif args.algo == "vqe":
            doc = vqe_run(ising, layers=max(args.layers, 1), seed=args.seed)
        else:
            schedule = AnnealSchedule(total_time=args.tau, dt=args.dt)
            doc = anneal_run(ising, schedule, shots=args.shots, seed=args.seed)
    except QuantumSimError as exc:
        raise CliError(EXIT_CAP, str(exc))
    doc["ground_energy"] *= scale
    doc["expectation"] *= scale
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"{args.algo}: expectation {doc['expectation']!r}, "
          f"ground probability {doc['ground_probability']!r}, wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _load_spec(args)
    if args.q:
        try:
            q_list = [float(tok) for tok in args.q.split(",") if tok.strip()]
        except ValueError as exc:
            raise CliError(EXIT_PARSE, f"bad --q list: {exc}")
    else:
        q_list = list(DEFAULT_Q_GRID)
    budget = SolveBudget(time_limit=args.time_limit, seed=args.seed, workers=args.workers)
    table = sweep_q(spec, q_list, args.solver, budget)
    table.write_csv(args.out)
    failed = [row for row in table.rows if row.failed]
    for row in failed:
        print(f"q={row.q}: failed: {row.error}", file=sys.stderr)
    print(f"wrote {args.out}: {table.succeeded}/{len(table.rows)} rows succeeded")
    if table.succeeded == 0:
        raise CliError(EXIT_SWEEP, "all sweep rows failed")
    return EXIT_OK


def cmd_report(args) -> int:
    spec = _load_spec(args)
    try:
        with open(args.solution, encoding="utf-8") as fh:
            report = SolveReport.from_json(json.load(fh))
    except FileNotFoundError as exc:
        raise CliError(EXIT_PARSE, str(exc))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{args.solution}: {exc}")
    bits = report.best
    if bits.shape[0] != spec.layout.total:
        raise CliError(EXIT_MISMATCH,
                       f"solution has {bits.shape[0]} bits but the config layout "
                       f"expects {spec.layout.total}")
    breakdown = objective_breakdown(spec, bits)
    metrics = economic_metrics(spec, bits)
    width = max(len(k) for k in breakdown)
    print("objective breakdown:")
    for key, value in breakdown.items():
        print(f"  {key:<{width}}  {value: .6f}")
    print(f"  {'total':<{width}}  {sum(breakdown.values()): .6f}")
    print(f"feasible: {metrics.feasible}")
    sharpe = metrics.sharpe_annualized
    print(f"net profit: {metrics.net_profit:.6f}  "
          f"sharpe: {'no-risk' if sharpe is None else f'{sharpe:.4f}'}")
    if args.out:
        doc = metrics.to_json()
        doc["objective_breakdown"] = breakdown
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubofolio",
        description="Multi-period portfolio optimization compiled to QUBO/BQP/Ising",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="compile a problem spec to QUBO text")
    p_build.add_argument("--config", help="ProblemSpec JSON path")
    p_build.add_argument("--out", required=True, help="output QUBO text path")
    p_build.add_argument("--ising", action="store_true", help="also write the Ising export")
    p_build.add_argument("--bqp", action="store_true", help="also write the BQP JSON export")
    p_build.add_argument("--seed", type=int, default=0)
    _add_toy_flags(p_build)
    p_build.set_defaults(func=cmd_build)

    p_solve = sub.add_parser("solve", help="run a classical solver")
    p_solve.add_argument("--qubo", help="QUBO text file")
    p_solve.add_argument("--config", help="ProblemSpec JSON (built on the fly)")
    p_solve.add_argument("--solver", choices=sorted(SOLVERS), default="abs")
    p_solve.add_argument("--time-limit", type=float, default=60.0)
    p_solve.add_argument("--max-iterations", type=int, default=None)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--workers", type=int, default=1)
    p_solve.add_argument("--out", required=True, help="SolveReport JSON path")
    _add_toy_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_quantum = sub.add_parser("quantum", help="run the statevector simulator")
    p_quantum.add_argument("--qubo", help="QUBO or Ising text file")
    p_quantum.add_argument("--config", help="ProblemSpec JSON (built on the fly)")
    p_quantum.add_argument("--algo", choices=["qaoa", "vqe", "anneal"], required=True)
    p_quantum.add_argument("--layers", type=int, default=2, help="qaoa/vqe circuit depth")
    p_quantum.add_argument("--tau", type=float, default=50.0, help="anneal total time")
    p_quantum.add_argument("--dt", type=float, default=0.01, help="anneal Trotter step")
    p_quantum.add_argument("--shots", type=int, default=1024)
    p_quantum.add_argument("--seed", type=int, default=0)
    p_quantum.add_argument("--out", required=True, help="run output JSON path")
    _add_toy_flags(p_quantum)
    p_quantum.set_defaults(func=cmd_quantum)

    p_sweep = sub.add_parser("sweep", help="Pareto sweep over risk-aversion values")
    p_sweep.add_argument("--config", help="ProblemSpec JSON path")
    p_sweep.add_argument("--q", help="comma-separated q values (default: the standard grid)")
    p_sweep.add_argument("--solver", choices=sorted(SOLVERS), default="exact")
    p_sweep.add_argument("--time-limit", type=float, default=60.0)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", required=True, help="Pareto CSV path")
    _add_toy_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="economic metrics for a solved run")
    p_report.add_argument("--solution", required=True, help="SolveReport JSON path")
    p_report.add_argument("--config", help="ProblemSpec JSON path")
    p_report.add_argument("--seed", type=int, default=0)
    p_report.add_argument("--out", help="metrics JSON path")
    _add_toy_flags(p_report)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError, MarketDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except QuboParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (QuboError, QuantumSimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
