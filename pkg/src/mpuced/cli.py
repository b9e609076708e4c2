"""Command line: solve, oracle, rank, budget, plot.

Exit codes: 0 success, 1 input error, 2 infeasible model (``solve``) or
oracle mismatch (``oracle``).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bnb import solve_mpmilp
from .case import CaseError, bundled_case_path, load_case
from .oracle import MAX_BINARIES, OracleRefused, compare
from .planner import PlannerError, allocate_budget, rank_lines
from .report import build_report, dumps, emit_plot, load_report, plan_dict
from .standard_form import assemble_standard_form

ORACLE_TOL = 1e-6


class InputError(Exception):
    pass


def _resolve_case(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    if path.parent == Path(".") and path.suffix in ("", ".json"):
        bundled = bundled_case_path(path.name)
        if bundled.exists():
            return bundled
    raise InputError(f"file not found: {name}")


def _load(name: str):
    path = _resolve_case(name)
    try:
        return load_case(path)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    except CaseError as exc:
        raise InputError(str(exc)) from None


def _floats(text: str | None, K: int, what: str):
    if text is None:
        return None
    vals = [float(v) for v in text.split(",") if v.strip()]
    if len(vals) == 1 and K > 1:
        vals = vals * K
    if len(vals) != K:
        raise InputError(f"{what} needs {K} comma-separated values, got {len(vals)}")
    return np.array(vals)


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.01, help="relative gap tolerance (0 = exact)")
    p.add_argument("--xi", type=float, default=0.0, help="rounding threshold for U")
    p.add_argument("--samples", type=int, default=50, help="gap samples per region (Q)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--branch-order", choices=("index", "fractional"), default="index")
    p.add_argument("--max-nodes", type=int, default=None, help="stop after this many nodes")


def _params(args) -> dict:
    return {
        "alpha": args.alpha,
        "xi": args.xi,
        "Q": args.samples,
        "seed": args.seed,
        "branch_order": args.branch_order,
        "max_nodes": args.max_nodes,
    }


def _solve(case, args):
    form = assemble_standard_form(case)
    res = solve_mpmilp(
        form, alpha=args.alpha, xi=args.xi, Q=args.samples, seed=args.seed,
        branch_order=args.branch_order, max_nodes=args.max_nodes,
    )
    return form, res


def _out(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    case = _load(args.case)
    form, res = _solve(case, args)
    K = case.K
    theta0 = _floats(args.theta0, K, "--theta0")
    if theta0 is None:
        theta0 = np.asarray(case.theta_box, dtype=float)[:, 0]
    rankings = plan = None
    if not res.certificate.infeasible:
        try:
            rankings = rank_lines(res.incumbent, theta0)
        except PlannerError:
            rankings = None
        costs = _floats(args.costs, K, "--costs")
        if costs is not None and args.budget is not None:
            plan = allocate_budget(res.incumbent, costs, args.budget)
    report = build_report(case, form, res, _params(args), rankings, plan, timestamp=not args.no_timestamp)
    _out(dumps(report), args.out)
    if res.certificate.infeasible:
        print("model is infeasible over the whole parameter box", file=sys.stderr)
        return 2
    return 0


def cmd_oracle(args) -> int:
    case = _load(args.case)
    if case.n_binaries > MAX_BINARIES:
        raise InputError(
            f"{case.n_binaries} binaries exceed the enumeration limit of {MAX_BINARIES}; "
            "the oracle only checks small cases"
        )
    if args.report:
        view = load_report(args.report)
        form = assemble_standard_form(case)
        value_fn = view.upper.value
    else:
        args.alpha = 0.0
        form, res = _solve(case, args)
        value_fn = res.incumbent.value
    try:
        cmp = compare(form, value_fn, args.grid)
    except OracleRefused as exc:
        raise InputError(str(exc)) from None
    ok = cmp["max_deviation"] <= ORACLE_TOL
    out = {
        "case": case.name,
        "grid": args.grid,
        "max_deviation": cmp["max_deviation"] if np.isfinite(cmp["max_deviation"]) else None,
        "worst_point": cmp["worst_point"],
        "tolerance": ORACLE_TOL,
        "pass": bool(ok),
        "points": [
            {"theta": th, "oracle": _num(ref), "incumbent": _num(got), "deviation": _num(dev)}
            for th, ref, got, dev in cmp["points"]
        ],
    }
    _out(json.dumps(out, indent=1) + "\n", args.out)
    print(f"max deviation {cmp['max_deviation']!r} over {len(cmp['points'])} points: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 2


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _view(path):
    try:
        return load_report(path)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except (ValueError, KeyError) as exc:
        raise InputError(f"bad report {path}: {exc}") from None


def cmd_rank(args) -> int:
    view = _view(args.report)
    K = view.space.K
    theta0 = _floats(args.theta0, K, "--theta0")
    if theta0 is None:
        theta0 = view.space.box[:, 0]
    fn = view.lower if args.lower else view.upper
    if fn is None:
        raise InputError("report has no lower bound")
    try:
        ranking = rank_lines(fn, theta0)
    except PlannerError as exc:
        raise InputError(str(exc)) from None
    _out(json.dumps([{"line": k, "rate": r} for k, r in ranking], indent=1) + "\n", args.out)
    return 0


def cmd_budget(args) -> int:
    view = _view(args.report)
    K = view.space.K
    costs = _floats(args.costs, K, "--costs")
    bounds = _floats(args.bounds, K, "--bounds")
    try:
        plan = allocate_budget(view.upper, costs, args.budget, bounds)
    except PlannerError as exc:
        raise InputError(str(exc)) from None
    _out(json.dumps(plan_dict(plan), indent=1) + "\n", args.out)
    return 0


def cmd_plot(args) -> int:
    _view(args.report)
    for path in emit_plot(args.report, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpuced", description="Parametric unit-commitment planning over line-capacity upgrades")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve a case and write a JSON report")
    p.add_argument("case", help="case file, or the name of a bundled case")
    _solver_args(p)
    p.add_argument("--theta0", help="point for line ranking (comma separated)")
    p.add_argument("--costs", help="unit upgrade cost per line (comma separated)")
    p.add_argument("--budget", type=float, help="upgrade budget")
    p.add_argument("--no-timestamp", action="store_true", help="omit timestamps and timings")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("oracle", help="compare the exact solution with brute-force enumeration")
    p.add_argument("case")
    p.add_argument("--grid", type=int, default=11, help="points per varying line")
    p.add_argument("--report", help="check this report instead of solving")
    _solver_args(p)
    p.add_argument("--out", help="comparison path (default stdout)")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("rank", help="rank lines by cost-reduction rate")
    p.add_argument("report")
    p.add_argument("--theta0")
    p.add_argument("--lower", action="store_true", help="use the root lower bound")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("budget", help="allocate an upgrade budget")
    p.add_argument("report")
    p.add_argument("--costs", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--bounds")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_budget)

    p = sub.add_parser("plot", help="write CSV plot data per varying line")
    p.add_argument("report")
    p.add_argument("--out", help="output directory (default: next to the report)")
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
