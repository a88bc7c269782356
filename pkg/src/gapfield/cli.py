"""Batch command-line front-end: solve, sweep, verify.

Exit codes: 0 success (verify: all checks pass), 1 verify failures,
2 invalid arguments, 3 solver non-convergence.  Output files are
deterministic for identical flags; stdout carries only the summary table,
stderr the human diagnostics.  Set GAPFIELD_PRECISION=double to keep the
fixed-point geometry in float64 instead of extended precision.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import FieldKind, GapConfig, SweepSpec
from .odeanalysis import (WindowError, default_window, fit_decomposition,
                          fit_exponent, local_slope)
from .solver import (SolverError, f_trace, gy_profile, solution_report, solve)
from .verify import run_suite

TARGET_SLOPE = -(2.0 - math.sqrt(2.0)) / 2.0
SCHEMA_VERSION = 1

_FIELDS = {"y": FieldKind.Y_LINEAR, "x": FieldKind.X_LINEAR}


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _fmt(v) -> str:
    return "" if v is None else f"{v:.12e}"


def cmd_solve(args) -> int:
    try:
        config = GapConfig(epsilon=args.epsilon, field_kind=_FIELDS[args.field],
                           tol=args.tol)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        sol = solve(config)
    except SolverError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 3
    report = solution_report(sol)
    out = Path(args.out)
    _write_json(out / "solve_report.json", report)
    xs, gy = gy_profile(sol, n=101)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "solve_segment.csv", "w", encoding="utf-8") as fh:
        fh.write("x,gy\n")
        for x, v in zip(xs, gy):
            fh.write(f"{_fmt(x)},{_fmt(v)}\n")
    print(f"epsilon={report['epsilon']:.6e} gy_at_0={report['gy_at_0']:.9e} "
          f"depth={report['depth_used']} tail_bound={report['tail_bound']:.3e}")
    for chk in report["checks"]:
        print(f"  check {chk['name']}: {'pass' if chk['pass'] else 'FAIL'} "
              f"(margin {chk['margin']:.3e})")
    return 0


def _sweep_row(eps: float, tol: float) -> dict:
    sol = solve(GapConfig(epsilon=eps, tol=tol))
    report = solution_report(sol)
    f = f_trace(sol)
    row = {
        "epsilon": eps,
        "gy_at_0": report["gy_at_0"],
        "p1": float(f(0.0)),
        "depth_used": report["depth_used"],
        "tail_bound": report["tail_bound"],
        "gx_max": report["gx_max"],
        "c_alpha": None,
        "c_beta": None,
        "slope_local": float(local_slope(f, 0.05)),
        "fit_residual": None,
    }
    try:
        window = default_window(eps)
        dec = fit_decomposition(f, eps, window=window)
        row["c_alpha"] = dec.c_alpha
        row["c_beta"] = dec.c_beta
        row["fit_residual"] = dec.residual_norm
    except WindowError:
        pass
    return row


def cmd_sweep(args) -> int:
    try:
        spec = SweepSpec(eps_min=args.eps_min, eps_max=args.eps_max,
                         count=args.count, tol=args.tol,
                         output_dir=Path(args.out))
    except ValueError as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return 2
    grid = spec.grid()
    try:
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_sweep_row, grid,
                                     [spec.tol] * len(grid)))
        else:
            rows = [_sweep_row(e, spec.tol) for e in grid]
    except SolverError as exc:
        print(f"sweep aborted, solver did not converge: {exc}", file=sys.stderr)
        return 3
    fit = fit_exponent([(r["epsilon"], r["gy_at_0"]) for r in rows])
    comp = [r["gy_at_0"] * r["epsilon"] ** (-TARGET_SLOPE) for r in rows]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "target_slope": TARGET_SLOPE,
        "fitted_slope": fit.slope,
        "intercept": fit.intercept,
        "stderr": fit.stderr,
        "deviation": abs(fit.slope - TARGET_SLOPE),
        "compensated_min": min(comp),
        "compensated_max": max(comp),
        "compensated_ratio": max(comp) / min(comp),
        "rows": rows,
    }
    out = spec.output_dir
    _write_json(out / "sweep_summary.json", summary)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["epsilon", "gy_at_0", "p1", "c_alpha", "c_beta", "slope_local",
            "fit_residual", "gx_max", "depth_used", "tail_bound"]
    with open(out / "sweep_rows.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            vals = []
            for cnam in cols:
                v = r[cnam]
                vals.append(str(v) if cnam == "depth_used" else _fmt(v))
            fh.write(",".join(vals) + "\n")
    print(f"fitted slope = {fit.slope:+.6f}  target = {TARGET_SLOPE:+.6f}  "
          f"deviation = {abs(fit.slope - TARGET_SLOPE):.6f}")
    print(f"compensated gy ratio = {summary['compensated_ratio']:.4f}")
    return 0


def cmd_verify(args) -> int:
    try:
        eps_list = [float(tok) for tok in args.epsilon_list.split(",") if tok]
    except ValueError as exc:
        print(f"invalid epsilon list: {exc}", file=sys.stderr)
        return 2
    if not eps_list or any(e <= 0 for e in eps_list):
        print("epsilon list must contain positive values", file=sys.stderr)
        return 2
    try:
        results = run_suite(eps_list, tol=args.tol, perturb=args.perturb,
                            boundary=args.boundary)
    except SolverError as exc:
        print(f"verify aborted, solver did not converge: {exc}", file=sys.stderr)
        return 3
    for r in results:
        eps = "all     " if r.epsilon is None else f"{r.epsilon:.2e}"
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name:32s} eps={eps} margin={r.margin:+.6e} {r.detail}")
    n_fail = sum(1 for r in results if not r.passed)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 0 if n_fail == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gapfield",
        description="Electric field between two close insulating unit spheres: "
                    "reflection-series solver and verification suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser(
        "solve", help="solve one gap configuration and emit report files",
        description="Writes solve_report.json (schema_version, epsilon, "
                    "depth_used, tail_bound, gy_at_0, gx_max, checks) and "
                    "solve_segment.csv with columns x,gy on 101 segment "
                    "points.")
    p_solve.add_argument("--epsilon", type=float, required=True,
                         help="gap width, 0 < eps < 0.25")
    p_solve.add_argument("--tol", type=float, default=1e-8,
                         help="absolute sup-norm tail target (default 1e-8)")
    p_solve.add_argument("--field", choices=sorted(_FIELDS), default="y",
                         help="background field: unit linear along y or x")
    p_solve.add_argument("--out", default=".", help="output directory")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser(
        "sweep", help="log-spaced gap sweep with blow-up exponent fit",
        description="Writes sweep_rows.csv (epsilon,gy_at_0,p1,c_alpha,"
                    "c_beta,slope_local,fit_residual,gx_max,depth_used,"
                    "tail_bound) and sweep_summary.json with the log-log "
                    "slope against the target -(2-sqrt2)/2.")
    p_sweep.add_argument("--eps-min", type=float, required=True)
    p_sweep.add_argument("--eps-max", type=float, required=True)
    p_sweep.add_argument("--count", type=int, required=True,
                         help="number of log-spaced points, >= 4")
    p_sweep.add_argument("--tol", type=float, default=1e-8)
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="parallel solves across gap widths")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser(
        "verify", help="run the full invariant suite",
        description="Machine-readable pass/fail table on stdout; exit 0 "
                    "iff all checks pass.")
    p_verify.add_argument("--epsilon-list", default="1e-2,1e-3,1e-4",
                          help="comma-separated gap widths")
    p_verify.add_argument("--tol", type=float, default=1e-8)
    p_verify.add_argument("--perturb", type=float, default=0.0,
                          help="shift the computed trace by a constant "
                               "(harness self-test; checks must fail)")
    p_verify.add_argument("--boundary", action="store_true",
                          help="also run the depth-limited off-axis Neumann "
                               "surface check (wide-gap oracle)")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
