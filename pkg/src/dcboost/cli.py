"""Batch experiment runner, trace checker, and bound reporter.

Subcommands:

* ``run``        -- execute one solver over a set of starts, writing one
                    JSONL trace per start plus a summary CSV.
* ``check``      -- replay every certified inequality on stored traces and
                    report the worst slack per inequality.
* ``complexity`` -- evaluate the iteration-count bounds against a trace.

Exit codes: 0 success, 1 invariant/check failure, 2 usage/config error.
Configuration is a flat JSON document (keys like ``rho``, ``eps.kind``,
``nu.omega``, ``starts.count``); command-line flags override file keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import problems
from .core import (
    InvariantViolation,
    Trace,
    config_from_flat,
    validate,
)
from .drivers import (
    check_descent,
    complexity_report,
    final_residual,
    run_bdca,
    run_dca,
    run_inmbdca,
    run_nmbdca,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

CHECK_SLACK_FLOOR = -1e-9

_SOLVERS = {
    "inmbdca": lambda p, c, x0, seed: run_inmbdca(p, c, x0, seed=seed),
    "nmbdca": lambda p, c, x0, seed: run_nmbdca(p, c, x0),
    "bdca": lambda p, c, x0, seed: run_bdca(p, c, x0),
    "dca": lambda p, c, x0, seed: run_dca(p, c, x0),
}

# flag destination -> flat config key
_CONFIG_FLAGS = {
    "problem": "problem",
    "solver": "solver",
    "rho": "rho",
    "beta": "beta",
    "theta": "theta",
    "lambda_bar": "lambda_bar",
    "eps_kind": "eps.kind",
    "eps_eps0": "eps.eps0",
    "eps_q": "eps.q",
    "nu_kind": "nu.kind",
    "nu_omega": "nu.omega",
    "nu_delta": "nu.delta",
    "nu_delta_min": "nu.delta_min",
    "nu_nu0": "nu.nu0",
    "nu_fraction": "nu.fraction",
    "nu_eta": "nu.eta",
    "nu_eta_min": "nu.eta_min",
    "nu_eta_max": "nu.eta_max",
    "nu_c0_offset": "nu.c0_offset",
    "nu_m": "nu.m",
    "stop_step_tol": "stop_step_tol",
    "d_zero_tol": "d_zero_tol",
    "max_iter": "max_iter",
    "max_backtracks": "max_backtracks",
    "inexact_mode": "inexact_mode",
    "starts_count": "starts.count",
    "starts_seed": "starts.seed",
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _vec(x) -> str:
    return ";".join(repr(float(v)) for v in x)


def _build_run_parser(sub):
    p = sub.add_parser("run", help="execute a solver over a set of starts")
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--problem")
    p.add_argument("--solver", choices=sorted(_SOLVERS))
    p.add_argument("--rho", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--lambda-bar", dest="lambda_bar", type=float)
    p.add_argument("--eps-kind", dest="eps_kind",
                   choices=["zero", "geometric", "harmonic2"])
    p.add_argument("--eps-eps0", dest="eps_eps0", type=float)
    p.add_argument("--eps-q", dest="eps_q", type=float)
    p.add_argument("--nu-kind", dest="nu_kind",
                   choices=["zero", "direct", "zhang_hager", "grippo", "ratio"])
    p.add_argument("--nu-omega", dest="nu_omega", type=float)
    p.add_argument("--nu-delta", dest="nu_delta", type=float)
    p.add_argument("--nu-delta-min", dest="nu_delta_min", type=float)
    p.add_argument("--nu-nu0", dest="nu_nu0", type=float)
    p.add_argument("--nu-fraction", dest="nu_fraction", type=float)
    p.add_argument("--nu-eta", dest="nu_eta", type=float)
    p.add_argument("--nu-eta-min", dest="nu_eta_min", type=float)
    p.add_argument("--nu-eta-max", dest="nu_eta_max", type=float)
    p.add_argument("--nu-c0-offset", dest="nu_c0_offset", type=float)
    p.add_argument("--nu-m", dest="nu_m", type=int)
    p.add_argument("--stop-step-tol", dest="stop_step_tol", type=float)
    p.add_argument("--d-zero-tol", dest="d_zero_tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--max-backtracks", dest="max_backtracks", type=int)
    p.add_argument("--inexact-mode", dest="inexact_mode",
                   choices=["inner_solver", "perturbed_exact", "exact"])
    p.add_argument("--starts-count", dest="starts_count", type=int)
    p.add_argument("--starts-box", dest="starts_box", nargs=2, type=float,
                   metavar=("LO", "HI"))
    p.add_argument("--starts-seed", dest="starts_seed", type=int)
    p.add_argument("--start", action="append", default=None,
                   metavar="X1,X2,...",
                   help="explicit start point (repeatable; overrides sampling)")
    p.add_argument("--plot-data", action="store_true",
                   help="also write per-start objective and iterate-path CSVs "
                        "(2-D problems)")
    p.add_argument("--workers", type=int, default=1)


def _gather_flat(args) -> dict:
    flat = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a flat JSON object")
        flat.update(loaded)
    for dest, key in _CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flat[key] = value
    if getattr(args, "starts_box", None) is not None:
        flat["starts.box"] = list(args.starts_box)
    if getattr(args, "start", None):
        flat["starts"] = [
            [float(v) for v in s.split(",")] for s in args.start
        ]
    return flat


def _resolve_starts(flat: dict, dim: int) -> np.ndarray:
    if "starts" in flat:
        starts = np.asarray(flat["starts"], dtype=float)
        if starts.size == 0:
            return np.zeros((0, dim))
        if starts.ndim != 2 or starts.shape[1] != dim:
            raise ValueError(
                f"explicit starts must be {dim}-dimensional points"
            )
        return starts
    count = int(flat.get("starts.count", 1))
    box = flat.get("starts.box", [-10.0, 10.0])
    seed = int(flat.get("starts.seed", 0))
    return problems.sample_starts(count, box, seed, dim)


def _execute_start(payload):
    """Run one start; returns (index, summary row, error record or None)."""
    (index, problem_name, solver, flat, x0, seed, trace_path,
     plot_paths) = payload
    problem = problems.resolve(problem_name)
    config = config_from_flat(flat)
    try:
        trace = _SOLVERS[solver](problem, config, np.asarray(x0), seed)
    except (InvariantViolation, ValueError) as exc:
        return index, None, {
            "error": type(exc).__name__,
            "message": str(exc),
            "start_index": index,
            "x0": list(map(float, x0)),
        }
    trace.write_jsonl(trace_path)
    if plot_paths is not None:
        phi_path, path_path = plot_paths
        with open(phi_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "phi_x"])
            for r in trace.records:
                w.writerow([r.k, repr(r.phi_x)])
            w.writerow([len(trace.records), repr(trace.final_phi)])
        with open(path_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x1", "x2"])
            for r in trace.records:
                w.writerow([repr(float(r.x[0])), repr(float(r.x[1]))])
            w.writerow([repr(float(trace.final_x[0])),
                        repr(float(trace.final_x[1]))])
    row = {
        "start": _vec(x0),
        "final_x": _vec(trace.final_x),
        "final_phi": repr(trace.final_phi),
        "iterations": len(trace.records),
        "total_backtracks": sum(r.n_backtracks for r in trace.records),
        "termination": trace.termination.value,
        "final_residual": repr(final_residual(problem, trace)),
    }
    return index, row, None


def cmd_run(args) -> int:
    import os

    flat = _gather_flat(args)
    problem_name = flat.get("problem")
    if not problem_name:
        print("run: no problem selected (key 'problem')", file=sys.stderr)
        return EXIT_USAGE
    solver = flat.get("solver", "inmbdca")
    if solver not in _SOLVERS:
        print(f"run: unknown solver {solver!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        problem = problems.resolve(problem_name)
        config = config_from_flat(flat)
        violations = validate(problem, config)
    except ValueError as exc:
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if violations:
        print("run: invalid configuration: " + "; ".join(violations),
              file=sys.stderr)
        return EXIT_USAGE
    try:
        starts = _resolve_starts(flat, problem.dim)
    except ValueError as exc:
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(args.out, exist_ok=True)
    master_seed = int(flat.get("starts.seed", 0))
    payloads = []
    for i, x0 in enumerate(starts):
        trace_path = os.path.join(args.out, f"trace_{i:03d}.jsonl")
        plot_paths = None
        if args.plot_data and problem.dim == 2:
            plot_paths = (
                os.path.join(args.out, f"phi_{i:03d}.csv"),
                os.path.join(args.out, f"path_{i:03d}.csv"),
            )
        payloads.append((
            i, problem_name, solver, flat, [float(v) for v in x0],
            [master_seed, i], trace_path, plot_paths,
        ))

    if args.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_execute_start, payloads))
    else:
        results = [_execute_start(p) for p in payloads]

    results.sort(key=lambda t: t[0])
    exit_code = EXIT_OK
    summary = os.path.join(args.out, "summary.csv")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["start", "final_x", "final_phi", "iterations",
                        "total_backtracks", "termination", "final_residual"],
            lineterminator="\n",
        )
        writer.writeheader()
        for _, row, error in results:
            if error is not None:
                print(json.dumps(error), file=sys.stderr)
                exit_code = EXIT_CHECK_FAILED
            else:
                writer.writerow(row)
    print(f"run: {len(results)} start(s), summary -> {summary}")
    return exit_code


_INEQUALITIES = [
    "reconstruction",
    "inexact_bound",
    "subgrad_membership",
    "linesearch",
    "descent_y",
    "descent_step",
    "eps_certificate",
]


def _trace_slacks(trace: Trace, problem) -> dict:
    """Worst slack (value, iteration) per replayed inequality."""
    sigma, theta = problem.sigma, trace.config.theta
    rho = trace.config.rho
    worst = {name: (math.inf, -1) for name in _INEQUALITIES}

    def update(name, value, k):
        if value < worst[name][0]:
            worst[name] = (value, k)

    for r in trace.records:
        d = r.y - r.x
        box = problem.g.subdiff_box(r.y)
        update("subgrad_membership", -box.membership_gap(r.xi), r.k)
        update("inexact_bound", r.inexact_rhs - r.inexact_lhs, r.k)
        d_sq = r.d_norm**2
        update(
            "linesearch",
            (r.phi_y - rho * r.lambda_k**2 * d_sq + r.nu_k) - r.phi_next,
            r.k,
        )
        update(
            "descent_y",
            (r.phi_x - (sigma / 2 - theta) * d_sq + r.eps_k) - r.phi_y,
            r.k,
        )
        update(
            "descent_step",
            (r.phi_x - (sigma / 2 - theta + rho * r.lambda_k**2) * d_sq
             + r.nu_k + r.eps_k) - r.phi_next,
            r.k,
        )
        update("eps_certificate", r.eps_k - r.eps_certified, r.k)

    for prev, nxt in zip(trace.records, trace.records[1:]):
        d = prev.y - prev.x
        err = float(np.linalg.norm(nxt.x - (prev.y + prev.lambda_k * d)))
        update("reconstruction", -err, prev.k)
    if trace.records:
        last = trace.records[-1]
        d = last.y - last.x
        err = float(
            np.linalg.norm(trace.final_x - (last.y + last.lambda_k * d))
        )
        update("reconstruction", -err, last.k)
    return worst


def cmd_check(args) -> int:
    exit_code = EXIT_OK
    for path in args.traces:
        try:
            trace = Trace.read_jsonl(path)
            problem = problems.resolve(trace.problem_name)
        except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"{path}: parse error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        worst = _trace_slacks(trace, problem)
        print(f"{path}: {len(trace.records)} record(s)")
        for name in _INEQUALITIES:
            value, k = worst[name]
            if math.isinf(value):
                print(f"  {name}: no applicable records")
                continue
            status = "ok" if value >= CHECK_SLACK_FLOOR else "VIOLATED"
            print(f"  {name}: worst slack {value:.3e} at k={k} [{status}]")
            if value < CHECK_SLACK_FLOOR:
                exit_code = EXIT_CHECK_FAILED
    return exit_code


def cmd_complexity(args) -> int:
    try:
        trace = Trace.read_jsonl(args.trace)
        problem = problems.resolve(trace.problem_name)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"{args.trace}: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    phi_bar = args.phibar
    heuristic = False
    if phi_bar is None:
        phi_bar = problem.phi_lower_bound
    if phi_bar is None:
        # conservative stand-in: the best value this trace ever saw, minus a
        # margin; still valid for prefix checks since it lower-bounds every
        # recorded phi(x^N)
        if not trace.records:
            print("complexity: empty trace and no lower bound available",
                  file=sys.stderr)
            return EXIT_USAGE
        phi_bar = min(
            min(min(r.phi_x, r.phi_y, r.phi_next) for r in trace.records),
            trace.final_phi,
        ) - 1e-6
        heuristic = True
    try:
        report = complexity_report(
            trace, phi_bar, problem.sigma, trace.config.theta, xi=args.xi
        )
    except ValueError as exc:
        print(f"complexity: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"trace: {args.trace}")
    if heuristic:
        print(f"phi_bar: {phi_bar!r} (heuristic stand-in: best recorded "
              "phi minus 1e-6)")
    print(f"iterations (N): {report.n}")
    print(f"min ||d||: {report.min_d_norm:.6e}")
    print(f"decay bound (recorded sums): {report.bound_total:.6e}")
    print(f"bound holds on every prefix: {report.prefix_ok}")
    print(f"liminf proxy (trailing half): {report.liminf_proxy:.6e}")
    if report.bound_tail is not None:
        print(f"tail-dominated bound from k0={report.tail_start} "
              f"(xi={report.xi}): {report.bound_tail:.6e} "
              f"(looser stated variant: {report.bound_tail_stated:.6e})")
    else:
        print("tail-dominated bound: not applicable "
              "(domination of nu/eps by xi*(sigma/2-theta)*||d||^2 not met)")
    # descent recheck doubles as a sanity gate for the bound inputs
    descent = check_descent(trace, problem.sigma, trace.config.theta)
    bad = [c for c in descent if not c.ok]
    if bad:
        print(f"descent recheck failed at {len(bad)} iteration(s)")
        return EXIT_CHECK_FAILED
    return EXIT_OK if report.prefix_ok else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dcboost",
        description="difference-of-convex solvers with certified traces",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _build_run_parser(sub)

    p_check = sub.add_parser("check", help="replay inequalities on traces")
    p_check.add_argument("traces", nargs="+", help="JSONL trace files")

    p_cplx = sub.add_parser("complexity",
                            help="evaluate iteration-count bounds on a trace")
    p_cplx.add_argument("trace", help="JSONL trace file")
    p_cplx.add_argument("--phibar", type=float, default=None,
                        help="lower bound of phi (defaults to the problem's)")
    p_cplx.add_argument("--xi", type=float, default=0.25,
                        help="fraction in (0, 1/2) for the tail bound")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    if args.command == "run":
        return cmd_run(args)
    if args.command == "check":
        return cmd_check(args)
    return cmd_complexity(args)


if __name__ == "__main__":
    raise SystemExit(main())
