"""Command-line surface: estimate, tune, bench, covsel and bounds.

All index output is 0-based.  Exit codes: 0 success, 2 input error,
3 infeasible, 4 finished on the time limit with a certified gap (the
result is still written; the anytime bound makes this a usable outcome).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bench, bigm, cutplane, model, structure
from .covsel import BigM, Ridge, Support, solve_covsel
from .errors import CovcutError, Infeasible, InvalidInput, Unconverged

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4


# ---------------------------------------------------------------------------
# input handling


def _read_rows(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                rows.append(([float(c) for c in cells], lineno))
            except ValueError:
                if not rows:
                    continue  # header line
                raise InvalidInput(f"{path}: non-numeric value on row {lineno}")
    if not rows:
        raise InvalidInput(f"{path}: no numeric rows")
    width = len(rows[0][0])
    for values, lineno in rows:
        if len(values) != width:
            raise InvalidInput(
                f"{path}: row {lineno} has {len(values)} columns, expected {width}"
            )
    return np.array([values for values, _ in rows], dtype=np.float64)


def load_matrix(path, kind):
    """Covariance from a CSV file of samples (rows) or a covariance itself."""
    data = _read_rows(path)
    if kind == "covariance":
        if data.shape[0] != data.shape[1]:
            raise InvalidInput(
                f"{path}: covariance must be square, got {data.shape}"
            )
        skew = np.abs(data - data.T).max(initial=0.0)
        if skew > 1e-8 * max(1.0, np.abs(data).max(initial=0.0)):
            raise InvalidInput(f"{path}: matrix not symmetric (skew {skew:.2e})")
        return 0.5 * (data + data.T), None
    if data.shape[0] < 2:
        raise InvalidInput(f"{path}: need at least two sample rows")
    centered = data - data.mean(axis=0)
    return centered.T @ centered / data.shape[0], data


def load_support(path, p):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise InvalidInput(f"{path}: row {lineno} is not an index pair")
            try:
                i, j = int(cells[0]), int(cells[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise InvalidInput(f"{path}: row {lineno} is not an index pair")
            if i == j:
                raise InvalidInput(f"{path}: row {lineno} names a diagonal entry")
            pairs.append((min(i, j), max(i, j)))
    return Support(p, tuple(pairs))


def _resolve_reg(args, sigma):
    m0, gamma0 = model.base_scales(sigma)
    if args.reg_value is not None and args.reg_mult is not None:
        raise InvalidInput("--reg-value and --reg-mult are mutually exclusive")
    if args.reg == "bigm":
        value = args.reg_value if args.reg_value is not None else (
            (args.reg_mult if args.reg_mult is not None else 1.0) * m0
        )
        return BigM(bounds=value)
    value = args.reg_value if args.reg_value is not None else (
        (args.reg_mult if args.reg_mult is not None else 1.0) * gamma0
    )
    return Ridge(gamma=value)


def _resolve_warm(args, sigma, k):
    mode = args.warm
    if mode == "mb":
        return None  # solver default
    if mode == "none":
        return Support(sigma.shape[0])
    if mode.startswith("file:"):
        return load_support(mode[5:], sigma.shape[0])
    raise InvalidInput(f"unknown warm-start mode {mode!r}")


def _load_structure(args):
    if args.structure is None:
        return ()
    return tuple(structure.load_constraints(args.structure))


def _trace_fn(args):
    if not args.trace:
        return None

    def emit(event):
        sys.stderr.write(json.dumps(event, sort_keys=True) + "\n")

    return emit


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _theta_payload(theta, support):
    entries = [
        [int(i), int(j), float(theta[i, j])]
        for i, j in support.pairs
        if abs(theta[i, j]) > 0.0
    ]
    return {
        "diagonal": [float(v) for v in np.diagonal(theta)],
        "entries": entries,
    }


def _result_payload(res, k, reg):
    reg_desc = (
        {"kind": "bigm", "bounds": _scalar_or_list(reg.bounds)}
        if isinstance(reg, BigM)
        else {"kind": "ridge", "gamma": reg.gamma}
    )
    return {
        "p": res.support.dim,
        "k": k,
        "regularizer": reg_desc,
        "objective_upper": res.upper,
        "objective_lower": res.lower,
        "relative_gap": res.relative_gap,
        "support": [[int(i), int(j)] for i, j in res.support.pairs],
        "theta": _theta_payload(res.theta, res.support),
        "cuts": res.cuts_generated,
        "nodes": res.nodes_explored,
        "time_s": res.wall_times["total_s"],
    }


def _scalar_or_list(value):
    if np.isscalar(value):
        return float(value)
    return np.asarray(value).tolist()


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(args):
    if args.k is None and not args.k_list:
        raise InvalidInput("estimate needs --k or --k-list")
    sigma, _ = load_matrix(args.input, args.input_kind)
    reg = _resolve_reg(args, sigma)
    warm = _resolve_warm(args, sigma, args.k)
    constraints = _load_structure(args)
    trace = _trace_fn(args)
    k_list = args.k_list if args.k_list else [args.k]
    if args.k_list:
        results = cutplane.solve_path(
            sigma, args.k_list, reg, structural=constraints, warm=warm,
            eps=args.eps, time_limit_s=args.time_limit_s, trace=trace,
        )
        payload = [_result_payload(r, k, reg) for k, r in zip(k_list, results)]
        timed_out = any(r.timed_out and r.relative_gap > args.eps for r in results)
    else:
        res = cutplane.solve(
            sigma, args.k, reg, structural=constraints, warm=warm,
            eps=args.eps, time_limit_s=args.time_limit_s, trace=trace,
        )
        payload = _result_payload(res, args.k, reg)
        timed_out = res.timed_out and res.relative_gap > args.eps
    _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    return EXIT_TIME_LIMIT if timed_out else EXIT_OK


def cmd_covsel(args):
    sigma, _ = load_matrix(args.input, args.input_kind)
    reg = _resolve_reg(args, sigma)
    z = load_support(args.support, sigma.shape[0])
    try:
        sol = solve_covsel(sigma, z, reg, gap_tol=args.eps)
    except Unconverged as exc:
        sol = exc.solution
    payload = {
        "p": sigma.shape[0],
        "support_size": z.npairs,
        "value": sol.primal_value,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "theta": _theta_payload(sol.theta, z),
    }
    _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if sol.converged else EXIT_TIME_LIMIT


def cmd_bounds(args):
    sigma, _ = load_matrix(args.input, args.input_kind)
    p = sigma.shape[0]
    if args.k:
        warm = model.warm_start(sigma, p, args.k)
        try:
            sol = solve_covsel(sigma, warm, BigM(), gap_tol=1e-6)
            theta_hat = sol.theta
        except Unconverged as exc:
            theta_hat = exc.solution.theta
    else:
        theta_hat = np.diag(1.0 / np.diagonal(sigma))
    u = bigm.level_from_feasible(sigma, theta_hat)
    bounds, shifted = bigm.all_entry_bounds(sigma, u, shift=args.shift)
    if shifted:
        sys.stderr.write("warning: singular covariance shifted; bounds are heuristic\n")
    m = bigm.bounds_to_bigM(bounds, inflation=args.inflation, dim=p)
    lines = ["i,j,lower,upper,M"]
    for b in bounds:
        i, j = b.pair
        lines.append(
            f"{i},{j},{float(b.lower)!r},{float(b.upper)!r},{float(m[i, j])!r}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_tune(args):
    if args.input_kind != "samples":
        raise InvalidInput("tune needs sample input (train/validation split)")
    _, data = load_matrix(args.input, "samples")
    n = data.shape[0]
    if n < 3:
        raise InvalidInput("tune needs at least three samples")
    order = np.random.default_rng(args.seed).permutation(n)
    n_train = max(2, (2 * n) // 3)  # 2:1 train/validation split
    train = data[order[:n_train]]
    val = data[order[n_train:]]
    if val.shape[0] < 2:
        raise InvalidInput("validation split is empty; provide more samples")

    def cov(x):
        c = x - x.mean(axis=0)
        return c.T @ c / x.shape[0]

    if not args.k_list:
        raise InvalidInput("tune needs --k-list")
    grid = model.TuningGrid(
        k_values=args.k_list,
        reg_values=args.multipliers,
        criterion=args.criterion,
    )
    tuned = model.tune(
        cov(train), cov(val), n_train, grid, reg_kind=args.reg,
        eps=args.eps, time_limit_s=args.time_limit_s, threads=args.threads,
    )
    payload = {
        "chosen": {
            "k": tuned.k,
            "reg_multiplier": tuned.reg_multiplier,
            "criterion_value": tuned.criterion_value,
        },
        "result": _result_payload(tuned.result, tuned.k, tuned.reg),
    }
    if args.out is None:
        raise InvalidInput("tune needs --out (grid CSV goes next to it)")
    _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    grid_path = args.out + ".grid.csv"
    with open(grid_path, "w", encoding="utf-8") as fh:
        model.write_grid_csv(tuned.table, fh)
    return EXIT_OK


def cmd_bench(args):
    config = bench.BenchConfig(
        p=args.p,
        n=args.n,
        t=args.t,
        methods=tuple(args.methods.split(",")),
        criteria=tuple(args.criteria.split(",")),
        k_values=tuple(args.k_list) if args.k_list else None,
        multipliers=tuple(args.multipliers),
        eps=args.eps,
        time_limit_s=args.time_limit_s,
        threads=args.threads,
    )
    seeds = range(args.seed, args.seed + args.seeds)
    rows, summary = bench.run_experiment(config, seeds)
    if args.out is None:
        raise InvalidInput("bench needs --out")
    with open(args.out, "w", encoding="utf-8") as fh:
        bench.write_results_csv(rows, fh)
    with open(args.out + ".summary.json", "w", encoding="utf-8") as fh:
        bench.write_summary_json(summary, fh)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(sub, input_required=True):
    if input_required:
        sub.add_argument("--input", required=True, help="CSV input path")
        sub.add_argument(
            "--input-kind", choices=("samples", "covariance"), default="samples",
            help="rows of samples (default) or a p x p covariance",
        )
    sub.add_argument("--reg", choices=("bigm", "ridge"), default="bigm")
    sub.add_argument("--reg-value", type=float, default=None,
                     help="absolute M (bigm) or gamma (ridge)")
    sub.add_argument("--reg-mult", type=float, default=None,
                     help="multiplier on the data-driven base scale M0/gamma0")
    sub.add_argument("--eps", type=float, default=1e-4,
                     help="absolute optimality tolerance (default 1e-4)")
    sub.add_argument("--time-limit-s", type=float, default=300.0,
                     help="wall-clock budget per solve (default 300)")
    sub.add_argument("--threads", type=int, default=1)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None, help="output path (default stdout)")
    sub.add_argument("--trace", action="store_true",
                     help="emit JSON-lines solver events on stderr")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="covcut",
        description="Cardinality-constrained sparse precision estimation "
                    "with optimality certificates (0-based indices everywhere)",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    est = subs.add_parser("estimate", help="solve one instance to a certified gap")
    _add_common(est)
    est.add_argument("--k", type=int, default=None, help="cardinality budget")
    est.add_argument("--k-list", type=int, nargs="+", default=None,
                     help="descending budgets solved as a path with cut reuse")
    est.add_argument("--warm", default="mb",
                     help="warm start: mb, none, or file:PATH (pair CSV)")
    est.add_argument("--structure", default=None,
                     help="JSON structural-constraint file")

    cov = subs.add_parser("covsel", help="solve one fixed-support subproblem")
    _add_common(cov)
    cov.add_argument("--support", required=True, help="CSV pair list (i,j rows)")

    bnd = subs.add_parser("bounds", help="data-driven big-M entry bounds")
    _add_common(bnd)
    bnd.add_argument("--k", type=int, default=0,
                     help="budget for the feasible point behind the level set")
    bnd.add_argument("--inflation", type=float, default=1.1)
    bnd.add_argument("--shift", default=None,
                     help="'auto' or a float: shift singular covariances")

    tun = subs.add_parser("tune", help="grid search over k and regularization")
    _add_common(tun)
    tun.add_argument("--k-list", type=int, nargs="+", required=True,
                     help="descending budgets")
    tun.add_argument("--multipliers", type=float, nargs="+",
                     default=(1.0, 2.0, 4.0, 8.0, 16.0))
    tun.add_argument("--criterion", choices=("holdout", "ebic"), default="holdout")

    ben = subs.add_parser("bench", help="synthetic recovery experiment")
    _add_common(ben, input_required=False)
    ben.add_argument("--p", type=int, required=True)
    ben.add_argument("--n", type=int, default=None)
    ben.add_argument("--t", type=float, default=0.01)
    ben.add_argument("--seeds", type=int, default=10,
                     help="number of seeds, starting at --seed")
    ben.add_argument("--methods", default="bigm")
    ben.add_argument("--criteria", default="holdout")
    ben.add_argument("--k-list", type=int, nargs="+", default=None)
    ben.add_argument("--multipliers", type=float, nargs="+", default=(1.0, 2.0, 4.0))

    return parser


_COMMANDS = {
    "estimate": cmd_estimate,
    "covsel": cmd_covsel,
    "bounds": cmd_bounds,
    "tune": cmd_tune,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Infeasible as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except (InvalidInput, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except CovcutError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
