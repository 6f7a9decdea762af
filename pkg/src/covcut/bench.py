"""Synthetic instances, recovery metrics and the experiment runner.

Instance generators draw from seeded, stream-split PCG64 generators
(SeedSequence([seed, stream]) with streams SUPPORT=0, TRAIN=1, VAL=2,
TEST=3), so every artifact is bit-reproducible from (parameters, seed).
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cutplane, linalg, model
from .covsel import BigM, Support, solve_covsel
from .errors import DegenerateInstance, InvalidInput, Unconverged

STREAM_SUPPORT = 0
STREAM_TRAIN = 1
STREAM_VAL = 2
STREAM_TEST = 3


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def _random_support(p, k, rng):
    n_pairs = p * (p - 1) // 2
    if k > n_pairs:
        raise InvalidInput(f"k={k} exceeds the {n_pairs} available pairs")
    chosen = rng.choice(n_pairs, size=k, replace=False) if k else np.empty(0, int)
    pairs = []
    iu, ju = np.triu_indices(p, k=1)
    for idx in sorted(int(c) for c in chosen):
        pairs.append((int(iu[idx]), int(ju[idx])))
    return Support(p, tuple(pairs))


def _sample_covariance(samples):
    """Empirical covariance: mean-centered, 1/n scaling."""
    centered = samples - samples.mean(axis=0)
    return centered.T @ centered / samples.shape[0]


def k_from_sparsity(p, t):
    return int(math.floor(t * p * (p - 1) / 2.0))


def gen_covsel_instance(p, t, seed):
    """Subproblem benchmark: dense truth I + ee^T, random support of size k.

    Draws n = p Gaussian samples with covariance (I + ee^T)^-1 =
    I - ee^T / (p + 1) and returns the empirical covariance plus a support
    sampled uniformly from the feasible set.
    """
    if p < 2 or not 0.0 <= t <= 1.0:
        raise InvalidInput(f"need p >= 2 and t in [0, 1], got p={p}, t={t}")
    k = k_from_sparsity(p, t)
    cov = np.eye(p) - np.ones((p, p)) / (p + 1.0)
    chol = np.linalg.cholesky(cov)
    raw = _rng(seed, STREAM_TRAIN).standard_normal((p, p))
    samples = raw @ chol.T
    sigma = _sample_covariance(samples)
    z = _random_support(p, k, _rng(seed, STREAM_SUPPORT))
    return sigma, z


@dataclass
class SyntheticInstance:
    theta_true: np.ndarray
    support_true: Support
    sigma_train: np.ndarray
    sigma_val: np.ndarray
    sigma_test: np.ndarray
    n: int
    p: int
    t: float
    seed: int
    k_true: int = 0


def gen_experiment_instance(p, n, t, seed, max_attempts=100):
    """Recovery benchmark: T0 = delta*I + 0.5*Z0 with condition number p.

    delta = (lmax - p*lmin) / (p - 1) pins cond(T0) = p exactly; supports
    leaving lmin + delta <= 0 are resampled.  Draws n train, n//2
    validation and 5n test samples and standardizes all three covariance
    estimates with the train-split scales.
    """
    if p < 2 or n < 2 or not 0.0 < t < 1.0:
        raise InvalidInput(f"invalid experiment shape p={p}, n={n}, t={t}")
    k_true = k_from_sparsity(p, t)
    rng_support = _rng(seed, STREAM_SUPPORT)
    theta0 = None
    support = None
    for _ in range(max_attempts):
        cand = _random_support(p, k_true, rng_support)
        a = np.zeros((p, p))
        for i, j in cand.pairs:
            a[i, j] = a[j, i] = 0.5
        eig = np.linalg.eigvalsh(a)
        lmin, lmax = float(eig[0]), float(eig[-1])
        delta = (lmax - p * lmin) / (p - 1.0)
        if lmin + delta > 1e-10:
            theta0 = delta * np.eye(p) + a
            support = cand
            break
    if theta0 is None:
        raise DegenerateInstance(
            f"no valid support after {max_attempts} attempts (p={p}, t={t})"
        )
    cov = linalg.inverse_spd(theta0)
    chol = np.linalg.cholesky(cov)

    def draw(stream, count):
        raw = _rng(seed, stream).standard_normal((count, p))
        return _sample_covariance(raw @ chol.T)

    sigma_train = draw(STREAM_TRAIN, n)
    sigma_val = draw(STREAM_VAL, max(2, n // 2))
    sigma_test = draw(STREAM_TEST, 5 * n)
    scale = np.sqrt(np.clip(np.diagonal(sigma_train), 1e-300, None))
    denom = np.outer(scale, scale)
    return SyntheticInstance(
        theta_true=theta0,
        support_true=support,
        sigma_train=sigma_train / denom,
        sigma_val=sigma_val / denom,
        sigma_test=sigma_test / denom,
        n=n,
        p=p,
        t=t,
        seed=seed,
        k_true=k_true,
    )


@dataclass
class Metrics:
    accuracy: float
    fdr: float
    nll_test: float
    k_selected: int


def score(estimate, instance):
    """Support-recovery accuracy, false detection rate and test likelihood.

    ``estimate`` is a SolveResult, a Support (nll reported as nan), or a
    precision matrix whose support is read off at the 1e-10 threshold.
    """
    if isinstance(estimate, cutplane.SolveResult):
        est_support, theta = estimate.support, estimate.theta
    elif isinstance(estimate, Support):
        est_support, theta = estimate, None
    else:
        theta = np.asarray(estimate, dtype=np.float64)
        est_support = Support.from_matrix(theta, tol=model.ZERO_TOL)
    true_pairs = instance.support_true.as_set()
    est_pairs = est_support.as_set()
    k_true = len(true_pairs)
    hits = len(est_pairs & true_pairs)
    accuracy = hits / k_true if k_true else 1.0
    fdr = len(est_pairs - true_pairs) / max(1, len(est_pairs))
    nll = math.nan if theta is None else model.holdout_nll(theta, instance.sigma_test)
    return Metrics(accuracy=accuracy, fdr=fdr, nll_test=nll, k_selected=len(est_pairs))


@dataclass
class BenchConfig:
    """Experiment-runner shape; defaults follow the synthetic study design."""

    p: int = 50
    n: int = None  # defaults to p
    t: float = 0.02
    methods: tuple = ("bigm",)
    criteria: tuple = ("holdout",)
    k_values: tuple = None  # defaults to a descending window around k_true
    multipliers: tuple = (1.0, 2.0, 4.0)
    eps: float = 1e-4
    time_limit_s: float = 300.0
    threads: int = 1
    mb_baseline: bool = True

    def resolved(self):
        n = self.p if self.n is None else self.n
        k_true = k_from_sparsity(self.p, self.t)
        if self.k_values is not None:
            ks = tuple(self.k_values)
        else:
            n_pairs = self.p * (self.p - 1) // 2
            raw = [round(k_true * f) for f in (1.5, 1.25, 1.0, 0.75)]
            ks = tuple(sorted({min(max(k, 0), n_pairs) for k in raw}, reverse=True))
        return n, k_true, ks


RESULT_COLUMNS = (
    "seed", "method", "criterion", "k_selected", "A", "FDR", "nll_test",
    "objective", "lower_bound", "gap", "time_total_s", "time_cuts_s",
    "cuts", "nodes",
)


def _mb_row(instance, k, criterion, seed):
    """Score the raw node-wise-lasso support at a matched budget."""
    t0 = time.monotonic()
    support = model.warm_start(instance.sigma_train, instance.p, k)
    try:
        sol = solve_covsel(instance.sigma_train, support, BigM(), gap_tol=1e-6)
        theta = sol.theta
        objective = sol.primal_value
    except Unconverged as exc:
        theta = exc.solution.theta
        objective = exc.solution.primal_value
    met = score(theta, instance)
    met = Metrics(met.accuracy, met.fdr, met.nll_test, support.npairs)
    elapsed = time.monotonic() - t0
    return {
        "seed": seed, "method": "mb", "criterion": criterion,
        "k_selected": met.k_selected, "A": met.accuracy, "FDR": met.fdr,
        "nll_test": met.nll_test, "objective": objective,
        "lower_bound": math.nan, "gap": math.nan,
        "time_total_s": elapsed, "time_cuts_s": math.nan,
        "cuts": 0, "nodes": 0,
    }


def _run_seed(config, seed):
    n, k_true, k_values = config.resolved()
    rows = []
    failures = []
    instance = gen_experiment_instance(config.p, n, config.t, seed)
    for method in config.methods:
        for criterion in config.criteria:
            try:
                t0 = time.monotonic()
                grid = model.TuningGrid(
                    k_values=k_values,
                    reg_values=config.multipliers,
                    criterion=criterion,
                )
                tuned = model.tune(
                    instance.sigma_train,
                    instance.sigma_val,
                    n,
                    grid,
                    reg_kind=method,
                    eps=config.eps,
                    time_limit_s=config.time_limit_s,
                )
                elapsed = time.monotonic() - t0
                met = score(tuned.result, instance)
                rows.append({
                    "seed": seed, "method": method, "criterion": criterion,
                    "k_selected": met.k_selected, "A": met.accuracy,
                    "FDR": met.fdr, "nll_test": met.nll_test,
                    "objective": tuned.result.upper,
                    "lower_bound": tuned.result.lower,
                    "gap": tuned.result.relative_gap,
                    "time_total_s": elapsed,
                    "time_cuts_s": tuned.result.wall_times["covsel_s"],
                    "cuts": tuned.result.cuts_generated,
                    "nodes": tuned.result.nodes_explored,
                })
                if config.mb_baseline:
                    rows.append(_mb_row(instance, tuned.k, criterion, seed))
            except Exception as exc:
                failures.append({
                    "seed": seed, "method": method, "criterion": criterion,
                    "error": f"{type(exc).__name__}: {exc}",
                })
    return rows, failures


def run_experiment(config, seeds):
    """Generate, tune, solve and score one row per (seed, method, criterion).

    Returns (rows, summary): rows follow RESULT_COLUMNS; the summary holds
    per-(method, criterion) means and standard deviations plus any per-row
    failures (failed cells are recorded and skipped, the run continues).
    """
    seeds = list(seeds)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(lambda s: _run_seed(config, s), seeds))
    else:
        outcomes = [_run_seed(config, s) for s in seeds]

    rows = [row for out, _ in outcomes for row in out]
    failures = [f for _, fails in outcomes for f in fails]

    summary = {"config": {
        "p": config.p, "n": config.resolved()[0], "t": config.t,
        "k_true": config.resolved()[1], "seeds": seeds,
    }, "groups": {}, "failures": failures}
    for method in sorted({r["method"] for r in rows}):
        for criterion in sorted({r["criterion"] for r in rows}):
            group = [r for r in rows
                     if r["method"] == method and r["criterion"] == criterion]
            if not group:
                continue
            stats = {}
            for metric in ("A", "FDR", "nll_test", "k_selected"):
                vals = [r[metric] for r in group if not math.isnan(r[metric])]
                if vals:
                    stats[metric] = {
                        "mean": statistics.fmean(vals),
                        "std": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
                    }
            summary["groups"][f"{method}/{criterion}"] = stats
    return rows, summary


def write_results_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        values = [row.get(c, "") for c in RESULT_COLUMNS]
        writer.writerow([repr(v) if isinstance(v, float) else v for v in values])


def write_summary_json(summary, fh):
    json.dump(summary, fh, indent=2, sort_keys=True)
    fh.write("\n")
