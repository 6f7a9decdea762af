"""Hyper-parameter tuning, model-selection criteria and warm starts.

Grid search over the cardinality budget and the regularization strength
(log-spaced multipliers on the data-driven base scales), scored either by
an extended information criterion or by hold-out likelihood; node-wise
lasso neighborhood selection provides warm-start supports.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cutplane, linalg
from .covsel import BigM, Ridge, Support
from .errors import InvalidInput

ZERO_TOL = 1e-10  # numerical zero whenever a support is read off a matrix


def base_scales(sigma):
    """Data-driven anchors (M0, gamma0) for the regularization grid.

    M0 = p / sum_ij |S_ij| and gamma0 = 4p / sum_ij S_ij^2 (entrywise
    norms); both are lower-edge scales derived from norm bounds on the
    optimal precision matrix, so grids should multiply upward from them.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    l1 = float(np.abs(sigma).sum())
    l2sq = float((sigma * sigma).sum())
    if l1 == 0.0:
        raise InvalidInput("zero covariance matrix")
    return p / l1, 4.0 * p / l2sq


def ebic(theta, sigma_train, n, p):
    """Extended BIC: n * fit + ||T||_0 * (log n + 2 log p).

    ||T||_0 counts nonzero strictly-lower-triangular entries (|.| above
    1e-10); the diagonal never counts.
    """
    theta = np.asarray(theta, dtype=np.float64)
    fit = float(np.sum(sigma_train * theta)) - linalg.log_det_spd(theta)
    tril = np.tril(theta, -1)
    nnz = int(np.count_nonzero(np.abs(tril) > ZERO_TOL))
    return n * fit + nnz * (math.log(n) + 2.0 * math.log(p))


def holdout_nll(theta, sigma_eval):
    """Negative log-likelihood <S_eval, T> - log det T (constants dropped)."""
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.sum(sigma_eval * theta)) - linalg.log_det_spd(theta)


# ---------------------------------------------------------------------------
# node-wise lasso warm start


def _as_covariance(sigma_or_data, p):
    arr = np.asarray(sigma_or_data, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInput("expected a 2-d array of samples or a covariance")
    if arr.shape == (p, p) and np.abs(arr - arr.T).max(initial=0.0) <= 1e-8 * max(
        1.0, np.abs(arr).max(initial=0.0)
    ):
        return 0.5 * (arr + arr.T)
    if arr.shape[1] != p:
        raise InvalidInput(f"data has {arr.shape[1]} columns, expected {p}")
    centered = arr - arr.mean(axis=0)
    return centered.T @ centered / arr.shape[0]


def _correlation(sigma):
    d = np.sqrt(np.clip(np.diagonal(sigma), 1e-300, None))
    return sigma / np.outer(d, d)


def _nodewise_lasso_sweep(corr, lam, beta, max_sweeps=200, tol=1e-7):
    """Cyclic coordinate descent on all node-wise lasso problems at once.

    ``beta[j, i]`` is the coefficient of predictor j in the regression of
    variable i on the others; the diagonal stays zero.  Operates purely on
    the correlation matrix (unit-diagonal Gram matrix).
    """
    p = corr.shape[0]
    u = corr @ beta  # u[:, i] = corr @ beta_i
    for _ in range(max_sweeps):
        delta_max = 0.0
        for j in range(p):
            s = corr[j, :] - u[j, :] + beta[j, :]
            new = np.sign(s) * np.maximum(np.abs(s) - lam, 0.0)
            new[j] = 0.0
            delta = new - beta[j, :]
            nz = np.abs(delta) > 0
            if nz.any():
                delta_max = max(delta_max, float(np.abs(delta).max()))
                beta[j, :] = new
                u += np.outer(corr[:, j], delta)
        if delta_max < tol:
            break
    return beta


def warm_start(sigma_or_data, p, k, lasso_lambda_path=None):
    """Support of size min(k, available) from node-wise lasso selection.

    Regresses each variable on the others with an l1 penalty (on the
    correlation matrix), sweeping the penalty downward until the union of
    symmetrized selected pairs (OR rule) holds at least k pairs, then keeps
    the k pairs of largest aggregate coefficient magnitude.  Falls back to
    ranking |S_ij| when the path never activates enough coefficients.
    """
    if k <= 0:
        return Support(p)
    sigma = _as_covariance(sigma_or_data, p)
    corr = _correlation(sigma)
    n_pairs = p * (p - 1) // 2
    k = min(k, n_pairs)

    off = np.abs(corr - np.diag(np.diagonal(corr)))
    lam_max = float(off.max(initial=0.0))
    if lasso_lambda_path is None:
        if lam_max > 0:
            lasso_lambda_path = np.geomspace(lam_max * 0.95, lam_max * 0.01, 25)
        else:
            lasso_lambda_path = []

    beta = np.zeros((p, p))
    agg = np.zeros((p, p))  # running max of |beta_ji| + |beta_ij|
    selected = set()
    for lam in lasso_lambda_path:
        beta = _nodewise_lasso_sweep(corr, float(lam), beta)
        mag = np.abs(beta) + np.abs(beta).T
        agg = np.maximum(agg, mag)
        iu, ju = np.nonzero(np.triu(mag, 1) > 0)
        selected.update(zip(iu.tolist(), ju.tolist()))
        if len(selected) >= k:
            break

    ranked = sorted(selected, key=lambda ij: (-agg[ij[0], ij[1]], ij[0], ij[1]))
    pairs = ranked[:k]
    if len(pairs) < k:
        have = set(pairs)
        rest = [
            (i, j)
            for i in range(p)
            for j in range(i + 1, p)
            if (i, j) not in have
        ]
        rest.sort(key=lambda ij: (-abs(sigma[ij[0], ij[1]]), ij[0], ij[1]))
        pairs.extend(rest[: k - len(pairs)])
    return Support(p, tuple(pairs))


# ---------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class TuningGrid:
    """Search grid: descending budgets x log-spaced regularization multipliers."""

    k_values: tuple
    reg_values: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    criterion: str = "holdout"

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        if any(b >= a for a, b in zip(ks, ks[1:])):
            raise InvalidInput("k_values must be strictly decreasing")
        mults = tuple(float(m) for m in self.reg_values)
        if any(m <= 0 for m in mults):
            raise InvalidInput("reg multipliers must be positive")
        if self.criterion not in ("holdout", "ebic"):
            raise InvalidInput(f"unknown criterion {self.criterion!r}")
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "reg_values", mults)


@dataclass
class TunedModel:
    """Grid-search outcome: the chosen cell plus the full table."""

    k: int
    reg_multiplier: float
    reg: object
    result: cutplane.SolveResult
    criterion_value: float
    table: list = field(default_factory=list)


GRID_CSV_COLUMNS = (
    "k", "reg_multiplier", "objective", "lower_bound", "gap", "criterion",
    "time_s", "cuts",
)


def write_grid_csv(table, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(GRID_CSV_COLUMNS)
    for row in table:
        values = [row.get(c, "") for c in GRID_CSV_COLUMNS]
        writer.writerow([repr(v) if isinstance(v, float) else v for v in values])


def _make_reg(reg_kind, mult, m0, gamma0):
    if reg_kind == "bigm":
        return BigM(bounds=mult * m0)
    if reg_kind == "ridge":
        return Ridge(gamma=mult * gamma0)
    raise InvalidInput(f"unknown regularizer kind {reg_kind!r}")


def tune(
    sigma_train,
    sigma_val,
    n_train,
    grid,
    reg_kind="bigm",
    eps=1e-4,
    time_limit_s=None,
    threads=1,
    warm=None,
    covsel_max_iter=200_000,
):
    """Grid search over (k, regularization), scored on the grid's criterion.

    Each multiplier runs one descending-k path so that cuts accumulated at
    large budgets keep serving the smaller ones; distinct multipliers are
    independent and may run on separate threads.  Returns the argmin cell
    (ties resolved toward smaller k, then smaller multiplier) with the
    whole table attached.
    """
    sigma_train = np.asarray(sigma_train, dtype=np.float64)
    p = sigma_train.shape[0]
    m0, gamma0 = base_scales(sigma_train)

    def run_multiplier(mult):
        reg = _make_reg(reg_kind, mult, m0, gamma0)
        rows = []
        try:
            results = cutplane.solve_path(
                sigma_train, grid.k_values, reg, eps=eps,
                time_limit_s=time_limit_s, warm=warm,
                covsel_max_iter=covsel_max_iter,
            )
        except Exception as exc:  # record the failure, skip the cells
            return [
                {"k": k, "reg_multiplier": mult, "error": str(exc)}
                for k in grid.k_values
            ]
        for k, res in zip(grid.k_values, results):
            if grid.criterion == "ebic":
                crit = ebic(res.theta, sigma_train, n_train, p)
            else:
                crit = holdout_nll(res.theta, sigma_val)
            rows.append({
                "k": k,
                "reg_multiplier": mult,
                "objective": res.upper,
                "lower_bound": res.lower,
                "gap": res.relative_gap,
                "criterion": crit,
                "time_s": res.wall_times["total_s"],
                "cuts": res.cuts_generated,
                "_result": res,
                "_reg": reg,
            })
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_multiplier, grid.reg_values))
    else:
        chunks = [run_multiplier(m) for m in grid.reg_values]

    table = [row for chunk in chunks for row in chunk]
    scored = [row for row in table if "error" not in row]
    if not scored:
        first = next(row["error"] for row in table if "error" in row)
        raise InvalidInput(f"every grid cell failed (first error: {first})")
    best = min(scored, key=lambda r: (r["criterion"], r["k"], r["reg_multiplier"]))
    return TunedModel(
        k=best["k"],
        reg_multiplier=best["reg_multiplier"],
        reg=best["_reg"],
        result=best["_result"],
        criterion_value=best["criterion"],
        table=table,
    )
