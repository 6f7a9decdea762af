"""Certifiably optimal outer loop over binary supports.

A bespoke best-first branch-and-bound on upper-triangular pair variables
with an accumulated pool of affine cuts.  New cuts are generated lazily:
whenever an integer candidate support with pool value below the incumbent
turns up, its covariance-selection subproblem is solved and the resulting
dual certificate is folded into a cut that is valid for every support (and
every budget).  The algorithm always holds matched upper and lower bounds,
so early termination still yields a certified suboptimality gap.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import structure as structure_mod
from .covsel import BigM, Ridge, Support, conjugate_weights, solve_covsel
from .errors import Infeasible, InvalidInput, Unconverged

_TIE = 1e-12
_EMPTY = np.empty(0, dtype=np.int64)


@lru_cache(maxsize=32)
class _PairSpace:
    """Canonical lexicographic indexing of strictly-upper pairs for one dim."""

    def __init__(self, p):
        self.p = p
        self.pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
        self.index = {pair: n for n, pair in enumerate(self.pairs)}
        self.n = len(self.pairs)

    def to_indices(self, pairs):
        return frozenset(self.index[pair] for pair in pairs)

    def to_support(self, idx_set):
        return Support(self.p, tuple(self.pairs[n] for n in sorted(idx_set)))


@dataclass
class Cut:
    """Affine lower bound  h(Z) >= c0 - sum_{(i,j) in Z} w_ij  with w >= 0.

    ``order`` lists pair indices by descending weight (ties lexicographic),
    ``prefix`` holds cumulative sums over that order and ``rank`` inverts
    it, so greedy top-r masses under fixed assignments cost O(depth).
    """

    c0: float
    weights: np.ndarray
    source_support: Support
    order: np.ndarray = field(default=None, repr=False)
    prefix: np.ndarray = field(default=None, repr=False)
    rank: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.order is None:
            n = len(self.weights)
            self.order = np.lexsort((np.arange(n), -self.weights)).astype(np.int64)
            self.prefix = np.concatenate(
                ([0.0], np.cumsum(self.weights[self.order]))
            )
            self.rank = np.empty(n, dtype=np.int64)
            self.rank[self.order] = np.arange(n, dtype=np.int64)

    def value_at(self, idx_sorted):
        """Cut value at a support given as a sorted index list/array."""
        if len(idx_sorted) == 0:
            return self.c0
        return self.c0 - float(self.weights[list(idx_sorted)].sum())

    def top_free(self, fixed, r, want_selection=False):
        """Mass (and optionally ids) of the r largest weights off ``fixed``.

        ``fixed`` is a sorted integer array of unavailable pair indices.
        """
        n = len(self.weights)
        if r <= 0:
            return 0.0, []
        if len(fixed) == 0:
            m = min(r, n)
            sel = self.order[:m].tolist() if want_selection else None
            return float(self.prefix[m]), sel
        ranks = np.sort(self.rank[fixed])
        m = r
        below = 0
        for rk in ranks:
            if rk < m:
                m += 1
                below += 1
            else:
                break
        m = min(m, n)
        mass = float(self.prefix[m])
        if below:
            mass -= float(self.weights[self.order[ranks[:below]]].sum())
        sel = None
        if want_selection:
            blocked = set(ranks[:below].tolist())
            sel = [int(self.order[t]) for t in range(m) if t not in blocked]
        return mass, sel


@dataclass
class MasterState:
    """Cut pool plus bookkeeping for one master problem."""

    dim: int
    budget: int
    cuts: list = field(default_factory=list)
    structural: tuple = ()
    incumbent: tuple = None  # (Support, value)
    lower_bound: float = -math.inf
    nodes_explored: int = 0
    cuts_generated: int = 0


@dataclass
class SolveResult:
    """Outcome of one certified solve."""

    support: Support
    theta: np.ndarray
    upper: float
    lower: float
    relative_gap: float
    cuts_generated: int
    nodes_explored: int
    wall_times: dict
    timed_out: bool = False
    pool_size: int = 0


def relative_gap(upper, lower):
    return (upper - lower) / max(1.0, abs(upper))


def make_cut(sigma, sol, z, reg):
    """Fold a dual certificate into a support-space cut.

    c0 collects the constant part (log-det term and diagonal conjugates),
    w_ij = 2 * conj_ij(R_ij) weights each upper-triangular variable.  The
    cut reproduces sol.dual_value at the generating support exactly, and
    lower-bounds h at every other support by weak duality.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    space = _PairSpace(p)
    conj = conjugate_weights(sol.dual_point, reg)
    iu, ju = np.triu_indices(p, k=1)
    weights = 2.0 * conj[iu, ju]
    own = sorted(space.index[pair] for pair in z.pairs)
    c0 = sol.dual_value + float(weights[own].sum()) if own else sol.dual_value
    return Cut(c0=c0, weights=weights, source_support=z)


def _cut_bound(cut, f1, fixed, r):
    """c0 minus fixed-one weights minus the r largest free weights."""
    total = float(cut.weights[f1].sum()) if len(f1) else 0.0
    mass, _ = cut.top_free(fixed, r)
    return cut.c0 - total - mass


def node_bound(state, fixed_one, fixed_zero):
    """Valid lower bound on every completion of a partial assignment.

    Max over cuts of the per-cut greedy bound; exact for a single cut.
    Raises Infeasible when the structural constraints admit no completion.
    """
    space = _PairSpace(state.dim)
    f1 = space.to_indices(fixed_one)
    f0 = space.to_indices(fixed_zero)
    if f1 & f0:
        raise InvalidInput("fixed_one and fixed_zero overlap")
    free = [space.pairs[n] for n in range(space.n) if n not in f1 and n not in f0]
    budget_left = state.budget - len(f1)
    ok = structure_mod.prune_partial(
        set(fixed_one), set(fixed_zero), free, budget_left, state.structural,
        state.dim,
    )
    if not ok:
        raise Infeasible("no completion satisfies the structural constraints")
    f1_arr = np.fromiter(sorted(f1), dtype=np.int64, count=len(f1))
    fixed = np.fromiter(sorted(f1 | f0), dtype=np.int64, count=len(f1) + len(f0))
    r = state.budget - len(f1)
    return max(_cut_bound(cut, f1_arr, fixed, r) for cut in state.cuts)


class _Tree:
    """Best-first branch-and-bound shared by the master and the lazy solver.

    ``evaluate`` is called on integer candidates (frozensets of pair
    indices) and may append cuts to ``self.cuts``; it returns the
    candidate's incumbent value or None to leave the incumbent alone.
    """

    def __init__(self, p, k, cuts, structural, eps, evaluate, deadline=None,
                 trace=None, max_nodes=None):
        self.space = _PairSpace(p)
        self.p = p
        self.k = k
        self.cuts = cuts
        self.structural = tuple(structural)
        self.eps = eps
        self.evaluate = evaluate
        self.deadline = deadline
        self.trace = trace
        self.max_nodes = max_nodes
        self.inc_set = None
        self.inc_value = math.inf
        self.lower = -math.inf
        self.dropped_lb = math.inf
        self.nodes = 0
        self.timed_out = False
        self._heap = []
        self._seq = 0
        # stacked pool view for fast candidate evaluation
        self._c0s = np.empty(0)
        self._wmat = np.empty((0, self.space.n))

        root_one = set()
        root_zero = set()
        for cs in self.structural:
            if isinstance(cs, structure_mod.KnownOne):
                root_one |= {self.space.index[pair] for pair in cs.pairs}
            elif isinstance(cs, structure_mod.KnownZero):
                root_zero |= {self.space.index[pair] for pair in cs.pairs}
        if len(root_one) > k:
            raise Infeasible(f"{len(root_one)} known-one pairs exceed budget {k}")
        self.root = (frozenset(root_one), frozenset(root_zero))
        if not self._prune_ok(*self.root):
            raise Infeasible("structural constraints admit no support")

    # -- helpers ----------------------------------------------------------

    def _sync_pool(self):
        n = len(self.cuts)
        if len(self._c0s) == n:
            return
        self._c0s = np.array([c.c0 for c in self.cuts])
        self._wmat = np.vstack([c.weights for c in self.cuts])

    def _prune_ok(self, f1, f0):
        if not self.structural:
            return True
        pairs_one = {self.space.pairs[n] for n in f1}
        pairs_zero = {self.space.pairs[n] for n in f0}
        free = [
            self.space.pairs[n]
            for n in range(self.space.n)
            if n not in f1 and n not in f0
        ]
        return structure_mod.prune_partial(
            pairs_one, pairs_zero, free, self.k - len(f1), self.structural, self.p
        )

    @staticmethod
    def _as_arrays(f1, f0):
        f1_arr = np.fromiter(sorted(f1), dtype=np.int64, count=len(f1))
        fixed = np.fromiter(
            sorted(f1 | f0), dtype=np.int64, count=len(f1) + len(f0)
        )
        return f1_arr, fixed

    def _bound(self, f1, f0, start=0):
        f1_arr, fixed = self._as_arrays(f1, f0)
        r = self.k - len(f1)
        best = -math.inf
        for cut in self.cuts[start:]:
            b = _cut_bound(cut, f1_arr, fixed, r)
            if b > best:
                best = b
        return best

    def _pool_value(self, idx_sorted):
        self._sync_pool()
        if not len(self._c0s):
            return -math.inf
        if len(idx_sorted) == 0:
            return float(self._c0s.max())
        vals = self._c0s - self._wmat[:, idx_sorted].sum(axis=1)
        return float(vals.max())

    def _feasible_complete(self, idx_set):
        if len(idx_set) > self.k:
            return False
        if not self.structural:
            return True
        z = self.space.to_support(idx_set)
        return structure_mod.check_complete(z, self.structural)

    def _consider(self, idx_set, value):
        if value < self.inc_value - _TIE:
            self.inc_value = value
            self.inc_set = frozenset(idx_set)
            if self.trace:
                self.trace({"event": "incumbent", "value": value,
                            "support_size": len(idx_set)})

    def seed_incumbent(self, idx_set, value):
        if self._feasible_complete(idx_set):
            self._consider(idx_set, value)

    # -- main loop --------------------------------------------------------

    def _push(self, f1, f0, bound, stamp):
        self._seq += 1
        heapq.heappush(self._heap, (bound, self._seq, f1, f0, stamp))

    def _finish(self, bound):
        self.lower = min(max(self.lower, bound), self.dropped_lb, self.inc_value)

    def run(self):
        f1, f0 = self.root
        self._push(f1, f0, self._bound(f1, f0), len(self.cuts))

        while self._heap:
            if self.deadline is not None and time.monotonic() > self.deadline:
                self.timed_out = True
                stale = min(entry[0] for entry in self._heap)
                self._finish(max(self.lower, stale))
                return
            bound, _, f1, f0, stamp = heapq.heappop(self._heap)
            if stamp < len(self.cuts):
                nb = max(bound, self._bound(f1, f0, start=stamp))
                if nb > bound + _TIE:
                    self._push(f1, f0, nb, len(self.cuts))
                    continue
                bound = nb
            self.lower = max(self.lower, bound)
            if self.inc_set is not None and bound >= self.inc_value - self.eps:
                # heap is ordered: every remaining node is at least this good
                self._finish(bound)
                return
            self.nodes += 1
            if self.max_nodes is not None and self.nodes > self.max_nodes:
                self.timed_out = True
                self._finish(bound)
                return
            if self.trace:
                self.trace({"event": "node", "bound": bound,
                            "depth": len(f1) + len(f0)})

            f1_arr, fixed = self._as_arrays(f1, f0)
            r = self.k - len(f1)
            pool_before = len(self.cuts)

            # integer candidates: each cut's greedy completion of this node
            selections = []
            seen = set()
            for cut in self.cuts:
                _, sel = cut.top_free(fixed, r, want_selection=True)
                sel = sel or []
                selections.append(sel)
                cand = frozenset(f1 | set(sel))
                if cand in seen:
                    continue
                seen.add(cand)
                if not self._feasible_complete(cand):
                    continue
                idx_sorted = sorted(cand)
                pool_val = self._pool_value(idx_sorted)
                value = self.evaluate(cand, idx_sorted, pool_val,
                                      self.inc_value, self.eps)
                if value is not None:
                    self._consider(cand, value)

            if len(self.cuts) > pool_before:
                bound = max(bound, self._bound(f1, f0, start=pool_before))
            if self.inc_set is not None and bound >= self.inc_value - self.eps:
                continue  # node closed by the refreshed bound

            # branch on the free pair most demanded by the cuts' selections
            free_count = {}
            for sel in selections:
                for pid in sel:
                    free_count[pid] = free_count.get(pid, 0) + 1
            if r <= 0 or not free_count:
                # complete node that stays below the incumbent: remember its
                # bound so the final certificate stays honest
                self.dropped_lb = min(self.dropped_lb, bound)
                continue
            ncuts = len(self.cuts)
            best_pid = min(
                free_count, key=lambda pid: (-(2 * free_count[pid] - ncuts), pid)
            )
            for child_f1, child_f0 in (
                (f1 | {best_pid}, f0),
                (f1, f0 | {best_pid}),
            ):
                child_f1 = frozenset(child_f1)
                child_f0 = frozenset(child_f0)
                if len(child_f1) > self.k:
                    continue
                if not self._prune_ok(child_f1, child_f0):
                    continue
                self._push(child_f1, child_f0,
                           max(bound, self._bound(child_f1, child_f0)),
                           len(self.cuts))

        # tree exhausted: the incumbent is optimal
        self.lower = min(self.inc_value, self.dropped_lb)


def solve_master(state, gap_tol=1e-12):
    """Optimal support for the current cut collection, with its bound eta.

    Deterministic best-first search; leaf evaluation is the exact
    max-of-cuts affine value.
    """
    if not state.cuts:
        raise InvalidInput("master needs at least one cut")

    def evaluate(cand, idx_sorted, pool_val, inc_value, eps):
        return pool_val

    tree = _Tree(state.dim, state.budget, state.cuts, state.structural,
                 gap_tol, evaluate)
    tree.run()
    if tree.inc_set is None:
        raise Infeasible("no feasible support found")
    support = tree.space.to_support(tree.inc_set)
    state.incumbent = (support, tree.inc_value)
    state.lower_bound = tree.lower
    state.nodes_explored += tree.nodes
    return support, tree.inc_value


def _default_warm(sigma, k):
    from . import model  # local import: model builds on this module

    return model.warm_start(sigma, sigma.shape[0], k)


def _repair_warm(space, warm, k, structural):
    """Force known pairs in/out of the warm support and trim to budget."""
    pairs = set(warm.pairs)
    forced = set()
    for cs in structural:
        if isinstance(cs, structure_mod.KnownOne):
            forced |= set(cs.pairs)
        elif isinstance(cs, structure_mod.KnownZero):
            pairs -= cs.pairs
    pairs |= forced
    if len(pairs) > k:
        removable = sorted(pairs - forced)
        while len(pairs) > k and removable:
            pairs.discard(removable.pop())
    return Support(space.p, tuple(sorted(pairs)))


def _swap_search(space, sigma, k, structural, start_idx, eval_support,
                 deadline, rounds=8, drop_width=4, add_width=10):
    """Greedy swap/add local search around an incumbent support.

    Drops the weakest entries (by |theta|) and admits the pairs with the
    largest dual residual |W - S|; every evaluation also lands a cut, so
    the search both improves the incumbent and strengthens the pool.
    Returns the best (index set, solution) found.
    """
    forced = set()
    for cs in structural:
        if isinstance(cs, structure_mod.KnownOne):
            forced |= {space.index[pair] for pair in cs.pairs}
    banned = set()
    for cs in structural:
        if isinstance(cs, structure_mod.KnownZero):
            banned |= {space.index[pair] for pair in cs.pairs}

    def feasible(idx_set):
        if len(idx_set) > k:
            return False
        if not structural:
            return True
        return structure_mod.check_complete(
            space.to_support(idx_set), structural
        )

    best_key = frozenset(start_idx)
    best_sol = eval_support(best_key)
    for _ in range(rounds):
        if deadline is not None and time.monotonic() > deadline:
            break
        theta = best_sol.theta
        resid = np.abs(best_sol.w_inv - sigma)
        cur = sorted(best_key)
        cur_pairs = [space.pairs[n] for n in cur]
        droppable = [
            n for n, pair in sorted(
                zip(cur, cur_pairs), key=lambda t: abs(theta[t[1]])
            )
            if n not in forced
        ][:drop_width]
        outside = [
            (resid[space.pairs[n]], n)
            for n in range(space.n)
            if n not in best_key and n not in banned
        ]
        outside.sort(key=lambda t: (-t[0], t[1]))
        adders = [n for _, n in outside[:add_width]]

        candidates = []
        if len(best_key) < k:
            for n in adders:
                candidates.append(best_key | {n})
        for d in droppable:
            base = best_key - {d}
            for n in adders:
                candidates.append(base | {n})

        improved = None
        for cand in candidates:
            cand = frozenset(cand)
            if cand == best_key or not feasible(cand):
                continue
            sol = eval_support(cand)
            if sol.primal_value < best_sol.primal_value - _TIE:
                best_sol = sol
                improved = cand
        if improved is None:
            break
        best_key = improved
    return best_key, best_sol


def _check_reg_finite(reg, p):
    if isinstance(reg, BigM):
        if np.isscalar(reg.bounds):
            finite = np.isfinite(reg.bounds)
        else:
            b = np.asarray(reg.bounds, dtype=np.float64).copy()
            np.fill_diagonal(b, 0.0)
            finite = np.isfinite(b).all()
        if not finite:
            raise InvalidInput(
                "cutting-plane solves need finite off-diagonal big-M bounds; "
                "infinite bounds make every cut vacuous"
            )


def solve(
    sigma,
    k,
    reg,
    structural=(),
    warm=None,
    eps=1e-4,
    time_limit_s=None,
    trace=None,
    multi_tree=False,
    covsel_gap_tol=None,
    covsel_max_iter=200_000,
    max_nodes=None,
    _shared=None,
):
    """Certified cardinality-constrained precision estimation.

    Single-tree lazy-cut branch-and-bound by default (``multi_tree=True``
    rebuilds the master tree after every cut, the literal text-book loop,
    for debugging).  Terminates when the global lower bound reaches the
    incumbent minus ``eps`` (absolute) or the time limit elapses; either
    way the returned incumbent carries a valid certified gap.
    """
    t_start = time.monotonic()
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    if k < 0:
        raise InvalidInput("budget k must be nonnegative")
    if not eps > 0:
        raise InvalidInput("eps must be positive")
    _check_reg_finite(reg, p)
    space = _PairSpace(p)
    k = min(k, space.n)
    if covsel_gap_tol is None:
        covsel_gap_tol = min(1e-5, max(0.1 * eps, 1e-11))
    deadline = None if time_limit_s is None else t_start + time_limit_s

    shared = _shared if _shared is not None else {"cuts": [], "cache": {}}
    cuts = shared["cuts"]
    cache = shared["cache"]  # frozenset(pidx) -> CovSelSolution
    pool_start = len(cuts)
    covsel_time = [0.0]
    best_theta_hint = [None]

    def eval_support(idx_set):
        key = frozenset(idx_set)
        if key in cache:
            return cache[key]
        z = space.to_support(key)
        t0 = time.monotonic()
        try:
            sol = solve_covsel(
                sigma, z, reg,
                gap_tol=covsel_gap_tol,
                max_iter=covsel_max_iter,
                theta0=best_theta_hint[0],
            )
        except Unconverged as exc:
            sol = exc.solution
        covsel_time[0] += time.monotonic() - t0
        cache[key] = sol
        if math.isfinite(sol.dual_value):
            cuts.append(make_cut(sigma, sol, z, reg))
            if trace:
                trace({"event": "cut", "support_size": len(key),
                       "value": sol.primal_value, "dual": sol.dual_value})
        return sol

    # initial cut and incumbent from the warm-start support
    if k >= space.n:
        warm_support = space.to_support(frozenset(range(space.n)))
    elif warm is None:
        warm_support = _default_warm(sigma, k)
    else:
        warm_support = warm
    warm_support = _repair_warm(space, warm_support, k, structural)
    warm_idx = frozenset(space.index[pair] for pair in warm_support.pairs)
    warm_sol = eval_support(warm_idx)
    best_theta_hint[0] = warm_sol.theta
    warm_idx, warm_sol = _swap_search(
        space, sigma, k, structural, warm_idx, eval_support, deadline,
    )
    best_theta_hint[0] = warm_sol.theta

    if multi_tree:
        result = _solve_multi_tree(
            space, sigma, k, reg, structural, eps, deadline, trace,
            cuts, cache, eval_support, warm_idx, max_nodes,
        )
    else:
        def evaluate(cand, idx_sorted, pool_val, inc_value, eps_):
            if pool_val >= inc_value - eps_:
                return None
            sol = eval_support(cand)
            best_theta_hint[0] = sol.theta
            return sol.primal_value

        tree = _Tree(p, k, cuts, structural, eps, evaluate,
                     deadline=deadline, trace=trace, max_nodes=max_nodes)
        tree.seed_incumbent(warm_idx, warm_sol.primal_value)
        tree.run()
        if tree.inc_set is None:
            raise Infeasible("no feasible support found")
        result = (tree.inc_set, tree.inc_value, tree.lower, tree.nodes,
                  tree.timed_out)

    inc_set, upper, lower, nodes, timed_out = result
    sol = cache[frozenset(inc_set)]
    total = time.monotonic() - t_start
    return SolveResult(
        support=space.to_support(inc_set),
        theta=sol.theta,
        upper=upper,
        lower=lower,
        relative_gap=relative_gap(upper, lower),
        cuts_generated=len(cuts) - pool_start,
        nodes_explored=nodes,
        wall_times={
            "total_s": total,
            "covsel_s": covsel_time[0],
            "master_s": total - covsel_time[0],
        },
        timed_out=timed_out,
        pool_size=len(cuts),
    )


def _solve_multi_tree(space, sigma, k, reg, structural, eps, deadline, trace,
                      cuts, cache, eval_support, warm_idx, max_nodes):
    """Literal cutting-plane loop: full master re-solve after every cut."""
    p = space.p
    inc_set = None
    inc_value = math.inf
    warm_sol = cache[warm_idx]
    state = MasterState(dim=p, budget=k, cuts=cuts, structural=tuple(structural))
    z0 = space.to_support(warm_idx)
    if structure_mod.check_complete(z0, tuple(structural)):
        inc_set, inc_value = warm_idx, warm_sol.primal_value
    lower = -math.inf
    nodes = 0
    timed_out = False
    while True:
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        support, eta = solve_master(state, gap_tol=min(eps * 1e-3, 1e-12))
        nodes += state.nodes_explored
        state.nodes_explored = 0
        lower = max(lower, eta)
        if inc_set is not None and eta >= inc_value - eps:
            break
        idx = frozenset(space.index[pair] for pair in support.pairs)
        before = len(cuts)
        sol = eval_support(idx)
        if sol.primal_value < inc_value - _TIE:
            inc_set, inc_value = idx, sol.primal_value
        if len(cuts) == before:
            break  # no new information; stop rather than loop
    if inc_set is None:
        raise Infeasible("no feasible support found")
    return inc_set, inc_value, min(lower, inc_value), nodes, timed_out


def solve_path(sigma, k_list, reg, structural=(), warm=None, eps=1e-4,
               time_limit_s=None, trace=None, **kwargs):
    """Solve a strictly decreasing sequence of budgets, reusing every cut.

    Cuts are budget-independent lower bounds, so the pool accumulated at
    larger budgets remains valid and keeps tightening smaller ones.
    """
    k_list = list(k_list)
    if any(b >= a for a, b in zip(k_list, k_list[1:])):
        raise InvalidInput("k_list must be strictly decreasing")
    p = np.asarray(sigma).shape[0]
    shared = {"cuts": [], "cache": {}}
    results = []
    step_warm = warm
    ranked_prev = None
    for k in k_list:
        if ranked_prev is not None:
            # thread the previous incumbent forward: strongest entries first
            step_warm = Support(p, tuple(ranked_prev[:k]))
        res = solve(
            sigma, k, reg, structural=structural, warm=step_warm, eps=eps,
            time_limit_s=time_limit_s, trace=trace, _shared=shared, **kwargs,
        )
        results.append(res)
        ranked_prev = sorted(
            res.support.pairs,
            key=lambda ij: (-abs(res.theta[ij[0], ij[1]]), ij[0], ij[1]),
        )
    return results
