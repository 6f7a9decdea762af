"""Regularized covariance selection on a fixed support.

Solves  min_{T > 0}  <S, T> - log det T + reg(T)  subject to T_ij = 0 off
the support, by greedy coordinate descent: every candidate coordinate's
closed-form best step and exact objective decrease are computed from the
cached inverse W = T^-1, only the best coordinate is updated, and W is
maintained in O(p^2) per iteration.  Each solve carries a dual certificate
(a feasible point of the Fenchel dual), so results come with a duality gap
that remains valid under early termination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInput, NotPositiveDefinite, SingularUpdate, Unconverged

_TINY = 1e-300


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Support:
    """Symmetric binary support: a set of strictly-upper pairs plus the diagonal.

    ``pairs`` is a sorted tuple of (i, j) with i < j; the diagonal is always
    implicitly included.  Hashable, so supports can key caches.
    """

    dim: int
    pairs: tuple = ()

    def __post_init__(self):
        normalized = set()
        for i, j in self.pairs:
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if not (0 <= i < j < self.dim):
                raise InvalidInput(f"pair ({i},{j}) out of range for dim {self.dim}")
            normalized.add((i, j))
        object.__setattr__(self, "pairs", tuple(sorted(normalized)))

    @classmethod
    def from_pairs(cls, dim, pairs, budget=None):
        """Build a support, optionally validating a cardinality budget."""
        z = cls(dim, tuple(pairs))
        if budget is not None and len(z.pairs) > budget:
            raise InvalidInput(f"{len(z.pairs)} pairs exceed budget {budget}")
        return z

    @classmethod
    def from_matrix(cls, theta, tol=1e-10):
        """Support read off the nonzero pattern of a symmetric matrix."""
        theta = np.asarray(theta)
        p = theta.shape[0]
        pairs = [
            (i, j)
            for i in range(p)
            for j in range(i + 1, p)
            if abs(theta[i, j]) > tol
        ]
        return cls(p, tuple(pairs))

    @property
    def npairs(self):
        return len(self.pairs)

    def index_arrays(self):
        """(I, J) integer arrays of the stored pairs (possibly empty)."""
        if not self.pairs:
            return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
        arr = np.asarray(self.pairs, dtype=np.intp)
        return arr[:, 0], arr[:, 1]

    def as_set(self):
        return frozenset(self.pairs)


@dataclass(frozen=True, eq=False)
class BigM:
    """Box regularizer |T_ij| <= M_ij on the support, |T_ii| <= M_ii.

    ``bounds`` is a scalar or a symmetric (p, p) array of off-diagonal
    bounds; ``diag`` is a scalar or (p,) array, infinite by default since
    diagonal entries of a PD matrix must stay away from zero anyway.
    """

    bounds: object = math.inf
    diag: object = math.inf

    def __post_init__(self):
        if np.isscalar(self.bounds):
            if not self.bounds > 0:
                raise InvalidInput("big-M bound must be positive")
        else:
            b = np.asarray(self.bounds, dtype=np.float64)
            if (b < 0).any():
                raise InvalidInput("big-M bounds must be nonnegative")
            object.__setattr__(self, "bounds", b)
        if np.isscalar(self.diag):
            if not self.diag > 0:
                raise InvalidInput("big-M diagonal bound must be positive")
        else:
            d = np.asarray(self.diag, dtype=np.float64)
            if (d <= 0).any():
                raise InvalidInput("big-M diagonal bounds must be positive")
            object.__setattr__(self, "diag", d)

    def off_at(self, ii, jj):
        """Off-diagonal bounds gathered at index arrays (ii, jj)."""
        if np.isscalar(self.bounds):
            return np.full(len(ii), float(self.bounds))
        return np.asarray(self.bounds, dtype=np.float64)[ii, jj]

    def diag_all(self, p):
        if np.isscalar(self.diag):
            return np.full(p, float(self.diag))
        return np.asarray(self.diag, dtype=np.float64)

    def full_matrix(self, p):
        """Dense (p, p) bound matrix, diagonal included."""
        if np.isscalar(self.bounds):
            m = np.full((p, p), float(self.bounds))
        else:
            m = np.array(self.bounds, dtype=np.float64, copy=True)
        np.fill_diagonal(m, self.diag_all(p))
        return m


@dataclass(frozen=True)
class Ridge:
    """Squared-l2 regularizer (1 / 2 gamma) * ||T||_2^2."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInput("ridge gamma must be positive")


@dataclass
class CovSelSolution:
    """Certified solution of one covariance-selection subproblem."""

    theta: np.ndarray
    w_inv: np.ndarray
    primal_value: float
    dual_point: np.ndarray
    dual_value: float
    gap: float
    iterations: int
    support: Support = None
    converged: bool = True


# ---------------------------------------------------------------------------
# conjugates and dual certificates


def conjugate_weights(r, reg):
    """Entrywise Fenchel conjugate of the regularizer evaluated at R.

    BigM gives M_ij * |R_ij| (with the 0 * inf = 0 convention), Ridge gives
    (gamma / 2) * R_ij^2.  All entries are nonnegative.
    """
    r = np.asarray(r, dtype=np.float64)
    if isinstance(reg, Ridge):
        return 0.5 * reg.gamma * r * r
    if isinstance(reg, BigM):
        m = reg.full_matrix(r.shape[0])
        absr = np.abs(r)
        with np.errstate(invalid="ignore"):  # inf * 0 resolved by the where
            prod = m * absr
        return np.where(absr == 0.0, 0.0, prod)
    raise InvalidInput(f"unknown regularizer {reg!r}")


def dual_point(sigma, theta):
    """Dual certificate R = T^-1 - S for a PD iterate T.

    S + R = T^-1 > 0 by construction, so the point is always feasible for
    the dual problem.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    return linalg.inverse_spd(theta) - sigma


def dual_value(sigma, r, z, reg):
    """Lower bound p + log det(S + R) - <Z, conj(R)> for dual-feasible R.

    The inner product runs over the diagonal once and each support pair
    twice (symmetric contributions).  Valid for any feasible R, not only
    the subproblem optimum, which is what makes early termination safe.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    ld = linalg.log_det_spd(sigma + r)
    conj = conjugate_weights(r, reg)
    total = float(np.trace(conj))
    ii, jj = z.index_arrays()
    if len(ii):
        total += 2.0 * float(conj[ii, jj].sum())
    return p + ld - total


def _projected_dual(sigma, w, z, reg):
    """Dual value at R = W - S, with infinite-bound coordinates projected out.

    Under big-M, entries with M = inf contribute +inf to the conjugate
    unless R vanishes there; zeroing those coordinates of R keeps the point
    feasible (S + R must merely stay PD, which is re-checked here) at the
    price of a slightly weaker, still valid, bound.  Returns
    (dual_value, projected_R); the value is -inf when the projected point
    fails factorization.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    r = w - sigma
    if isinstance(reg, BigM):
        dia = reg.diag_all(p)
        d_idx = np.flatnonzero(~np.isfinite(dia))
        if len(d_idx):
            r[d_idx, d_idx] = 0.0
        ii, jj = z.index_arrays()
        if len(ii):
            m_off = reg.off_at(ii, jj)
            inf_o = ~np.isfinite(m_off)
            if inf_o.any():
                r[ii[inf_o], jj[inf_o]] = 0.0
                r[jj[inf_o], ii[inf_o]] = 0.0
    try:
        val = dual_value(sigma, r, z, reg)
    except NotPositiveDefinite:
        return -math.inf, r
    return val, r


# ---------------------------------------------------------------------------
# closed-form coordinate steps

# The off-diagonal move T_ij <- T_ij + t changes the objective by
#   f(t) = 2 s t - log q(t) + pen(t),   q(t) = 1 + 2 b t + a t^2,
# with s = S_ij, b = W_ij, a = W_ij^2 - W_ii W_jj < 0.  q is positive on an
# open interval around 0 and f is strictly convex there, so the stationary
# point is unique; ridge turns the stationarity equation into a cubic,
# big-M leaves a quadratic whose minimizer is clamped into the box.


def _quad_roots(a, b, c):
    """Both real roots of a x^2 + b x + c = 0, elementwise, NaN when absent.

    Callers are expected to run with divide/invalid warnings silenced (the
    solver sets this once; the scalar wrappers do it per call).
    """
    disc = b * b - 4.0 * a * c
    bad = disc < 0
    sq = np.sqrt(np.where(bad, 0.0, disc))
    qq = -0.5 * (b + np.where(b >= 0, sq, -sq))
    r1 = qq / a
    r2 = c / qq
    r1 = np.where(bad, np.nan, r1)
    r2 = np.where(bad, np.nan, r2)
    return r1, r2


def _cubic_roots(c3, c2, c1, c0):
    """Real roots of the cubics, shape (3, n), NaN-padded.

    c3 must be nonzero elementwise.  Trigonometric form when all three
    roots are real, Cardano otherwise.
    """
    u = c2 / c3
    v = c1 / c3
    w0 = c0 / c3
    shift = u / 3.0
    pp = v - u * u / 3.0
    qq = 2.0 * u**3 / 27.0 - u * v / 3.0 + w0
    disc = 0.25 * qq * qq + pp**3 / 27.0
    out = np.full((3, len(u)), np.nan)

    one = disc > 0
    if one.any():
        sq = np.sqrt(disc[one])
        t1 = np.cbrt(-0.5 * qq[one] + sq) + np.cbrt(-0.5 * qq[one] - sq)
        out[0, one] = t1 - shift[one]

    three = ~one
    if three.any():
        p3 = pp[three]
        q3 = qq[three]
        m = 2.0 * np.sqrt(np.maximum(-p3 / 3.0, _TINY))
        arg = 3.0 * q3 / (p3 * m)
        phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
        for k in range(3):
            out[k, three] = m * np.cos(phi - 2.0 * np.pi * k / 3.0) - shift[three]
    return out


def _off_objective(t, s, b, a, th, g):
    q = 1.0 + 2.0 * b * t + a * t * t
    val = 2.0 * s * t - np.log(np.maximum(q, _TINY))
    if g:
        val = val + g * ((th + t) ** 2 - th * th)
    return val


def _golden_min(fun, lo, hi, iters=90):
    """Golden-section minimum of a scalar unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def _offdiag_steps(s, b, wii, wjj, th, reg, m_off=None):
    """Vectorized best off-diagonal steps and exact decreases.

    Arrays gathered at support pairs; returns (t_star, decrease).
    """
    a = b * b - wii * wjj
    a = np.minimum(a, -_TINY)  # PD of the 2x2 minor keeps a < 0
    disc = np.sqrt(np.maximum(wii * wjj, _TINY))
    t_lo = (-b + disc) / a
    t_hi = (-b - disc) / a

    if isinstance(reg, Ridge):
        g = 1.0 / reg.gamma
        c3 = g * a
        c2 = s * a + g * (a * th + 2.0 * b)
        c1 = 2.0 * s * b - a + g * (2.0 * b * th + 1.0)
        c0 = s - b + g * th
        roots = _cubic_roots(c3, c2, c1, c0)
        margin = 1e-12 * (t_hi - t_lo)
        inside = (roots > t_lo + margin) & (roots < t_hi - margin)
        has = inside.any(axis=0)
        first = np.argmax(inside, axis=0)
        t = np.where(has, roots[first, np.arange(roots.shape[1])], 0.0)
        # one Newton polish pass on the stationarity equation
        for _ in range(2):
            q = 1.0 + 2.0 * b * t + a * t * t
            dq = 2.0 * b + 2.0 * a * t
            grad = 2.0 * s - dq / q + 2.0 * g * (th + t)
            hess = (dq * dq - 2.0 * a * q) / (q * q) + 2.0 * g
            t = np.clip(t - grad / hess, t_lo + margin, t_hi - margin)
        if not has.all():
            for idx in np.flatnonzero(~has):
                fun = lambda x, k=idx: _off_objective(
                    np.array([x]), s[k], b[k], a[k], th[k], g
                )[0]
                t[idx] = _golden_min(fun, t_lo[idx] + margin[idx], t_hi[idx] - margin[idx])
        dec = -_off_objective(t, s, b, a, th, g)
    elif isinstance(reg, BigM):
        aq = s * a
        bq = 2.0 * s * b - a
        cq = s - b
        r1, r2 = _quad_roots(aq, bq, cq)
        # near-linear cases (s ~ 0) degrade the quadratic; solve directly
        lin = np.abs(aq) <= 1e-14 * np.maximum(np.abs(bq), 1.0)
        tlin = -cq / bq
        margin = 1e-12 * (t_hi - t_lo)
        t = np.where(lin, tlin, r1)
        bad = ~((t > t_lo + margin) & (t < t_hi - margin))
        t = np.where(bad & ~lin, r2, t)
        t = np.clip(t, t_lo + margin, t_hi - margin)
        t = np.where(np.isnan(t), 0.0, t)
        if m_off is not None:
            t = np.clip(t, -m_off - th, m_off - th)
        dec = -_off_objective(t, s, b, a, th, 0.0)
    else:
        raise InvalidInput(f"unknown regularizer {reg!r}")
    return t, dec


def _bigm_off_step_scalar(s, b, wii, wjj, th, m):
    """Scalar big-M off-diagonal step (clamped quadratic root), float math."""
    a = min(b * b - wii * wjj, -_TINY)
    disc = math.sqrt(max(wii * wjj, _TINY))
    t_lo = (-b + disc) / a
    t_hi = (-b - disc) / a
    margin = 1e-12 * (t_hi - t_lo)
    aq = s * a
    bq = 2.0 * s * b - a
    cq = s - b
    if abs(aq) <= 1e-14 * max(abs(bq), 1.0):
        t = -cq / bq if bq else 0.0
    else:
        sq = math.sqrt(max(bq * bq - 4.0 * aq * cq, 0.0))
        qq = -0.5 * (bq + (sq if bq >= 0 else -sq))
        t = qq / aq
        if not t_lo + margin < t < t_hi - margin:
            t = cq / qq if qq else 0.0
    t = min(max(t, t_lo + margin), t_hi - margin)
    if math.isfinite(m):
        t = min(max(t, -m - th), m - th)
    return t


def _diag_objective(t, s, w, th, g):
    val = 2.0 * s * t - np.log(np.maximum(1.0 + 2.0 * w * t, _TINY))
    if g:
        val = val + 0.5 * g * ((th + 2.0 * t) ** 2 - th * th)
    return val


def _diag_steps(s, w, th, reg, m_dia=None):
    """Vectorized best diagonal steps (T_ii <- T_ii + 2t) and decreases."""
    lo = -0.5 / w  # domain bound: 1 + 2 w t > 0
    if isinstance(reg, Ridge):
        g = 1.0 / reg.gamma
        aq = 4.0 * g * w
        bq = 2.0 * s * w + 2.0 * g * (1.0 + w * th)
        cq = s - w + g * th
        r1, r2 = _quad_roots(aq, bq, cq)
        ok1 = 1.0 + 2.0 * w * r1 > 0
        t = np.where(ok1, r1, r2)
        t = np.where(np.isnan(t), 0.0, t)
        t = np.maximum(t, lo * (1.0 - 1e-12) + 1e-300)
        dec = -_diag_objective(t, s, w, th, g)
    elif isinstance(reg, BigM):
        t = 0.5 * (w - s) / (s * w)
        if m_dia is not None:
            t = np.minimum(t, 0.5 * (m_dia - th))
        dec = -_diag_objective(t, s, w, th, 0.0)
    else:
        raise InvalidInput(f"unknown regularizer {reg!r}")
    return t, dec


def off_diagonal_step(sigma_ij, w_ii, w_jj, w_ij, theta_ij, reg, m_ij=None):
    """Best single off-diagonal move and its exact objective decrease.

    ``m_ij`` overrides the big-M box half-width for this entry; when the
    regularizer carries a scalar bound it is picked up automatically.
    """
    if isinstance(reg, BigM) and m_ij is None:
        if not np.isscalar(reg.bounds):
            raise InvalidInput("per-entry big-M needs an explicit m_ij")
        m_ij = float(reg.bounds)
    m = None if m_ij is None else np.array([float(m_ij)])
    with np.errstate(divide="ignore", invalid="ignore"):
        t, dec = _offdiag_steps(
            np.array([float(sigma_ij)]),
            np.array([float(w_ij)]),
            np.array([float(w_ii)]),
            np.array([float(w_jj)]),
            np.array([float(theta_ij)]),
            reg,
            m_off=m,
        )
    return float(t[0]), float(dec[0])


def diagonal_step(sigma_ii, w_ii, theta_ii, reg, m_ii=None):
    """Best diagonal move (applied as T_ii + 2t) and its exact decrease."""
    if not (sigma_ii > 0 and w_ii > 0):
        raise InvalidInput("diagonal step needs sigma_ii > 0 and w_ii > 0")
    if isinstance(reg, BigM) and m_ii is None:
        if not np.isscalar(reg.diag):
            raise InvalidInput("per-entry big-M needs an explicit m_ii")
        m_ii = float(reg.diag)
    m = None if m_ii is None else np.array([float(m_ii)])
    with np.errstate(divide="ignore", invalid="ignore"):
        t, dec = _diag_steps(
            np.array([float(sigma_ii)]),
            np.array([float(w_ii)]),
            np.array([float(theta_ii)]),
            reg,
            m_dia=m,
        )
    return float(t[0]), float(dec[0])


# ---------------------------------------------------------------------------
# solver


def _newton_refine(sigma, theta, z, reg, rounds=30, step_tol=1e-15):
    """Active-set damped Newton on the free coordinates of a big-M subproblem.

    Coordinate descent contracts like Gauss-Seidel near the optimum, which
    is far too slow once the certificate demands residuals of order
    gap / M.  A few Newton rounds on the (p + pairs)-dimensional reduced
    problem finish the job quadratically.  Returns the refined theta.
    """
    p = sigma.shape[0]
    ii, jj = z.index_arrays()
    npairs = len(ii)
    m = p + npairs
    rows = np.concatenate([np.arange(p), ii])
    cols = np.concatenate([np.arange(p), jj])
    hi = np.concatenate([reg.diag_all(p), reg.off_at(ii, jj)])
    lo = np.concatenate([np.full(p, 1e-12), -reg.off_at(ii, jj)])
    x = np.concatenate([np.diagonal(theta), theta[ii, jj]])

    def assemble(xv):
        out = np.zeros((p, p))
        out[np.arange(p), np.arange(p)] = xv[:p]
        out[ii, jj] = xv[p:]
        out[jj, ii] = xv[p:]
        return out

    def objective(xv):
        cand = assemble(xv)
        try:
            return float(np.sum(sigma * cand)) - linalg.log_det_spd(cand), cand
        except NotPositiveDefinite:
            return math.inf, cand

    f_cur, theta_cur = objective(x)
    for _ in range(rounds):
        w = linalg.inverse_spd(theta_cur)
        g = (sigma - w)[rows, cols]
        g[p:] *= 2.0
        frozen = ((x >= hi - 1e-11) & (g < 0)) | ((x <= lo + 1e-11) & (g > 0))
        g = np.where(frozen, 0.0, g)
        h = (
            w[np.ix_(rows, rows)] * w[np.ix_(cols, cols)]
            + w[np.ix_(rows, cols)] * w[np.ix_(cols, rows)]
        )
        h[:p, :p] *= 0.5
        h[p:, p:] *= 2.0
        if frozen.any():
            h[frozen, :] = 0.0
            h[:, frozen] = 0.0
            h[frozen, frozen] = 1.0
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(h + 1e-10 * np.eye(m), -g)
        moved = False
        alpha = 1.0
        for _ls in range(40):
            x_new = np.clip(x + alpha * step, lo, hi)
            f_new, theta_new = objective(x_new)
            if f_new <= f_cur + 1e-13:
                x, f_cur, theta_cur = x_new, f_new, theta_new
                moved = True
                break
            alpha *= 0.5
        if not moved or np.abs(alpha * step).max() <= step_tol * (
            1.0 + np.abs(x).max()
        ):
            break
    return theta_cur


def _initial_theta(sigma_diag, reg, p):
    """Diagonal start min(1 / S_ii, M_ii): PD and feasible for every support."""
    theta_d = 1.0 / sigma_diag
    if isinstance(reg, BigM):
        theta_d = np.minimum(theta_d, reg.diag_all(p))
    return theta_d


def _prepare_warm(theta0, z, reg, p):
    """Mask a warm-start matrix to the support and pull it back into the cone.

    Entries off the support are zeroed, box constraints are clipped, and
    the matrix is shrunk toward its own diagonal until Cholesky succeeds.
    """
    theta = linalg.symmetrize(theta0)
    mask = np.zeros((p, p), dtype=bool)
    ii, jj = z.index_arrays()
    mask[ii, jj] = True
    mask[jj, ii] = True
    np.fill_diagonal(mask, True)
    theta = np.where(mask, theta, 0.0)
    if isinstance(reg, BigM):
        m = reg.full_matrix(p)
        theta = np.clip(theta, -m, m)
    d = np.maximum(np.diagonal(theta), 1e-12)
    base = np.diag(d)
    for tau in (1.0, 0.5, 0.25, 0.1, 0.0):
        cand = base + tau * (theta - base)
        try:
            linalg.cholesky(cand)
            return cand
        except NotPositiveDefinite:
            continue
    return base


def solve_covsel(
    sigma,
    z,
    reg,
    gap_tol=1e-4,
    improve_tol=1e-12,
    max_iter=1_000_000,
    theta0=None,
    refresh_every=500,
    pd_check_every=0,
    trace_hook=None,
):
    """Greedy coordinate descent for the support-restricted MLE subproblem.

    Iterates until the duality gap falls below ``gap_tol``, the best
    available decrease drops under ``improve_tol``, or ``max_iter`` is hit
    (the last raises Unconverged carrying the partial, still-certified
    solution).  ``theta0`` is an optional warm start; it is masked to the
    support and repaired into the PD cone.  ``pd_check_every`` > 0 turns on
    periodic Cholesky assertions on the iterate (for testing),
    ``trace_hook`` receives a dict per iteration.
    """
    sigma = linalg.check_symmetric(sigma, name="sigma")
    p = sigma.shape[0]
    if z.dim != p:
        raise InvalidInput(f"support dim {z.dim} != matrix dim {p}")
    sigma_diag = np.diagonal(sigma).copy()
    if (sigma_diag <= 0).any():
        raise InvalidInput("sigma must have a positive diagonal")
    if not (gap_tol > 0):
        raise InvalidInput("gap_tol must be positive")

    ii, jj = z.index_arrays()
    npairs = len(ii)
    sig_off = sigma[ii, jj].copy()
    m_off = reg.off_at(ii, jj) if isinstance(reg, BigM) else None
    m_dia = reg.diag_all(p) if isinstance(reg, BigM) else None
    has_inf = isinstance(reg, BigM) and (
        not np.isfinite(np.asarray(m_dia)).all()
        or (npairs and not np.isfinite(np.asarray(m_off)).all())
    )
    gamma = reg.gamma if isinstance(reg, Ridge) else None

    # state: theta, W = theta^-1, and running objective pieces
    if theta0 is None:
        theta = np.zeros((p, p), order="F")
        np.fill_diagonal(theta, _initial_theta(sigma_diag, reg, p))
    else:
        theta = np.asfortranarray(_prepare_warm(theta0, z, reg, p))
    w = np.asfortranarray(linalg.inverse_spd(theta))
    logdet = linalg.log_det_spd(theta)
    theta_diag = np.diagonal(theta).copy()
    theta_off = theta[ii, jj].copy()
    trace_term = float(sigma_diag @ theta_diag) + 2.0 * float(sig_off @ theta_off)

    def penalty():
        if gamma is None:
            return 0.0
        return (float(theta_diag @ theta_diag) + 2.0 * float(theta_off @ theta_off)) / (
            2.0 * gamma
        )

    pen = penalty()

    def primal():
        return trace_term - logdet + pen

    fin_dia = np.isfinite(m_dia) if m_dia is not None else None
    fin_off = np.isfinite(m_off) if m_off is not None else None

    def cheap_dual():
        # R = W - S on the tracked coordinates; log det(S + R) = -log det T.
        # Coordinates with infinite bounds must be projected to R = 0 for
        # feasibility; the log-det change of that projection is estimated
        # to first order (logdet is concave, so this stays optimistic and
        # the exact projected dual is verified before the solver trusts it).
        w_diag = np.diagonal(w)
        r_d = w_diag - sigma_diag
        if gamma is not None:
            total = 0.5 * gamma * float(r_d @ r_d)
            correction = 0.0
        else:
            total = float(np.abs(r_d[fin_dia]) @ m_dia[fin_dia])
            correction = -float(theta_diag[~fin_dia] @ r_d[~fin_dia])
        if npairs:
            r_o = w[ii, jj] - sig_off
            if gamma is not None:
                total += gamma * float(r_o @ r_o)
            else:
                total += 2.0 * float(np.abs(r_o[fin_off]) @ m_off[fin_off])
                if not fin_off.all():
                    sel = ~fin_off
                    correction -= 2.0 * float(theta_off[sel] @ r_o[sel])
        return p - logdet + correction - total

    def exact_certificate(w_point=None):
        # any R with S + R factorizable certifies; drift in a tracked W only
        # weakens the bound, never invalidates it
        w_exact = linalg.inverse_spd(theta) if w_point is None else w_point
        val, r = _projected_dual(sigma, w_exact, z, reg)
        return val, r, w_exact


    applied = 0
    iters = 0
    last_exact_attempt = -(10**9)
    last_polish = -(10**9)
    prev_gap = math.inf
    last_polish_gap = math.inf
    singular_stop = False
    polish_budget = 100
    newton_budget = 4
    fp_state = np.seterr(divide="ignore", invalid="ignore")

    def polish_sweep():
        # The big-M conjugate pays M |W_ij - S_ij| at first order on every
        # coordinate whose box constraint is inactive, while the greedy
        # decrease there is only second-order and stalls long before the
        # certificate tightens.  One cyclic pass of exact clamped steps
        # zeroes those residuals and restores the dual value.
        nonlocal logdet, trace_term, applied
        moved = 0
        for d in range(p):
            w_dd = w[d, d]
            t = 0.5 * (w_dd - sigma_diag[d]) / (sigma_diag[d] * w_dd)
            md = m_dia[d]
            if math.isfinite(md):
                t = min(t, 0.5 * (md - theta_diag[d]))
            if abs(t) <= 1e-16 * (1.0 + abs(theta_diag[d])):
                continue
            logdet += linalg.update_inverse_inplace(w, d, d, t)
            theta[d, d] += 2.0 * t
            theta_diag[d] += 2.0 * t
            trace_term += 2.0 * t * sigma_diag[d]
            moved += 1
        for o in range(npairs):
            i, j = int(ii[o]), int(jj[o])
            t = _bigm_off_step_scalar(
                sig_off[o], w[i, j], w[i, i], w[j, j], theta_off[o], m_off[o]
            )
            if abs(t) <= 1e-16 * (1.0 + abs(theta_off[o])):
                continue
            logdet += linalg.update_inverse_inplace(w, i, j, t)
            theta[i, j] += t
            theta[j, i] += t
            theta_off[o] += t
            trace_term += 2.0 * t * sig_off[o]
            moved += 1
        applied += moved
        return moved

    try:
        while iters < max_iter:
            iters += 1
            w_diag = np.diagonal(w)
            td, dd = _diag_steps(sigma_diag, w_diag, theta_diag, reg, m_dia=m_dia)
            dd = np.where(np.isnan(dd), -np.inf, dd)
            best_d = int(np.argmax(dd))
            best_dec = dd[best_d]
            best_is_diag = True
            best_o = -1
            if npairs:
                b = w[ii, jj]
                to, do = _offdiag_steps(
                    sig_off, b, w_diag[ii], w_diag[jj], theta_off, reg, m_off=m_off
                )
                do = np.where(np.isnan(do), -np.inf, do)
                best_o = int(np.argmax(do))
                if do[best_o] > best_dec:
                    best_dec = do[best_o]
                    best_is_diag = False

            stalled = not np.isfinite(best_dec) or best_dec < improve_tol
            lagging = (
                isinstance(reg, BigM)
                and best_dec * 16.0 < prev_gap - 0.5 * gap_tol
                and iters - last_polish > (p + npairs) // 2
            )
            if stalled or lagging:
                progressed = False
                if isinstance(reg, BigM) and polish_budget > 0:
                    # escalate: polish sweeps while they contract the
                    # certificate, then one quadratic Newton endgame
                    polish_contracting = prev_gap < 0.7 * last_polish_gap
                    if polish_contracting or last_polish_gap == math.inf:
                        polish_budget -= 1
                        last_polish = iters
                        last_polish_gap = prev_gap
                        progressed = polish_sweep() > 0
                    elif newton_budget > 0 and p + npairs <= 3000:
                        newton_budget -= 1
                        refined = _newton_refine(sigma, linalg.symmetrize(theta), z, reg)
                        theta = np.asfortranarray(refined)
                        theta_diag = np.diagonal(theta).copy()
                        theta_off = theta[ii, jj].copy()
                        w = np.asfortranarray(linalg.inverse_spd(theta))
                        logdet = linalg.log_det_spd(theta)
                        trace_term = float(sigma_diag @ theta_diag) + 2.0 * float(
                            sig_off @ theta_off
                        )
                        pen = penalty()
                        last_polish_gap = math.inf
                        progressed = True
                    if progressed:
                        prev_gap = primal() - cheap_dual()
                        if prev_gap <= gap_tol:
                            if not has_inf:
                                break
                            val, _, _ = exact_certificate(
                                w_point=linalg.symmetrize(w)
                            )
                            if primal() - val <= gap_tol:
                                break
                        continue
                if stalled:
                    break

            try:
                if best_is_diag:
                    t = float(td[best_d])
                    d = best_d
                    logdet += linalg.update_inverse_inplace(w, d, d, t)
                    theta[d, d] += 2.0 * t
                    theta_diag[d] += 2.0 * t
                    trace_term += 2.0 * t * sigma_diag[d]
                    if gamma is not None:
                        pen += (
                            theta_diag[d] ** 2 - (theta_diag[d] - 2.0 * t) ** 2
                        ) / (2.0 * gamma)
                else:
                    t = float(to[best_o])
                    i = int(ii[best_o])
                    j = int(jj[best_o])
                    logdet += linalg.update_inverse_inplace(w, i, j, t)
                    theta[i, j] += t
                    theta[j, i] += t
                    theta_off[best_o] += t
                    trace_term += 2.0 * t * sig_off[best_o]
                    if gamma is not None:
                        pen += (
                            theta_off[best_o] ** 2 - (theta_off[best_o] - t) ** 2
                        ) / gamma
            except SingularUpdate:
                singular_stop = True
                break
            applied += 1

            if refresh_every and applied % refresh_every == 0:
                w = np.asfortranarray(linalg.inverse_spd(theta))
                logdet = linalg.log_det_spd(theta)
                trace_term = float(sigma_diag @ theta_diag) + 2.0 * float(
                    sig_off @ theta_off
                )
                pen = penalty()
            if pd_check_every and applied % pd_check_every == 0:
                linalg.cholesky(theta)  # raises if the cone was left

            gap_est = primal() - cheap_dual()
            prev_gap = gap_est
            if trace_hook is not None:
                trace_hook(
                    {
                        "iteration": iters,
                        "primal": primal(),
                        "gap_estimate": gap_est,
                        "theta": theta.copy(),
                    }
                )
            if gap_est <= gap_tol:
                if not has_inf:
                    break
                # infinite bounds: the cheap gap is optimistic, verify exactly
                if iters - last_exact_attempt >= max(3, p // 10):
                    last_exact_attempt = iters
                    val, _, _ = exact_certificate(w_point=linalg.symmetrize(w))
                    if primal() - val <= gap_tol:
                        break
    finally:
        np.seterr(**fp_state)

    # final, honestly computed certificate
    w = np.asfortranarray(linalg.inverse_spd(theta))
    logdet = linalg.log_det_spd(theta)
    trace_term = float(sigma_diag @ theta_diag) + 2.0 * float(sig_off @ theta_off)
    pen = penalty()
    dual, r_point, w_exact = exact_certificate()
    primal_value = primal()
    gap = primal_value - dual
    sol = CovSelSolution(
        theta=linalg.symmetrize(theta),
        w_inv=linalg.symmetrize(w_exact),
        primal_value=primal_value,
        dual_point=r_point,
        dual_value=dual,
        gap=gap,
        iterations=iters,
        support=z,
        converged=gap <= gap_tol,
    )
    if gap > gap_tol and iters >= max_iter:
        raise Unconverged(
            f"gap {gap:.3e} above tolerance {gap_tol:.3e} after {iters} iterations",
            solution=sol,
        )
    if singular_stop and gap > gap_tol:
        raise Unconverged(
            f"stopped on a singular update with gap {gap:.3e}", solution=sol
        )
    return sol
