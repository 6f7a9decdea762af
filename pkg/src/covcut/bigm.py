"""Data-driven big-M bounds on optimal precision entries.

For each entry, the extreme values over the level set
{T > 0 : <S, T> - log det T <= u} are bounded through a one-dimensional
concave dual

    g(lam) = lam * [p - u + log det S
                    + log(1 + B/lam + (B^2 - T_ii T_jj) / (4 lam^2))],

with T = S^-1 and B = T_ij, maximized by safeguarded Newton.  Any dual
iterate already yields a valid bound, so early termination is safe.  The
upper-bound problem is the mirror image (B -> -B, negate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInput, NotPositiveDefinite

_KAPPA_SLACK = 1e-9  # tolerated fp violation of u >= unconstrained optimum


@dataclass(frozen=True)
class EntryBounds:
    """Certified interval for one precision entry at objective level u."""

    pair: tuple
    lower: float
    upper: float
    level: float


def level_from_feasible(sigma, theta_hat):
    """Objective value <T_hat, S> - log det T_hat of a feasible point.

    Smaller levels give tighter bounds, so pass the best incumbent known.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    return float(np.sum(sigma * theta_hat)) - linalg.log_det_spd(theta_hat)


def _g_and_derivatives(lam, kappa, beta, delta):
    r = 1.0 + beta / lam + delta / (lam * lam)
    if r <= 0.0:
        return -math.inf, math.inf, -math.inf
    log_r = math.log(r)
    s = -beta / lam - 2.0 * delta / (lam * lam)  # lam * r'
    rp = s / lam
    sp = beta / (lam * lam) + 4.0 * delta / lam**3
    g = lam * (kappa + log_r)
    gp = kappa + log_r + s / r
    gpp = rp / r + (sp * r - s * rp) / (r * r)
    return g, gp, gpp


def _maximize_g(kappa, beta, delta, tol):
    """sup_{lam > 0} g(lam) for the scalar dual, concave on its domain.

    kappa <= 0 and delta <= 0; the domain is lam > lam0 with lam0 the
    positive root of lam^2 + beta*lam + delta.  kappa == 0 degenerates to
    the supremum at infinity, which equals beta.
    """
    if kappa >= -1e-14:
        return beta
    disc = math.sqrt(max(beta * beta - 4.0 * delta, 0.0))
    lam0 = max(0.0, 0.5 * (-beta + disc))

    # bracket the root of g' (decreasing: +inf near lam0, kappa < 0 at inf)
    lo = lam0 + max(1e-12, 1e-9 * max(1.0, lam0))
    start = 1.0 if 1.0 > lo else lo * 2.0
    hi = start
    _, gp_hi, _ = _g_and_derivatives(hi, kappa, beta, delta)
    guard = 0
    while gp_hi > 0.0 and guard < 200:
        hi *= 2.0
        _, gp_hi, _ = _g_and_derivatives(hi, kappa, beta, delta)
        guard += 1
    _, gp_lo, _ = _g_and_derivatives(lo, kappa, beta, delta)
    guard = 0
    while not gp_lo > 0.0 and guard < 200:
        lo = lam0 + (lo - lam0) * 0.5
        _, gp_lo, _ = _g_and_derivatives(lo, kappa, beta, delta)
        guard += 1
    if not gp_lo > 0.0:
        # no interior maximum found; fall back to the best endpoint value
        g_lo, _, _ = _g_and_derivatives(lo, kappa, beta, delta)
        g_hi, _, _ = _g_and_derivatives(hi, kappa, beta, delta)
        return max(g_lo, g_hi)

    best = -math.inf
    lam = min(max(1.0, lo), hi)
    for _ in range(200):
        g, gp, gpp = _g_and_derivatives(lam, kappa, beta, delta)
        best = max(best, g)
        if gp > 0.0:
            lo = lam
        else:
            hi = lam
        if abs(gp) <= tol * max(1.0, abs(kappa)) or hi - lo <= tol * max(1.0, hi):
            break
        if gpp < 0.0:
            step = lam - gp / gpp
        else:
            step = math.nan
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)  # bisection fallback
        lam = step
    g, _, _ = _g_and_derivatives(lam, kappa, beta, delta)
    return max(best, g)


def _kappa(sigma, u):
    p = sigma.shape[0]
    logdet = linalg.log_det_spd(sigma)
    kappa = p - u + logdet
    if kappa > _KAPPA_SLACK * max(1.0, abs(u)):
        raise InvalidInput(
            f"level u={u} lies below the unconstrained optimum {p + logdet}"
        )
    return min(kappa, 0.0), logdet


def g_value(sigma, u, i, j, lam, theta=None):
    """Dual objective at one lam, via the closed-form log-det expansion."""
    sigma = np.asarray(sigma, dtype=np.float64)
    kappa, _ = _kappa(sigma, u)
    if theta is None:
        theta = linalg.inverse_spd(sigma)
    beta = float(theta[i, j])
    delta = 0.0 if i == j else 0.25 * (beta * beta - theta[i, i] * theta[j, j])
    g, _, _ = _g_and_derivatives(float(lam), kappa, beta, delta)
    return g


def entry_bounds(sigma, u, i, j, newton_tol=1e-10, theta=None):
    """Certified lower/upper bounds on entry (i, j) over the u-level set.

    Requires S > 0 (the dual is unbounded otherwise).  ``theta`` may carry
    a precomputed S^-1 when bounding many entries of one matrix.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    kappa, _ = _kappa(sigma, u)
    if theta is None:
        theta = linalg.inverse_spd(sigma)
    beta = float(theta[i, j])
    delta = 0.0 if i == j else 0.25 * (beta * beta - theta[i, i] * theta[j, j])
    lower = _maximize_g(kappa, beta, delta, newton_tol)
    upper = -_maximize_g(kappa, -beta, delta, newton_tol)
    return EntryBounds(pair=(int(i), int(j)), lower=lower, upper=upper, level=u)


def all_entry_bounds(sigma, u, newton_tol=1e-10, include_diagonal=False,
                     shift=None):
    """EntryBounds for every upper-triangular pair, sharing one S^-1.

    Singular covariances are refused; pass ``shift`` ("auto" or a float)
    to fall back on S + shift*I, in which case the bounds are heuristic.
    Returns (bounds, shifted_flag).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    shifted = False
    try:
        linalg.cholesky(sigma)
    except NotPositiveDefinite:
        if shift is None:
            raise
        sig = 1e-3 * float(np.diagonal(sigma).mean()) if shift == "auto" else float(shift)
        sigma = sigma + sig * np.eye(p)
        shifted = True
    theta = linalg.inverse_spd(sigma)
    out = []
    for i in range(p):
        start = i if include_diagonal else i + 1
        for j in range(start, p):
            out.append(entry_bounds(sigma, u, i, j, newton_tol, theta=theta))
    return out, shifted


def bounds_to_bigM(bounds, inflation=1.1, dim=None, floor=1e-8):
    """Per-entry M values from bound intervals: inflation * max(|lo|, |up|).

    Entries are floored at ``floor`` so bounds degenerate to a tiny box
    rather than fixing variables to zero.  Returns a symmetric (p, p)
    matrix (diagonal filled only where diagonal bounds were supplied;
    elsewhere +inf, i.e. unbounded).
    """
    if inflation < 1.0:
        raise InvalidInput("inflation must be at least 1")
    if dim is None:
        dim = 1 + max(max(b.pair) for b in bounds)
    m = np.full((dim, dim), math.inf)
    for b in bounds:
        i, j = b.pair
        m[i, j] = m[j, i] = max(inflation * max(abs(b.lower), abs(b.upper)), floor)
    return m
