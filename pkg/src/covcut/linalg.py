"""Dense symmetric positive-definite linear algebra.

Factorization, log-determinant, inversion and rank-two inverse maintenance
used by every solver in the package.  Matrices are plain float64 numpy
arrays; symmetry is the caller's contract and can be checked/enforced with
:func:`check_symmetric` / :func:`symmetrize`.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import blas as _blas
from scipy.linalg import lapack as _lapack

from .errors import InvalidInput, NotPositiveDefinite, SingularUpdate

# Relative pivot threshold: a Cholesky pivot at or below
# p * PIVOT_RTOL * max(diag) means the matrix left the PD cone.
PIVOT_RTOL = 1e-14


def symmetrize(a):
    """Return (a + a.T) / 2 as a fresh float64 array."""
    a = np.asarray(a, dtype=np.float64)
    return 0.5 * (a + a.T)


def check_symmetric(a, tol=1e-8, name="matrix"):
    """Validate that ``a`` is square, finite and symmetric within ``tol``.

    Returns the input as a float64 array (no copy when already conforming).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInput(f"{name} contains non-finite entries")
    skew = np.abs(a - a.T).max(initial=0.0)
    scale = max(1.0, np.abs(a).max(initial=0.0))
    if skew > tol * scale:
        raise InvalidInput(f"{name} is not symmetric (max asymmetry {skew:.3e})")
    return a


def cholesky(a):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefinite when factorization fails or any pivot falls
    at or below ``p * 1e-14 * max(diag)`` (scale-aware, so standardized
    correlation matrices are not falsely rejected).
    """
    a = np.asarray(a, dtype=np.float64)
    p = a.shape[0]
    diag = np.diagonal(a)
    max_diag = diag.max(initial=0.0)
    if max_diag <= 0.0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    threshold = p * PIVOT_RTOL * max_diag
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    # LAPACK pivots are the squared diagonal entries of L.
    pivots = np.diagonal(lower) ** 2
    if pivots.min() <= threshold:
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} at or below threshold {threshold:.3e}"
        )
    return lower


def log_det(lower):
    """log det of the matrix whose lower Cholesky factor is ``lower``."""
    return 2.0 * float(np.sum(np.log(np.diagonal(lower))))


def log_det_spd(a):
    """log det of a symmetric positive definite matrix (factorizes internally)."""
    return log_det(cholesky(a))


def inverse_spd(a):
    """Inverse of a symmetric positive definite matrix via Cholesky.

    The result is exactly symmetric (computed on one triangle, mirrored).
    """
    lower = cholesky(a)
    inv, info = _lapack.dpotri(lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"dpotri failed with info={info}")
    # dpotri fills only the lower triangle.
    out = np.tril(inv)
    out = out + np.tril(inv, -1).T
    return out


def det_ratio(w, i, j, t):
    """det(T + D) / det(T) for D = t * (e_i e_j^T + e_j e_i^T), given W = T^-1.

    Closed form: off-diagonal 1 + 2*W_ij*t + (W_ij^2 - W_ii*W_jj)*t^2,
    diagonal (i == j) 1 + 2*W_ii*t.
    """
    if i == j:
        return 1.0 + 2.0 * w[i, i] * t
    wij = w[i, j]
    return 1.0 + 2.0 * wij * t + (wij * wij - w[i, i] * w[j, j]) * t * t


def rank_two_update_inverse(w, i, j, t):
    """Inverse of T + t*(e_i e_j^T + e_j e_i^T) given W = T^-1, in O(p^2).

    ``i == j`` degenerates to the rank-one update of T + 2t * e_i e_i^T.
    Raises SingularUpdate when the update leaves the PD cone
    (det ratio <= 0).  Returns a new, exactly symmetric array; ``w`` is
    not modified.
    """
    out = np.array(w, dtype=np.float64, order="F", copy=True)
    update_inverse_inplace(out, i, j, t)
    return symmetrize(out)


def _ger(alpha, x, y, a):
    """a += alpha * outer(x, y), in place when the layout allows."""
    if a.flags.f_contiguous:
        _blas.dger(alpha, x, y, a=a, overwrite_a=1)
    else:
        a += alpha * np.outer(x, y)


def update_inverse_inplace(w, i, j, t):
    """In-place version of :func:`rank_two_update_inverse`.

    ``w`` should be Fortran-ordered float64 for the no-copy BLAS path.
    Returns log(det ratio) of the update so callers can maintain a
    running log-determinant.
    """
    if t == 0.0:
        return 0.0
    ratio = det_ratio(w, i, j, t)
    if not ratio > 0.0:
        raise SingularUpdate(f"update ({i},{j},t={t}) gives det ratio {ratio}")
    if i == j:
        gi = w[:, i].copy()
        c = 2.0 * t / ratio
        _ger(-c, gi, gi, w)
        return float(np.log(ratio))
    # 2x2 block Woodbury: T' = T + U C U^T with U = [e_i e_j],
    # C = [[0, t], [t, 0]];  W' = W - G K^-1 G^T, G = [w_i w_j],
    # K = C^-1 + U^T W U.  det K = -ratio / t^2, nonzero by the guard.
    gi = w[:, i].copy()
    gj = w[:, j].copy()
    s = w[i, j] + 1.0 / t
    det_k = w[i, i] * w[j, j] - s * s
    inv00 = w[j, j] / det_k
    inv01 = -s / det_k
    inv11 = w[i, i] / det_k
    u1 = inv00 * gi + inv01 * gj
    u2 = inv01 * gi + inv11 * gj
    _ger(-1.0, gi, u1, w)
    _ger(-1.0, gj, u2, w)
    return float(np.log(ratio))
