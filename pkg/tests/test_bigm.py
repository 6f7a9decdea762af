import math

import numpy as np
import pytest

import _oracles as orc
from covcut import bigm, linalg
from covcut.covsel import BigM, Support, solve_covsel
from covcut.errors import InvalidInput, NotPositiveDefinite


def sample_cov(p, seed, n=None):
    rng = np.random.default_rng(seed)
    n = n or 3 * p
    x = rng.standard_normal((n, p))
    c = x - x.mean(axis=0)
    return c.T @ c / n


class TestLevel:
    def test_identity(self):
        assert bigm.level_from_feasible(np.eye(4), np.eye(4)) == pytest.approx(4.0)

    def test_unconstrained_optimum(self):
        sigma = sample_cov(5, 0)
        theta = linalg.inverse_spd(sigma)
        expected = 5 + linalg.log_det_spd(sigma)
        assert bigm.level_from_feasible(sigma, theta) == pytest.approx(expected)

    def test_direct_formula(self):
        sigma = sample_cov(4, 1)
        rng = np.random.default_rng(2)
        theta = linalg.inverse_spd(sample_cov(4, 3))
        expected = float(np.sum(sigma * theta)) - linalg.log_det_spd(theta)
        assert bigm.level_from_feasible(sigma, theta) == pytest.approx(expected)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            bigm.level_from_feasible(np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestGValue:
    def test_matches_dense_logdet(self):
        # closed-form expansion vs log det((1/(2 lam)) E + S), many draws
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 100:
            p = 5
            sigma = sample_cov(p, int(rng.integers(1e6)))
            u = bigm.level_from_feasible(sigma, np.diag(1 / np.diagonal(sigma)))
            i, j = sorted(rng.integers(0, p, size=2))
            if i == j:
                continue
            lam = float(rng.uniform(0.05, 10.0))
            e = np.zeros((p, p))
            e[i, j] = e[j, i] = 1.0
            shifted = e / (2 * lam) + sigma
            if np.linalg.eigvalsh(shifted)[0] <= 1e-10:
                continue
            dense = lam * (
                p - u + linalg.log_det_spd(shifted)
            )
            val = bigm.g_value(sigma, u, i, j, lam)
            assert abs(val - dense) <= 1e-9 * max(1.0, abs(dense))
            checked += 1

    def test_concavity_midpoint(self):
        sigma = sample_cov(5, 5)
        u = bigm.level_from_feasible(sigma, np.diag(1 / np.diagonal(sigma)))
        for lams in [(0.5, 2.0), (1.0, 8.0)]:
            mid = 0.5 * (lams[0] + lams[1])
            vals = [bigm.g_value(sigma, u, 0, 2, lam) for lam in lams]
            mid_val = bigm.g_value(sigma, u, 0, 2, mid)
            assert mid_val >= min(vals) - 1e-12


class TestEntryBounds:
    def test_identity_level_set_is_singleton(self):
        # u = p makes the level set {I}: all off-diagonal bounds collapse to 0
        for i, j in [(0, 1), (1, 3), (0, 3)]:
            b = bigm.entry_bounds(np.eye(4), 4.0, i, j)
            assert b.lower == pytest.approx(0.0, abs=1e-9)
            assert b.upper == pytest.approx(0.0, abs=1e-9)

    def test_bounds_capture_enumerated_optima(self):
        # every exact optimizer of the cardinality problem must fall inside
        sigma = sample_cov(5, 6)
        z = Support(5, [(0, 1), (2, 3), (1, 4)])
        feas = solve_covsel(sigma, z, BigM(), gap_tol=1e-8)
        u = bigm.level_from_feasible(sigma, feas.theta)
        bounds, shifted = bigm.all_entry_bounds(sigma, u)
        assert not shifted
        bmap = {b.pair: b for b in bounds}
        levels = orc.enumerate_levels(sigma, orc.BIGM, 1e8, 3, tol=1e-7)
        pairs = orc.all_pairs(5)
        for level in range(4):
            combos, values, thetas = levels[level]
            for combo, val, th in zip(combos, values, thetas):
                if val > u + 1e-9:
                    continue  # outside the level set
                full = np.zeros((5, 5))
                full[np.arange(5), np.arange(5)] = th[:5]
                for t, cid in enumerate(combo):
                    i, j = pairs[cid]
                    full[i, j] = full[j, i] = th[5 + t]
                for (i, j), b in bmap.items():
                    assert b.lower - 1e-6 <= full[i, j] <= b.upper + 1e-6

    def test_monotone_in_level(self):
        sigma = sample_cov(5, 7)
        u0 = 5 + linalg.log_det_spd(sigma)
        tight = bigm.entry_bounds(sigma, u0 + 0.1, 0, 2)
        loose = bigm.entry_bounds(sigma, u0 + 1.0, 0, 2)
        assert loose.lower <= tight.lower + 1e-9
        assert loose.upper >= tight.upper - 1e-9

    def test_dual_iterates_stay_safe(self):
        # every g evaluation lower-bounds the minimum entry over the level
        # set: check against a fine lambda grid around the maximizer
        sigma = sample_cov(4, 8)
        u = bigm.level_from_feasible(sigma, np.diag(1 / np.diagonal(sigma)))
        b = bigm.entry_bounds(sigma, u, 0, 1)
        grid = np.geomspace(1e-3, 1e4, 4000)
        vals = [bigm.g_value(sigma, u, 0, 1, lam) for lam in grid]
        assert b.lower >= np.nanmax(vals) - 1e-6

    def test_level_below_optimum_rejected(self):
        sigma = sample_cov(4, 9)
        u_min = 4 + linalg.log_det_spd(sigma)
        with pytest.raises(InvalidInput):
            bigm.entry_bounds(sigma, u_min - 1.0, 0, 1)

    def test_derivatives_match_finite_differences(self):
        sigma = sample_cov(5, 10)
        theta = linalg.inverse_spd(sigma)
        u = bigm.level_from_feasible(sigma, np.diag(1 / np.diagonal(sigma)))
        kappa = 5 - u + linalg.log_det_spd(sigma)
        beta = theta[1, 3]
        delta = 0.25 * (beta**2 - theta[1, 1] * theta[3, 3])
        lam0 = 0.5 * (-beta + math.sqrt(beta**2 - 4 * delta))
        for lam in (lam0 * 1.1, lam0 * 1.5, lam0 * 3.0, lam0 * 10.0):
            g0, gp, gpp = bigm._g_and_derivatives(lam, kappa, beta, delta)
            h = 1e-6 * lam
            gp_fd = (
                bigm._g_and_derivatives(lam + h, kappa, beta, delta)[0]
                - bigm._g_and_derivatives(lam - h, kappa, beta, delta)[0]
            ) / (2 * h)
            gpp_fd = (
                bigm._g_and_derivatives(lam + h, kappa, beta, delta)[1]
                - bigm._g_and_derivatives(lam - h, kappa, beta, delta)[1]
            ) / (2 * h)
            assert gp == pytest.approx(gp_fd, rel=1e-6, abs=1e-8)
            assert gpp == pytest.approx(gpp_fd, rel=1e-5, abs=1e-6)

    def test_singular_covariance_refused_or_shifted(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((3, 6))  # n < p: singular
        sigma = x.T @ x / 3
        with pytest.raises(NotPositiveDefinite):
            bigm.all_entry_bounds(sigma, 10.0)
        bounds, shifted = bigm.all_entry_bounds(sigma, 10.0, shift="auto")
        assert shifted and len(bounds) == 15


class TestBoundsToBigM:
    def test_basic(self):
        b = bigm.EntryBounds(pair=(0, 1), lower=-0.3, upper=0.5, level=1.0)
        m = bigm.bounds_to_bigM([b], inflation=1.0, dim=3)
        assert m[0, 1] == pytest.approx(0.5)
        assert m[1, 0] == pytest.approx(0.5)
        assert math.isinf(m[0, 2])

    def test_symmetric_interval(self):
        b = bigm.EntryBounds(pair=(0, 1), lower=-0.4, upper=0.4, level=1.0)
        m = bigm.bounds_to_bigM([b], inflation=1.1, dim=2)
        assert m[0, 1] == pytest.approx(0.44)

    def test_floor(self):
        b = bigm.EntryBounds(pair=(0, 1), lower=0.0, upper=0.0, level=1.0)
        m = bigm.bounds_to_bigM([b], inflation=1.1, dim=2)
        assert m[0, 1] == pytest.approx(1e-8)

    def test_inflation_validated(self):
        b = bigm.EntryBounds(pair=(0, 1), lower=0.0, upper=1.0, level=1.0)
        with pytest.raises(InvalidInput):
            bigm.bounds_to_bigM([b], inflation=0.5)
