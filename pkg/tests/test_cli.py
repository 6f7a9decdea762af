import itertools
import json
import math
import re

import numpy as np
import pytest

import _oracles as orc
from covcut import cli
from covcut.covsel import Ridge, Support, solve_covsel


@pytest.fixture()
def cov_file(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((24, 6))
    c = x - x.mean(axis=0)
    sigma = c.T @ c / 24
    path = tmp_path / "cov.csv"
    np.savetxt(path, sigma, delimiter=",")
    return str(path), sigma


@pytest.fixture()
def samples_file(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((36, 5))
    path = tmp_path / "samples.csv"
    np.savetxt(path, x, delimiter=",")
    return str(path), x


def run_cli(*argv):
    return cli.main(list(argv))


def strip_times(payload):
    """Drop wall-clock fields before byte comparisons."""
    text = json.dumps(payload, sort_keys=True)
    return re.sub(r'"time_s": [^,}]+', '"time_s": 0', text)


class TestEstimate:
    def test_k_zero_diagonal(self, cov_file, tmp_path, capsys):
        path, sigma = cov_file
        out = tmp_path / "res.json"
        code = run_cli("estimate", "--input", path, "--input-kind", "covariance",
                       "--k", "0", "--reg", "ridge", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["support"] == []
        assert payload["relative_gap"] <= 1e-4 + 1e-12
        assert len(payload["theta"]["diagonal"]) == 6

    def test_malformed_row_width(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,3\n4,5\n")
        code = run_cli("estimate", "--input", str(bad), "--k", "1")
        assert code == 2
        assert "row 2" in capsys.readouterr().err

    def test_asymmetric_covariance_rejected(self, tmp_path, capsys):
        bad = tmp_path / "asym.csv"
        bad.write_text("1,0.5\n0.1,1\n")
        code = run_cli("estimate", "--input", str(bad), "--input-kind",
                       "covariance", "--k", "1")
        assert code == 2

    def test_matches_enumeration_oracle(self, cov_file, tmp_path):
        path, sigma = cov_file
        out = tmp_path / "res.json"
        gamma = 4.0
        code = run_cli("estimate", "--input", path, "--input-kind", "covariance",
                       "--k", "3", "--reg", "ridge", "--reg-value", str(gamma),
                       "--eps", "1e-8", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        levels = orc.enumerate_levels(sigma, orc.RIDGE, gamma, 3, tol=1e-9)
        best, _, _ = orc.brute_force_min(sigma, orc.RIDGE, gamma, 3, levels=levels)
        assert abs(payload["objective_upper"] - best) <= 1e-6 * max(1, abs(best))

    def test_round_trip_theta(self, cov_file, tmp_path):
        # the JSON payload must reconstruct the in-memory solution exactly
        # (full round-trip float formatting); replicate the identical solve
        from covcut import cutplane

        path, sigma = cov_file
        out = tmp_path / "res.json"
        run_cli("estimate", "--input", path, "--input-kind", "covariance",
                "--k", "3", "--reg", "ridge", "--eps", "1e-7", "--out", str(out))
        payload = json.loads(out.read_text())
        theta = np.diag(payload["theta"]["diagonal"])
        for i, j, v in payload["theta"]["entries"]:
            theta[i, j] = theta[j, i] = v
        g0 = payload["regularizer"]["gamma"]
        direct = cutplane.solve(sigma, 3, Ridge(g0), eps=1e-7)
        assert np.abs(theta - direct.theta).max() <= 1e-9
        assert len(payload["support"]) <= 3

    def test_idempotent_output(self, cov_file, tmp_path):
        path, _ = cov_file
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            run_cli("estimate", "--input", path, "--input-kind", "covariance",
                    "--k", "2", "--reg", "bigm", "--reg-mult", "2",
                    "--eps", "1e-6", "--seed", "7", "--out", str(out))
            outs.append(strip_times(json.loads(out.read_text())))
        assert outs[0] == outs[1]

    def test_k_list_path(self, cov_file, tmp_path):
        path, _ = cov_file
        out = tmp_path / "path.json"
        code = run_cli("estimate", "--input", path, "--input-kind", "covariance",
                       "--k-list", "3", "2", "--reg", "ridge", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert isinstance(payload, list) and len(payload) == 2
        assert payload[0]["k"] == 3 and payload[1]["k"] == 2

    def test_structure_file(self, cov_file, tmp_path):
        path, _ = cov_file
        sfile = tmp_path / "structure.json"
        sfile.write_text(json.dumps({"known_zero": [[0, 1]],
                                     "known_one": [[2, 3]]}))
        out = tmp_path / "res.json"
        code = run_cli("estimate", "--input", path, "--input-kind", "covariance",
                       "--k", "2", "--structure", str(sfile), "--out", str(out))
        assert code == 0
        support = [tuple(pair) for pair in json.loads(out.read_text())["support"]]
        assert (2, 3) in support and (0, 1) not in support

    def test_infeasible_structure_exit_code(self, cov_file, tmp_path, capsys):
        path, _ = cov_file
        sfile = tmp_path / "structure.json"
        sfile.write_text(json.dumps({"known_one": [[0, 1], [2, 3]]}))
        code = run_cli("estimate", "--input", path, "--input-kind", "covariance",
                       "--k", "1", "--structure", str(sfile))
        assert code == 3


class TestCovselCmd:
    def test_identity_diagonal(self, tmp_path, capsys):
        cov = tmp_path / "eye.csv"
        np.savetxt(cov, np.eye(4), delimiter=",")
        sup = tmp_path / "sup.csv"
        sup.write_text("")  # empty support: diagonal only
        out = tmp_path / "out.json"
        code = run_cli("covsel", "--input", str(cov), "--input-kind",
                       "covariance", "--support", str(sup), "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["value"] == pytest.approx(4.0)
        assert payload["gap"] == pytest.approx(0.0, abs=1e-9)

    def test_support_file(self, cov_file, tmp_path):
        path, sigma = cov_file
        sup = tmp_path / "sup.csv"
        sup.write_text("0,1\n2,4\n")
        out = tmp_path / "out.json"
        code = run_cli("covsel", "--input", path, "--input-kind", "covariance",
                       "--support", str(sup), "--reg", "ridge",
                       "--reg-value", "5", "--eps", "1e-7", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        direct = solve_covsel(sigma, Support(6, [(0, 1), (2, 4)]), Ridge(5.0),
                              gap_tol=1e-7)
        assert payload["value"] == pytest.approx(direct.primal_value, abs=1e-6)


class TestBoundsCmd:
    def test_identity_bounds_zero(self, tmp_path, capsys):
        cov = tmp_path / "eye.csv"
        np.savetxt(cov, np.eye(3), delimiter=",")
        out = tmp_path / "bounds.csv"
        code = run_cli("bounds", "--input", str(cov), "--input-kind",
                       "covariance", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "i,j,lower,upper,M"
        assert len(lines) == 4  # three pairs
        for line in lines[1:]:
            i, j, lo, hi, m = line.split(",")
            assert abs(float(lo)) < 1e-8 and abs(float(hi)) < 1e-8
            assert float(m) == pytest.approx(1e-8)


class TestTuneCmd:
    def test_writes_json_and_grid(self, samples_file, tmp_path):
        path, _ = samples_file
        out = tmp_path / "tuned.json"
        code = run_cli("tune", "--input", path, "--k-list", "3", "2",
                       "--multipliers", "1", "4", "--reg", "ridge",
                       "--out", str(out), "--seed", "3")
        assert code == 0
        payload = json.loads(out.read_text())
        assert "chosen" in payload and "result" in payload
        grid_lines = (tmp_path / "tuned.json.grid.csv").read_text().splitlines()
        assert len(grid_lines) == 5  # header + 2x2 grid

    def test_requires_samples(self, tmp_path, capsys):
        cov = tmp_path / "eye.csv"
        np.savetxt(cov, np.eye(3), delimiter=",")
        code = run_cli("tune", "--input", str(cov), "--input-kind", "covariance",
                       "--k-list", "1", "--out", str(tmp_path / "t.json"))
        assert code == 2


class TestBenchCmd:
    def test_small_run_schema(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = run_cli("bench", "--p", "8", "--t", "0.08", "--seeds", "2",
                       "--k-list", "3", "2", "--multipliers", "1", "--eps",
                       "1e-4", "--time-limit-s", "5", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("seed,method,criterion,k_selected,A,FDR")
        # 2 seeds x (bigm + mb baseline)
        assert len(lines) == 5
        summary = json.loads((tmp_path / "bench.csv.summary.json").read_text())
        assert summary["config"]["p"] == 8
        assert "bigm/holdout" in summary["groups"]

    def test_determinism_byte_level(self, tmp_path):
        paths = []
        for name in ("b1.csv", "b2.csv"):
            out = tmp_path / name
            code = run_cli("bench", "--p", "7", "--t", "0.1", "--seeds", "1",
                           "--k-list", "2", "--multipliers", "1",
                           "--time-limit-s", "5", "--out", str(out))
            assert code == 0
            paths.append(out)
        def strip(text):
            # drop the wall-clock columns (positions 10 and 11)
            rows = []
            for line in text.strip().splitlines():
                cells = line.split(",")
                cells[10] = cells[11] = "0"
                rows.append(",".join(cells))
            return "\n".join(rows)
        assert strip(paths[0].read_text()) == strip(paths[1].read_text())
