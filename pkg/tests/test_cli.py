import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import LN2
from rsvd.cli import RunConfig, main, parse_config_text, serialize_config
from rsvd.errors import ConfigError
from rsvd.models import ham_rational
from rsvd.reduction import ReducedPoint, build_params

EXAMPLE = ["--n", "1", "--u", "0", "--v", "0", "--mu", repr(LN2), "--lambda", repr(LN2)]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("RSVD_TOL_OVERRIDE", raising=False)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig().validate()
        assert (cfg.n, cfg.u, cfg.v, cfg.seed) == (2, 0.1, 0.3, 42)
        assert cfg.mu == pytest.approx(LN2)

    def test_file_and_flag_override(self, tmp_path, capsys):
        path = tmp_path / "run.toml"
        path.write_text('n = 1\nu = 0.0\nv = 0.0\nlambda = [0.9]\ntheta = [0.5]\nt_end = 0.0\nformat = "json"\n')
        code, out, _ = run(["evolve", "--config", str(path), "--theta", "1.5"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["columns"][:3] == ["t", "lambda_1", "theta_1"]
        assert doc["rows"][0][1:3] == [0.9, 1.5]

    @pytest.mark.parametrize(
        "text",
        [
            "mu = -1.0",
            "dt = 0.0",
            "n = 9",
            "n = 0",
            "bogus = 1",
            "n = 2\nlambda = [1.0]",
            'format = "xml"',
            "lambda = [2.0, 1.0]\nphat = [-1.0, -2.0]",
            "n = 2.5",
            "ladder = [0.1, -0.01]",
            "this is not toml",
        ],
    )
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_negative_mu_fails_before_computing(self, capsys):
        code, out, err = run(["verify", "--mu", "-1"], capsys)
        assert code == 2 and "mu must be positive" in err and out == ""

    def test_round_trip(self):
        text = 'n = 3\nmu = 0.5\nseed = 7\nlambda = [4, 2.5, 1]\nformat = "json"\n'
        cfg = parse_config_text(text)
        normalized = serialize_config(cfg)
        assert serialize_config(parse_config_text(normalized)) == normalized
        assert parse_config_text(normalized) == cfg


class TestVerify:
    def test_default_config_passes(self, capsys):
        code, _, err = run(["verify"], capsys)
        assert code == 0
        for suite in ("decomposition", "involutivity", "oracle", "reconstruction_residual", "darboux", "duality_theta"):
            assert suite in err
        assert "FAIL" not in err

    def test_corrupted_tolerance_is_reported(self, capsys, monkeypatch, tmp_path):
        monkeypatch.setenv("RSVD_TOL_OVERRIDE", "darboux_multi=1e-30")
        out_path = tmp_path / "report.csv"
        code, _, err = run(["verify", "--output", str(out_path)], capsys)
        assert code == 1
        assert "FAILED suites: darboux" in err
        header, rows = read_csv(out_path.read_text())
        assert header == ["suite", "max_error", "tolerance", "status"]
        status = {r[0]: r[3] for r in rows}
        assert status["darboux"] == "FAIL" and status["oracle"] == "PASS"

    def test_bad_override(self, capsys, monkeypatch):
        monkeypatch.setenv("RSVD_TOL_OVERRIDE", "nonsense=1")
        code, _, err = run(["verify", "--n", "1"], capsys)
        assert code == 2 and "unknown suite" in err


class TestEvolve:
    def test_worked_example_conserves_h(self, capsys):
        code, out, _ = run(["evolve", *EXAMPLE, "--theta", "1.0", "--t-end", "1"], capsys)
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["t", "lambda_1", "theta_1", "H", "F1", "Phi2", "domain_margin"]
        H = np.array([float(r[3]) for r in rows])
        assert len(rows) == 1001
        assert np.abs(H - H[0]).max() <= 1e-8
        assert H[0] == pytest.approx(0.36 + 0.64 * math.cos(1.0), abs=1e-14)

    def test_zero_time_single_row(self, capsys):
        code, out, _ = run(["evolve", *EXAMPLE, "--theta", "0", "--t-end", "0"], capsys)
        assert code == 0 and len(read_csv(out)[1]) == 1

    def test_deterministic(self, tmp_path, capsys):
        files = []
        for k in range(2):
            path = tmp_path / f"run{k}.csv"
            assert run(["evolve", "--seed", "123", "--t-end", "0.2", "--output", str(path)], capsys)[0] == 0
            files.append(path.read_bytes())
        assert files[0] == files[1]
        _, rows = read_csv(files[0].decode())
        assert all(float(x) == float(format(float(x), ".17g")) for x in rows[-1])

    def test_different_seed_differs(self, capsys):
        a = run(["evolve", "--seed", "1", "--t-end", "0"], capsys)[1]
        b = run(["evolve", "--seed", "2", "--t-end", "0"], capsys)[1]
        assert a != b

    def test_dual_chart(self, capsys):
        code, out, _ = run(
            ["evolve", "--phat", "-0.4,-1.3", "--qhat", "0.3,2.0", "--t-end", "0.05", "--dt", "1e-4"], capsys
        )
        assert code == 0
        header, _ = read_csv(out)
        assert header == ["t", "phat_1", "phat_2", "qhat_1", "qhat_2", "H", "Phi1", "domain_margin"]

    def test_json_mirrors_csv(self, capsys):
        argv = ["evolve", *EXAMPLE, "--theta", "0.4", "--t-end", "0.01"]
        _, csv_out, _ = run(argv, capsys)
        _, json_out, _ = run(argv + ["--format", "json"], capsys)
        header, rows = read_csv(csv_out)
        doc = json.loads(json_out)
        assert doc["columns"] == header
        assert np.array_equal(np.array(doc["rows"]), np.array(rows, dtype=float))

    def test_domain_violation_names_inequality(self, capsys):
        code, _, err = run(["evolve", "--lambda", "2.0,1.8"], capsys)
        assert code == 2 and "lambda_1 - lambda_2 > mu" in err

    def test_energy_tolerance_controls_exit(self, capsys, monkeypatch):
        monkeypatch.setenv("RSVD_TOL_OVERRIDE", "evolve_energy=1e-30")
        code, _, err = run(["evolve", *EXAMPLE, "--theta", "1.0", "--t-end", "0.1"], capsys)
        assert code == 1 and "energy drift" in err


class TestDuality:
    def test_worked_example(self, capsys):
        code, out, _ = run(["duality", *EXAMPLE, "--theta", "0.7"], capsys)
        assert code == 0
        header, rows = read_csv(out)
        slopes = {int(r[1]): float(r[4]) for r in rows if r[0] == "slope"}
        assert slopes[1] == pytest.approx(3.75, abs=1e-14)
        assert slopes[2] / slopes[1] == pytest.approx(math.sinh(4 * LN2) / math.sinh(2 * LN2), rel=1e-14)
        assert all(r[-1] == "PASS" for r in rows)
        assert {r[0] for r in rows} == {"slope", "lambda_constant", "darboux"}

    def test_wrong_orientation_fails(self, capsys):
        code, out, _ = run(["duality", *EXAMPLE, "--theta", "0.7", "--flip-sign"], capsys)
        assert code == 1
        _, rows = read_csv(out)
        darboux = [r for r in rows if r[0] == "darboux"][0]
        assert darboux[-1] == "FAIL"


class TestLimit:
    def test_table(self, capsys):
        code, out, _ = run(["limit", "--n", "1", "--lambda", "0.9", "--theta", "0.3"], capsys)
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["r", "H_r", "H0", "V0", "abs_err", "fitted_slope"]
        assert [float(r[0]) for r in rows] == [1e-1, 1e-2, 1e-3, 1e-4, 0.0]
        p = build_params(1, 0.1, 0.3, LN2)
        assert float(rows[-1][1]) == ham_rational(ReducedPoint([0.9], [0.3]), p, 0)
        assert 0.9 <= float(rows[0][5]) <= 1.1

    def test_zero_couplings(self, capsys):
        code, out, _ = run(["limit", "--u", "0", "--v", "0"], capsys)
        _, rows = read_csv(out)
        assert all(r[3] == "0" for r in rows)
        # with u = v the first-order term cancels; the expected order is two
        assert code == 0 and abs(float(rows[0][5]) - 2) <= 0.1

    @pytest.mark.xfail(strict=True, reason="default sample point is outside the asymptotic regime at r = 0.1; see ledger")
    def test_default_ladder_slope(self, capsys):
        code, out, _ = run(["limit"], capsys)
        _, rows = read_csv(out)
        assert 0.9 <= float(rows[0][5]) <= 1.1

    def test_default_exit_matches_slope(self, capsys):
        code, out, _ = run(["limit"], capsys)
        slope = float(read_csv(out)[1][0][5])
        assert (code == 0) == (abs(slope - 1) <= 0.1)

    def test_custom_ladder(self, capsys):
        code, out, _ = run(["limit", "--ladder", "1e-3,1e-4,1e-5"], capsys)
        _, rows = read_csv(out)
        assert len(rows) == 4 and code == 0


def test_module_entry_point(tmp_path):
    out = tmp_path / "limit.json"
    proc = subprocess.run(
        [sys.executable, "-m", "rsvd.cli", "limit", "--n", "1", "--format", "json", "--output", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert doc["meta"]["expected_order"] == 1
