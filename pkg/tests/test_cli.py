import json
import subprocess
import sys

import numpy as np
import pytest

from mvhbond import REFERENCE_PARAMS, merton_baseline, yield_spread
from mvhbond.cli import main
from mvhbond.output import read_csv


def run_json(capsys, *argv):
    rc = main([*argv, "--json"])
    out = capsys.readouterr().out
    return rc, json.loads(out)


def test_price_text_and_json(capsys):
    assert main(["price", "--v", "66"]) == 0
    text = capsys.readouterr().out
    for key in ("a", "b", "c", "c_tilde", "discount", "B", "yield"):
        assert any(line.split()[0] == key for line in text.splitlines())
    rc, doc = run_json(capsys, "price", "--v", "66", "--t", "1")
    assert rc == 0 and doc["result"]["t"] == 1.0
    assert doc["manifest"]["command"] == "price"
    assert doc["manifest"]["params"] == REFERENCE_PARAMS.to_dict()


def test_price_kappa_zero_is_b(capsys):
    _, doc = run_json(capsys, "price", "--v", "66", "--kappa", "0")
    assert doc["result"]["B"] == doc["result"]["b"]


def test_price_alpha_zero_matches_merton_yield(capsys):
    _, doc = run_json(capsys, "price", "--v", "66", "--kappa", "0", "--mu1", "0", "--mu2", "0")
    ref = yield_spread(merton_baseline(66.0, 100.0, 0.15, 10.0), 100.0, 10.0)
    assert doc["result"]["yield"] == pytest.approx(ref, rel=1e-10)


def test_short_maturity_yield_lower_for_richer_firm(capsys):
    _, lo = run_json(capsys, "price", "--v", "132", "--t", "9")
    _, hi = run_json(capsys, "price", "--v", "66", "--t", "9")
    assert lo["result"]["yield"] < hi["result"]["yield"]


def test_params_file_and_overrides(tmp_path, capsys):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"rho": -0.6, "mu1": 0.03}))
    _, doc = run_json(capsys, "price", "--v", "66", "--params", str(f), "--theta-bar", "0.4")
    m = doc["manifest"]
    assert m["params_file"] == str(f) and m["overrides"] == {"theta_bar": 0.4}
    assert m["params"]["rho"] == -0.6 and m["params"]["mu2"] == pytest.approx(0.1)


@pytest.mark.parametrize("argv,field", [
    (["price", "--v", "-1"], "v"),
    (["price", "--v", "66", "--rho", "2"], "rho"),
    (["price", "--v", "66", "--t", "11"], "t"),
    (["price", "--v", "66", "--quad-points", "1"], "quad_points"),
    (["curve", "--maturities", "0", "1"], "maturities"),
    (["sensitivity", "--param", "rho", "--range", "0", "2", "3", "--v", "66"], "rho"),
    (["hedge", "--v", "66", "--p0", "abc"], "p0"),
])
def test_input_errors_exit_2(capsys, argv, field):
    assert main(argv) == 2
    assert f"input error: {field}" in capsys.readouterr().err


def test_missing_file_and_bad_flags(capsys, tmp_path):
    assert main(["price", "--v", "66", "--params", str(tmp_path / "none.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["price"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sensitivity", "--param", "D", "--values", "1", "--v", "66"])
    assert exc.value.code == 2


def test_curve_csv(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--maturities", "1", "5", "10", "--kappa", "0", "100",
                 "--out", str(out)]) == 0
    header, rows = read_csv(str(out))
    assert header == ["T", "v", "kappa", "b", "c_tilde", "B", "yield"]
    assert len(rows) == 3 * 2 * 2
    assert out.read_text().startswith("# manifest {")
    k0 = [r for r in rows if float(r[2]) == 0]
    assert all(r[3] == r[5] for r in k0)


def test_curve_default_grid_json(capsys):
    _, doc = run_json(capsys, "curve", "--v", "66", "--kappa", "10")
    assert len(doc["result"]) == 40
    assert doc["result"][0]["T"] == 0.25 and doc["result"][-1]["T"] == 10.0


def test_sensitivity_range_and_values(capsys, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sensitivity", "--param", "kappa", "--values", "0", "10", "--v", "66",
                 "--out", str(out)]) == 0
    header, rows = read_csv(str(out))
    assert header[0] == "kappa" and len(rows) == 2
    assert float(rows[1][6]) < float(rows[0][6])
    _, doc = run_json(capsys, "sensitivity", "--param", "mu1", "--range", "0", "0.04", "5",
                      "--v", "66")
    b = [r["b"] for r in doc["result"]]
    assert np.all(np.diff(b) > 0)
    assert main(["sensitivity", "--param", "mu1", "--range", "0", "1", "2.5", "--v", "66"]) == 2


def test_hedge_auto_and_fit(capsys):
    rc, doc = run_json(capsys, "hedge", "--v", "66", "--paths", "2048", "--steps", "20")
    r = doc["result"]
    assert rc == 0 and r["p0"] == pytest.approx(r["closed_form"]["b"])
    assert r["z_score_vs_c"] == pytest.approx((r["mean_sq_error"] - r["closed_form"]["c"])
                                              / r["std_error"])
    assert doc["manifest"]["seed"] == 20240607
    rc, doc = run_json(capsys, "hedge", "--v", "66", "--paths", "4096", "--steps", "50",
                       "--p0-grid", "auto")
    r = doc["result"]
    assert rc == 0 and len(r["sweep_p0"]) == 7
    assert r["b_hat"] == pytest.approx(r["closed_form"]["b"], rel=0.05)


def test_hedge_explicit_grid_and_fit_failure(capsys):
    b = 54.336115629549383
    grid = [str(b * (1 + 0.05 * k)) for k in range(-3, 4)]
    rc, doc = run_json(capsys, "hedge", "--v", "66", "--paths", "1024", "--steps", "10",
                       "--p0-grid", *grid)
    assert rc == 0
    rc = main(["hedge", "--v", "66", "--paths", "1024", "--steps", "10", "--p0-grid", "1", "2"])
    assert rc == 2
    assert main(["hedge", "--v", "66", "--p0-grid", "x", "y"]) == 2


def test_hedge_fit_error_exit_3(capsys, monkeypatch):
    import mvhbond.cli as cli
    from mvhbond.mc_oracle import FitError

    def boom(*a, **k):
        raise FitError("quadratic coefficient -1 is not positive")

    monkeypatch.setattr(cli, "fit_value_function", boom)
    assert main(["hedge", "--v", "66", "--paths", "256", "--steps", "4", "--p0-grid", "auto"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_hedge_complete_market_small_error(capsys):
    _, coarse = run_json(capsys, "hedge", "--v", "66", "--rho", "1.0", "--paths", "2048",
                         "--steps", "25")
    _, fine = run_json(capsys, "hedge", "--v", "66", "--rho", "1.0", "--paths", "2048",
                       "--steps", "200")
    assert fine["result"]["mean_sq_error"] < coarse["result"]["mean_sq_error"]
    assert fine["result"]["mean_sq_error"] < 5.0
    assert fine["result"]["closed_form"]["c"] == 0.0


def test_verify_complete_market_is_degenerate(capsys):
    rc, doc = run_json(capsys, "verify", "--rho", "1", "--skip-mc")
    checks = {c["name"]: c for c in doc["result"]["checks"]}
    assert rc == 0 and doc["result"]["passed"]
    assert checks["nflvr"]["skipped"]
    assert checks["nflvr"]["details"]["note"] == "degenerate: complete market"


def test_verify_reports_failure_with_exit_1(capsys, monkeypatch):
    import mvhbond.cli as cli
    monkeypatch.setattr(cli, "run_all", lambda p, n, skip_mc=False: {
        "passed": False, "novikov_condition": False,
        "checks": [{"name": "pde_b", "passed": False, "skipped": False, "details": {}}]})
    assert main(["verify", "--skip-mc"]) == 1
    assert "FAIL  pde_b" in capsys.readouterr().out


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mvhbond.cli", "price", "--v", "66", "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["v"] == 66.0
