import json

import numpy as np
import pytest

from perphedge import cli, fixture_path, gev
from perphedge.timeseries import ingest_csv, read_rows

DATA = {name: str(fixture_path(name)) for name in
        ("crash.csv", "gev_fixture.csv", "bt_spot.csv", "bt_perp.csv", "buckets.csv")}
BT_ARGS = ["--m-bar", "0.05", "--horizon", "60", "--moments-window-steps", "1000",
           "--gev-window-steps", "4000", "--rebalance-steps", "60"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def table(path):
    header, rows = read_rows(path)
    return [dict(zip(header, r)) for r in rows]


def test_fit_gev_on_bundled_fixture(tmp_path, capsys):
    code, out, _ = run(capsys, "fit-gev", "--input", DATA["gev_fixture.csv"], "--horizon", 30, "--out", tmp_path)
    assert code == 0
    fit = json.loads(out)
    # fixture drawn from GEV(0.3, 0.01, 0.01) with 1000 blocks
    assert abs(fit["tau"] - 0.3) < 0.1
    assert abs(fit["alpha"] - 0.01) < 0.002
    assert abs(fit["beta"] - 0.01) < 0.002
    saved = json.loads((tmp_path / "gev_params.json").read_text())
    assert saved["tau"] == fit["tau"]
    rows = table(tmp_path / "gev_cdf_table.csv")
    assert len(rows) == 9
    for r in rows:
        assert abs(float(r["empirical_cdf"]) - float(r["fitted_cdf"])) < 0.05


def test_fit_gev_left_tail(tmp_path, capsys):
    code, out, _ = run(capsys, "fit-gev", "--input", DATA["gev_fixture.csv"], "--horizon", 30,
                       "--tail", "left", "--out", tmp_path)
    assert code == 0
    series = ingest_csv(DATA["gev_fixture.csv"])
    p = np.asarray(series.prices)
    neg = np.array([max(1 - p[k + n] / p[k] for n in range(1, 31)) for k in range(0, len(p) - 30, 30)])
    expected = gev.fit_pwm(neg)
    got = json.loads(out)
    assert got["tau"] == pytest.approx(expected.tau, abs=1e-12)
    assert got["tail"] == "left"


def test_fit_gev_too_short(tmp_path, capsys):
    src = tmp_path / "short.csv"
    src.write_text("timestamp,price\n" + "".join(f"{i * 60000},{100 + i % 3}\n" for i in range(50)))
    code, _, err = run(capsys, "fit-gev", "--input", src, "--horizon", 5, "--out", tmp_path)
    assert code == 3
    assert "TooFewSamples" in err


def test_ingestion_error_exit_code(tmp_path, capsys):
    src = tmp_path / "bad.csv"
    src.write_text("timestamp,price\n0,10\n60000,0\n")
    assert run(capsys, "fit-gev", "--input", src, "--horizon", 5, "--out", tmp_path)[0] == 2
    assert run(capsys, "fit-gev", "--input", tmp_path / "missing.csv", "--horizon", 5)[0] == 2


def test_solve_reduction(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--gamma", 0, "--b", 0.94, "--m-bar", 0.2, "--out", tmp_path)
    assert code == 0
    result = json.loads(out)
    assert result["theta0"] == 0.94
    assert result["implied_leverage"] == pytest.approx(4.7)
    for key in ("theta0", "theta_star", "liq_prob", "implied_leverage", "objective"):
        assert key in result


def test_solve_gamma_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--m-bar", 0.2, "--gamma", 20, "--b", 0.94, "--sweep", "gamma",
                       "--grid", "0,5,10,20,40,80", "--out", tmp_path)
    assert code == 0
    thetas = [r["theta0"] for r in json.loads(out)["rows"]]
    assert all(a >= b for a, b in zip(thetas, thetas[1:]))
    assert len(table(tmp_path / "sweep_gamma.csv")) == 6


def test_solve_error_codes(tmp_path, capsys):
    code, _, err = run(capsys, "solve", "--gamma", 1, "--b", 0.9, "--m-bar", 0, "--out", tmp_path)
    assert code == 1 and "m_bar" in err
    assert run(capsys, "solve", "--gamma", 1, "--b", -0.2, "--m-bar", 0.2, "--out", tmp_path)[0] == 4
    assert run(capsys, "solve", "--gamma", 1, "--m-bar", 0.2, "--out", tmp_path)[0] == 1
    assert run(capsys, "solve", "--gamma", "abc", "--m-bar", 0.2)[0] == 1


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# solver inputs\ngamma = 0\nm-bar = 0.2\nb = 0.5\n")
    code, out, _ = run(capsys, "solve", "--config", cfg, "--out", tmp_path)
    assert code == 0 and json.loads(out)["theta0"] == 0.5
    code, out, _ = run(capsys, "solve", "--config", cfg, "--b", 0.7, "--out", tmp_path)
    assert json.loads(out)["theta0"] == 0.7
    assert json.loads(out)["config"]["b"] == 0.7


def test_backtest_perfect_hedge_and_determinism(tmp_path, capsys):
    args = ["backtest", "--spot", DATA["bt_spot.csv"], "--futures", DATA["bt_spot.csv"], "--gamma", 0, *BT_ARGS]
    assert run(capsys, *args, "--out", tmp_path / "a")[0] == 0
    assert run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    summary = json.loads((tmp_path / "a" / "backtest_summary.json").read_text())
    assert summary["HE"] == 1.0
    assert (tmp_path / "a" / "backtest.csv").read_bytes() == (tmp_path / "b" / "backtest.csv").read_bytes()


def test_backtest_gamma_ordering(tmp_path, capsys):
    means = []
    for gamma in (10, 40):
        code, out, _ = run(capsys, "backtest", "--spot", DATA["bt_spot.csv"], "--futures", DATA["bt_perp.csv"],
                           "--gamma", gamma, *BT_ARGS, "--out", tmp_path / str(gamma))
        assert code == 0
        means.append(json.loads(out)["mean_theta0"])
    assert means[0] > means[1]


def test_liq_crash_fixture_matches_brute_force(tmp_path, capsys):
    code, _, _ = run(capsys, "liq", "--input", DATA["crash.csv"], "--leverages", "5,20,50,100",
                     "--horizons", "10,30,60", "--out", tmp_path)
    assert code == 0
    prices = ingest_csv(DATA["crash.csv"]).prices
    rows = table(tmp_path / "liq_table.csv")
    assert len(rows) == 24
    for r in rows:
        lev, h = float(r["leverage"]), int(r["horizon_steps"])
        hits = 0
        for i in range(len(prices) - h):
            entry = prices[i]
            for p in prices[i + 1 : i + h + 1]:
                loss = entry - p if r["side"] == "long" else p - entry
                if loss > entry / lev - 0.01 * p:
                    hits += 1
                    break
        assert float(r["probability"]) == pytest.approx(hits / (len(prices) - h), abs=5e-11)
        assert r["probability_pct"] == f"{100 * hits / (len(prices) - h):.2f}"


def test_liq_flat_fixture(tmp_path, capsys, write_prices):
    src = write_prices([(i * 60000, 100) for i in range(100)])
    assert run(capsys, "liq", "--input", src, "--horizons", "10,60", "--out", tmp_path)[0] == 0
    assert all(float(r["probability"]) == 0 for r in table(tmp_path / "liq_table.csv"))


def test_liq_mirror_symmetry(tmp_path, capsys, write_prices):
    rng = np.random.default_rng(0)
    p = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, 300)))
    write_prices([(i * 60000, repr(float(v))) for i, v in enumerate(p)], name="p.csv")
    write_prices([(i * 60000, repr(float(v))) for i, v in enumerate(1e4 / p)], name="q.csv")
    grid = ["--leverages", "5,20,50", "--horizons", "10,60"]
    run(capsys, "liq", "--input", tmp_path / "p.csv", "--kind", "inverse", *grid, "--out", tmp_path / "p")
    run(capsys, "liq", "--input", tmp_path / "q.csv", "--kind", "direct", *grid, "--out", tmp_path / "q")
    inv = {(r["side"], r["leverage"], r["horizon_steps"]): r["probability"] for r in table(tmp_path / "p" / "liq_table.csv")}
    dirc = {(r["side"], r["leverage"], r["horizon_steps"]): r["probability"] for r in table(tmp_path / "q" / "liq_table.csv")}
    swap = {"long": "short", "short": "long"}
    assert all(v == dirc[swap[s], lev, h] for (s, lev, h), v in inv.items())


def test_metrics_outputs(tmp_path, capsys):
    src = tmp_path / "b.csv"
    src.write_text("timestamp,volume_usd,open_interest_usd,long_liq_usd,short_liq_usd,open,high,low,close\n"
                   "0,2,1,0,0,100,120,90,95\n")
    assert run(capsys, "metrics", "--input", src, "--out", tmp_path)[0] == 0
    text = (tmp_path / "metrics.csv").read_text()
    assert "# ohlc_policy=high-low" in text
    row = table(tmp_path / "metrics.csv")[0]
    assert float(row["si"]) == 2.0
    assert "lev_long" not in row and "lev_short" not in row
    assert all(float(row[k]) == 0 for k in ("liq_short", "liq_long", "liq_total", "ai_long", "ai_short", "ai_total"))


def test_metrics_bundled_additivity(tmp_path, capsys):
    code, out, _ = run(capsys, "metrics", "--input", DATA["buckets.csv"], "--kind", "inverse",
                       "--policy", "open-low/high", "--out", tmp_path)
    assert code == 0
    row = json.loads(out)
    assert "lev_long" in row
    assert float(row["ai_total"]) == pytest.approx(float(row["ai_long"]) + float(row["ai_short"]), rel=1e-9)


def test_mark_single_and_series(tmp_path, capsys, write_prices):
    hour = 3_600_000
    code, out, _ = run(capsys, "mark", "--index-price", 10000, "--rate", 0.0004,
                       "--now-ts", 6 * hour, "--next-funding-ts", 8 * hour)
    assert code == 0 and json.loads(out)["mark_price"] == 10001.0
    assert run(capsys, "mark", "--index-price", 10000, "--rate", 0.0004,
               "--now-ts", 9 * hour, "--next-funding-ts", 8 * hour)[0] == 1
    index = write_prices([(i * hour, 10000) for i in range(8)], name="index.csv")
    funding = write_prices([(8 * hour, 0.0004)], name="funding.csv", header="timestamp,rate")
    code, _, _ = run(capsys, "mark", "--index", index, "--funding", funding, "--step-ms", hour, "--out", tmp_path)
    assert code == 0
    marks = ingest_csv(tmp_path / "mark.csv", step_ms=hour)
    assert marks.prices[6] == 10001.0


def test_outputs_echo_config(tmp_path, capsys):
    code, _, _ = run(capsys, "--seed", 7, "liq", "--input", DATA["crash.csv"], "--horizons", "10", "--out", tmp_path)
    assert code == 0
    text = (tmp_path / "liq_table.csv").read_text()
    assert text.startswith("# ")
    assert "# seed=7" in text and "# kind=direct" in text


def test_unknown_command_is_usage_error(capsys):
    assert run(capsys, "frobnicate")[0] == 1
