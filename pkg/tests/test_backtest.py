import json

import numpy as np
import pytest

from perphedge import backtest as bt
from perphedge import synthetic
from perphedge.errors import DegenerateBaseline, DegenerateSample, SeriesTooShort, ValidationError
from perphedge.hedge import HedgerProfile
from perphedge.margining import ContractSpec
from perphedge.timeseries import PriceSeries


def make_config(spot, fut, gamma=0.0, kind="direct", **kw):
    profile = HedgerProfile(0.2, gamma, 0.01, horizon_steps=20, kind=kind)
    base = dict(moments_window_steps=400, gev_window_steps=1200, rebalance_steps=20)
    base.update(kw)
    return bt.BacktestConfig(spot=spot, futures=fut, contract=ContractSpec(kind, 1.0, 0.01),
                             profile=profile, **base)


@pytest.fixture
def spot():
    return synthetic.random_walk(4000, np.random.default_rng(2), sigma=0.002)


def test_hedge_effectiveness_examples(rng):
    u = rng.normal(size=200)
    assert bt.hedge_effectiveness(u, u) == 0.0
    assert bt.hedge_effectiveness(np.zeros(200), u) == 1.0
    assert bt.hedge_effectiveness(0.5 * u, u) == pytest.approx(0.75, abs=1e-14)
    with pytest.raises(DegenerateBaseline):
        bt.hedge_effectiveness(u[:5], np.ones(5))


def test_estimate_moments_perfect_instrument(spot):
    mm = bt.estimate_moments(spot.prices[:500], spot.prices[:500], 20)
    assert mm.sigma2_S == mm.sigma2_F == mm.sigma2_SF
    assert mm.b == 1.0
    assert mm.F_t == spot.prices[499]


def test_estimate_moments_independent_series():
    rng = np.random.default_rng(8)
    a = synthetic.random_walk(100_001, rng, sigma=0.001)
    b = synthetic.random_walk(100_001, rng, sigma=0.001)
    assert abs(bt.estimate_moments(a.prices, b.prices, 1).b) < 0.05


def test_estimate_moments_constant_prices():
    with pytest.raises(DegenerateSample):
        bt.estimate_moments(np.full(100, 5.0), np.full(100, 5.0), 5)


def test_scaled_moments_use_one_period_returns(spot):
    p = spot.prices[:300]
    r = p[1:] / p[:-1] - 1
    mm = bt.estimate_moments(p, p, 10, method="scaled")
    assert mm.sigma2_S == pytest.approx(10 * np.var(r, ddof=1), rel=1e-12)


def test_perfect_hedge_run(spot):
    report = bt.run(make_config(spot, spot))
    assert report.summary["failed_count"] == 0
    assert report.summary["HE"] == 1.0
    assert np.all(report.column("theta0") == 1.0)
    assert np.all(report.column("realized_return") == 0.0)


def test_theta_zero_diagnostic(spot):
    fut = synthetic.basis_path(spot, np.random.default_rng(3))
    report = bt.run(make_config(spot, fut, gamma=10.0, force_theta_zero=True))
    assert report.summary["HE"] == 0.0


def test_scaled_futures_identity(spot):
    # futures = c * spot: theta0 = 1/c per unit, hedged P&L cancels exactly up to rounding
    fut = PriceSeries("fut", spot.start_ts, spot.step_ms, spot.prices * 1.5)
    report = bt.run(make_config(spot, fut))
    np.testing.assert_allclose(report.column("theta0"), 1.0, rtol=1e-9)
    assert report.summary["HE"] == pytest.approx(1 - (1 - 1.5) ** 2, abs=1e-9)


def test_loss_aversion_lowers_hedge(spot):
    fut = synthetic.basis_path(spot, np.random.default_rng(4))
    low = bt.run(make_config(spot, fut, gamma=10.0)).summary
    high = bt.run(make_config(spot, fut, gamma=40.0)).summary
    assert high["mean_theta0"] < low["mean_theta0"]
    assert high["mean_liq_prob"] < low["mean_liq_prob"]


def test_inverse_run_reports_scaled_position(spot):
    fut = synthetic.basis_path(spot, np.random.default_rng(5))
    report = bt.run(make_config(spot, fut, gamma=10.0, kind="inverse"))
    ok = report.ok_rows
    assert ok
    for row in ok:
        assert row.theta_star == pytest.approx(row.moments.F_t * row.theta0)


def test_threaded_run_matches_sequential(spot, tmp_path, monkeypatch):
    fut = synthetic.basis_path(spot, np.random.default_rng(6))
    seq = bt.run(make_config(spot, fut, gamma=10.0))
    monkeypatch.setenv(bt.THREADS_ENV, "4")
    par = bt.run(make_config(spot, fut, gamma=10.0))
    seq.write_csv(tmp_path / "a.csv")
    par.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_report_round_trip(spot, tmp_path):
    fut = synthetic.basis_path(spot, np.random.default_rng(6))
    report = bt.run(make_config(spot, fut, gamma=10.0))
    report.write_csv(tmp_path / "r.csv", ["run=test"])
    report.write_json(tmp_path / "s.json")
    rows = bt.read_report_csv(tmp_path / "r.csv")
    assert len(rows) == len(report.rows)
    assert list(rows[0]) == bt.REPORT_COLUMNS
    assert json.loads((tmp_path / "s.json").read_text())["window_count"] == report.summary["window_count"]


def test_failed_windows_are_recorded(spot):
    # a frozen stretch makes every moments window touching it degenerate
    prices = spot.prices.copy()
    prices[2000:2600] = prices[2000]
    frozen = PriceSeries("s", spot.start_ts, spot.step_ms, prices)
    report = bt.run(make_config(frozen, frozen))
    assert report.summary["failed_count"] > 0
    assert "failed:DegenerateSample" in report.summary["failure_reasons"]
    assert report.summary["HE"] == 1.0


def test_config_checks(spot):
    with pytest.raises(ValidationError):
        bt.BacktestConfig(spot=spot, futures=spot, contract=ContractSpec("inverse"),
                          profile=HedgerProfile(0.2, 0.0))
    with pytest.raises(SeriesTooShort):
        bt.run(make_config(spot, spot, gev_window_steps=10_000))


def test_proxy_diagnostics():
    rng = np.random.default_rng(9)
    a = synthetic.random_walk(30_000, rng, sigma=0.002)
    same = bt.gev_proxy_diagnostics(a, a, 3000, 30, stride=600)
    assert same.correlation == pytest.approx(1.0)
    assert len(same.rows()) >= 40
    b = synthetic.random_walk(30_000, rng, sigma=0.002)
    indep = bt.gev_proxy_diagnostics(a, b, 3000, 30, stride=600)
    assert abs(indep.correlation) < 0.3


def test_summary_consistent_with_columns(spot):
    fut = synthetic.basis_path(spot, np.random.default_rng(6))
    report = bt.run(make_config(spot, fut, gamma=10.0))
    he = bt.hedge_effectiveness(report.column("realized_return"), report.column("unhedged_return"))
    assert he == report.summary["HE"]
    ts = np.array([r.window_ts for r in report.rows])
    assert np.all(np.diff(ts) == 20 * spot.step_ms)
