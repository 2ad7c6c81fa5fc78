"""Rolling-window backtest of the optimal hedge.

At each decision time ``t`` the runner

1. fits GEV parameters to the block maxima of the proxy series over the
   trailing GEV window,
2. estimates N-period return moments of spot and futures over the trailing
   moments window,
3. solves for the optimal hedge and records the realised hedged return over
   ``[t, t + N]``,

then moves ``t`` forward by ``rebalance_steps``. Calendar windows are turned
into step counts without calendar arithmetic (4 months = 122 days).
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from perphedge import gev, hedge
from perphedge.errors import (
    DegenerateBaseline,
    DegenerateSample,
    PerpHedgeError,
    SeriesTooShort,
    ValidationError,
    WindowTooShort,
)
from perphedge.gev import GevParams
from perphedge.hedge import HedgerProfile, MarketMoments
from perphedge.margining import ContractSpec
from perphedge.timeseries import DAY_MS, PriceSeries, align, extreme_returns

MOMENTS_WINDOW_DAYS = 122
GEV_WINDOW_DAYS = 1095
THREADS_ENV = "PERP_HEDGE_THREADS"

REPORT_COLUMNS = [
    "window_ts", "status", "tau", "alpha", "beta", "sigma2_S", "sigma2_F",
    "sigma2_SF", "F_t", "b", "theta0", "theta_star", "liq_prob", "liq_prob_pct",
    "implied_leverage", "realized_return", "unhedged_return",
]


def days_to_steps(days: float, step_ms: int) -> int:
    return int(round(days * DAY_MS / step_ms))


@dataclass
class BacktestConfig:
    spot: PriceSeries
    futures: PriceSeries
    contract: ContractSpec
    profile: HedgerProfile
    gev_proxy: PriceSeries | None = None
    moments_window_steps: int | None = None
    gev_window_steps: int | None = None
    rebalance_steps: int | None = None
    moments_method: Literal["overlapping", "scaled"] = "overlapping"
    block_overlap: bool = False
    force_theta_zero: bool = False
    max_workers: int | None = None

    def __post_init__(self):
        step = self.spot.step_ms
        if self.moments_window_steps is None:
            self.moments_window_steps = days_to_steps(MOMENTS_WINDOW_DAYS, step)
        if self.gev_window_steps is None:
            self.gev_window_steps = days_to_steps(GEV_WINDOW_DAYS, step)
        if self.rebalance_steps is None:
            self.rebalance_steps = self.profile.horizon_steps
        if self.rebalance_steps < 1:
            raise ValidationError("rebalance_steps must be >= 1")
        if self.contract.kind != self.profile.kind:
            raise ValidationError("contract kind and hedger profile kind differ")
        if self.moments_method not in ("overlapping", "scaled"):
            raise ValidationError(f"unknown moments method {self.moments_method!r}")

    @property
    def convention(self) -> str:
        return "nominal" if self.contract.kind == "direct" else "inverse"


@dataclass
class WindowResult:
    window_ts: int
    status: str = "ok"
    gev: GevParams | None = None
    moments: MarketMoments | None = None
    theta0: float = math.nan
    theta_star: float = math.nan
    liq_prob: float = math.nan
    implied_leverage: float = math.nan
    realized_return: float = math.nan
    unhedged_return: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_row(self) -> dict:
        g, m = self.gev, self.moments
        return {
            "window_ts": self.window_ts,
            "status": self.status,
            "tau": g.tau if g else math.nan,
            "alpha": g.alpha if g else math.nan,
            "beta": g.beta if g else math.nan,
            "sigma2_S": m.sigma2_S if m else math.nan,
            "sigma2_F": m.sigma2_F if m else math.nan,
            "sigma2_SF": m.sigma2_SF if m else math.nan,
            "F_t": m.F_t if m else math.nan,
            "b": m.b if m else math.nan,
            "theta0": self.theta0,
            "theta_star": self.theta_star,
            "liq_prob": self.liq_prob,
            "liq_prob_pct": f"{self.liq_prob * 100.0:.2f}" if math.isfinite(self.liq_prob) else "nan",
            "implied_leverage": self.implied_leverage,
            "realized_return": self.realized_return,
            "unhedged_return": self.unhedged_return,
        }


@dataclass
class BacktestReport:
    rows: list[WindowResult]
    summary: dict = field(default_factory=dict)

    @property
    def ok_rows(self) -> list[WindowResult]:
        return [r for r in self.rows if r.ok]

    def column(self, name: str, ok_only: bool = True) -> np.ndarray:
        rows = self.ok_rows if ok_only else self.rows
        return np.array([r.as_row()[name] for r in rows], dtype=float)

    def write_csv(self, path, header_lines: Sequence[str] = ()) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for r in self.rows:
                row = r.as_row()
                writer.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n")


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.10g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def read_report_csv(path) -> list[dict]:
    """Rows of a report CSV written by :meth:`BacktestReport.write_csv`."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        parsed = {k: (v if k == "status" else float(v)) for k, v in row.items()}
        parsed["window_ts"] = int(parsed["window_ts"])
        out.append(parsed)
    return out


def hedge_effectiveness(hedged_returns, unhedged_returns) -> float:
    """One minus the ratio of hedged to unhedged return variance."""
    hedged = np.asarray(hedged_returns, dtype=float)
    unhedged = np.asarray(unhedged_returns, dtype=float)
    if hedged.shape != unhedged.shape or hedged.size < 2:
        raise ValidationError("need two equal-length return sequences of length >= 2")
    base = np.var(unhedged, ddof=1)
    if not base > 0:
        raise DegenerateBaseline("unhedged returns have zero variance")
    return float(1.0 - np.var(hedged, ddof=1) / base)


def _returns(prices: np.ndarray, n: int, convention: str) -> np.ndarray:
    if convention == "nominal":
        return prices[n:] / prices[:-n] - 1.0
    return 1.0 - prices[:-n] / prices[n:]


def estimate_moments(spot_prices, futures_prices, horizon_steps: int,
                     convention: str = "nominal", method: str = "overlapping") -> MarketMoments:
    """Sample moments of N-period spot and futures returns over one window.

    ``overlapping`` anchors an N-period return at every step of the window;
    ``scaled`` multiplies the one-period moments by N.
    """
    s = np.asarray(spot_prices, dtype=float)
    f = np.asarray(futures_prices, dtype=float)
    if s.shape != f.shape:
        raise ValidationError("spot and futures windows differ in length")
    n = horizon_steps
    if s.size < n + 2:
        raise WindowTooShort(f"window of {s.size} prices is too short for N={n}")
    k = n if method == "overlapping" else 1
    rs, rf = _returns(s, k, "nominal"), _returns(f, k, convention)
    cov = np.cov(rs, rf, ddof=1)
    scale = 1.0 if method == "overlapping" else float(n)
    s2s, s2f, s2sf = cov[0, 0] * scale, cov[1, 1] * scale, cov[0, 1] * scale
    if not (s2s > 0 and s2f > 0):
        raise DegenerateSample("zero return variance in the moments window")
    return MarketMoments(float(s2s), float(s2f), float(s2sf), float(f[-1]))


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


class _Runner:
    def __init__(self, config: BacktestConfig):
        self.cfg = config
        self.spot, self.fut = align(config.spot, config.futures)
        proxy = config.gev_proxy if config.gev_proxy is not None else config.futures
        if proxy.step_ms != self.spot.step_ms or (proxy.start_ts - self.spot.start_ts) % proxy.step_ms:
            raise ValidationError("GEV proxy is not on the spot/futures time grid")
        self.proxy = proxy
        self.n = config.profile.horizon_steps
        self.proxy_ext = extreme_returns(proxy.prices, self.n, config.convention, "right")

    def decision_indices(self) -> np.ndarray:
        cfg, n = self.cfg, self.n
        w, g = cfg.moments_window_steps, cfg.gev_window_steps
        if w < n + 1:
            raise WindowTooShort(f"moments window of {w} steps is too short for N={n}")
        # proxy index j of spot index i: j = i + offset
        offset = (self.spot.start_ts - self.proxy.start_ts) // self.spot.step_ms
        first = max(w, g - offset)
        last = min(len(self.spot) - 1 - n, len(self.proxy) - 1 - offset)
        if first > last:
            raise SeriesTooShort("data too short for the moments window, GEV window and one horizon")
        self.offset = offset
        return np.arange(first, last + 1, cfg.rebalance_steps)

    def fit_gev(self, j: int) -> GevParams:
        g, n = self.cfg.gev_window_steps, self.n
        step = 1 if self.cfg.block_overlap else n
        anchors = np.arange(j - g, j - n + 1, step)
        return gev.fit_pwm(self.proxy_ext[anchors])

    def window(self, i: int) -> WindowResult:
        cfg, n = self.cfg, self.n
        s, f = self.spot.prices, self.fut.prices
        row = WindowResult(window_ts=int(self.spot.start_ts + i * self.spot.step_ms))
        s0, s1, f0, f1 = s[i], s[i + n], f[i], f[i + n]
        row.unhedged_return = float((s1 - s0) / s0)
        try:
            row.gev = self.fit_gev(i + self.offset)
            w = cfg.moments_window_steps
            row.moments = estimate_moments(s[i - w : i + 1], f[i - w : i + 1], n,
                                           cfg.convention, cfg.moments_method)
            if cfg.force_theta_zero:
                row.theta0 = row.theta_star = row.liq_prob = row.implied_leverage = 0.0
            else:
                opt = hedge.solve(cfg.profile, row.moments, row.gev)
                row.theta0, row.theta_star = opt.theta0, opt.theta_star
                row.liq_prob, row.implied_leverage = opt.liq_prob, opt.implied_leverage
        except PerpHedgeError as exc:
            row.status = f"failed:{type(exc).__name__}"
            return row
        if cfg.contract.kind == "direct":
            hedge_pnl = row.theta_star * (f1 - f0)
        else:
            hedge_pnl = row.theta_star * (1.0 / f0 - 1.0 / f1) * s1
        row.realized_return = float((s1 - s0 - hedge_pnl) / s0)
        return row


def run(config: BacktestConfig) -> BacktestReport:
    """Run the rolling backtest; failed windows are kept as rows with a reason."""
    runner = _Runner(config)
    indices = runner.decision_indices()
    workers = _worker_count(config.max_workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(runner.window, indices))
    else:
        rows = [runner.window(i) for i in indices]
    rows.sort(key=lambda r: r.window_ts)
    return BacktestReport(rows, summarize(rows))


def summarize(rows: Sequence[WindowResult]) -> dict:
    ok = [r for r in rows if r.ok]
    summary = {
        "window_count": len(ok),
        "failed_count": len(rows) - len(ok),
        "failure_reasons": sorted({r.status for r in rows if not r.ok}),
        "HE": None,
        "mean_theta0": None,
        "mean_liq_prob": None,
        "mean_liq_prob_pct": None,
        "mean_implied_leverage": None,
    }
    if ok:
        summary["mean_theta0"] = float(np.mean([r.theta0 for r in ok]))
        summary["mean_liq_prob"] = float(np.mean([r.liq_prob for r in ok]))
        summary["mean_liq_prob_pct"] = round(100.0 * summary["mean_liq_prob"], 2)
        summary["mean_implied_leverage"] = float(np.mean([r.implied_leverage for r in ok]))
    if len(ok) >= 2:
        try:
            summary["HE"] = hedge_effectiveness(
                [r.realized_return for r in ok], [r.unhedged_return for r in ok]
            )
        except DegenerateBaseline:
            summary["HE"] = None
    return summary


@dataclass
class ProxyDiagnostics:
    ts: np.ndarray
    tau_a: np.ndarray
    tau_b: np.ndarray
    correlation: float

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [(int(t), float(a), float(b), self.correlation)
                for t, a, b in zip(self.ts, self.tau_a, self.tau_b)]


def gev_proxy_diagnostics(series_a: PriceSeries, series_b: PriceSeries, window_steps: int,
                          horizon_steps: int, stride: int | None = None,
                          convention_a: str = "nominal",
                          convention_b: str = "nominal") -> ProxyDiagnostics:
    """Rolling tail-index estimates of two series and the correlation of
    their changes from window to window."""
    a, b = align(series_a, series_b)
    n = horizon_steps
    stride = stride or n
    ext_a = extreme_returns(a.prices, n, convention_a, "right")
    ext_b = extreme_returns(b.prices, n, convention_b, "right")
    ends = np.arange(window_steps, len(a), stride)
    if ends.size < 3:
        raise SeriesTooShort("need at least three windows for tau-change correlation")
    taus = []
    for j in ends:
        anchors = np.arange(j - window_steps, j - n + 1, n)
        taus.append((gev.fit_pwm(ext_a[anchors]).tau, gev.fit_pwm(ext_b[anchors]).tau))
    taus = np.array(taus)
    da, db = np.diff(taus[:, 0]), np.diff(taus[:, 1])
    if np.std(da) == 0 or np.std(db) == 0:
        corr = 1.0 if np.array_equal(da, db) else math.nan
    else:
        corr = float(np.corrcoef(da, db)[0, 1])
    ts = a.start_ts + a.step_ms * ends
    return ProxyDiagnostics(ts, taus[:, 0], taus[:, 1], corr)


def config_dict(config: BacktestConfig) -> dict:
    """Flat description of a config for output headers."""
    return {
        "spot": config.spot.instrument_id,
        "futures": config.futures.instrument_id,
        "gev_proxy": (config.gev_proxy or config.futures).instrument_id,
        "contract": asdict(config.contract),
        "profile": asdict(config.profile),
        "moments_window_steps": config.moments_window_steps,
        "gev_window_steps": config.gev_window_steps,
        "rebalance_steps": config.rebalance_steps,
        "moments_method": config.moments_method,
        "block_overlap": config.block_overlap,
        "force_theta_zero": config.force_theta_zero,
    }
