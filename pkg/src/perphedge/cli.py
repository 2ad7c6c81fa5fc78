"""Command-line interface: ``perp-hedge <command> [options]``.

Commands: ``fit-gev``, ``solve``, ``backtest``, ``liq``, ``metrics``, ``mark``.

Options may also come from a flat ``key = value`` config file given with
``--config``; keys are option names with or without the leading dashes and
with ``-`` or ``_``. Command-line flags override the file. Every output file
starts with ``#`` comment lines echoing the effective configuration.

Exit codes: 0 success, 1 invalid parameters, 2 input data error,
3 estimation error, 4 solver error (no root / non-positive b).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


from perphedge import backtest, gev, hedge, margining, speculation
from perphedge.errors import (
    EstimationError,
    IngestionError,
    PerpHedgeError,
    SolverError,
    ValidationError,
)
from perphedge.timeseries import MINUTE_MS, block_maxima, ingest_csv, write_csv

EXIT_OK, EXIT_VALIDATION, EXIT_INGEST, EXIT_ESTIMATION, EXIT_SOLVER = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def fmt(x) -> str:
    return f"{float(x):.10g}"


def pct(p) -> str:
    return f"{100.0 * float(p):.2f}"


def read_config(path) -> dict:
    """Parse a flat ``key = value`` document; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _float_list(text) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int_list(text) -> list[int]:
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


class Options:
    """Merged view of parsed flags over config-file values."""

    def __init__(self, ns: argparse.Namespace, config: dict):
        self._ns = vars(ns)
        self._config = config
        self.used: dict = {}

    def get(self, key, cast=str, default=None, required=False):
        value = self._ns.get(key)
        if value is None or value is False:
            value = self._config.get(key, value if value is False else None)
        if value is None:
            if required:
                raise UsageError(f"missing required option --{key.replace('_', '-')}")
            value = default
        elif cast is bool:
            value = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = cast(value)
            except ValueError as exc:
                raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from exc
        self.used[key] = value
        return value

    def header(self) -> list[str]:
        # the output location is not part of the run, so identical runs match byte for byte
        self.get("seed", int, 0)
        return [f"{k}={v}" for k, v in sorted(self.used.items()) if k != "out"]


def _out_dir(opts: Options) -> Path:
    out = Path(opts.get("out", str, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(path: Path, header_lines, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _profile(opts: Options, kind: str) -> hedge.HedgerProfile:
    return hedge.HedgerProfile(
        m_bar=opts.get("m_bar", float, required=True),
        gamma=opts.get("gamma", float, required=True),
        m0=opts.get("m0", float, 0.01),
        horizon_steps=opts.get("horizon", int, 1),
        kind=kind,
    )


def cmd_fit_gev(opts: Options) -> int:
    series = ingest_csv(opts.get("input", str, required=True), opts.get("schema", str, "close"),
                        opts.get("step_ms", int, MINUTE_MS))
    n = opts.get("horizon", int, required=True)
    convention = opts.get("convention", str, "nominal")
    tail = opts.get("tail", str, "right")
    samples = block_maxima(series, n, convention, tail, overlap=opts.get("overlap", bool, False))
    params = gev.fit_pwm(samples)
    table = gev.empirical_cdf_table(samples, params)
    out = _out_dir(opts)
    _write_table(out / "gev_cdf_table.csv", opts.header(), ["x", "empirical_cdf", "fitted_cdf"],
                 [[fmt(x), fmt(e), fmt(f)] for x, e, f in table])
    result = {"tau": params.tau, "alpha": params.alpha, "beta": params.beta,
              "n_samples": len(samples), "tail": tail, "convention": convention,
              "horizon_steps": n, "config": dict(sorted(opts.used.items()))}
    (out / "gev_params.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    _emit(result)
    return EXIT_OK


def _moments(opts: Options) -> hedge.MarketMoments:
    f_t = opts.get("f_t", float, 1.0)
    s2s = opts.get("sigma2_s", float)
    if s2s is not None:
        return hedge.MarketMoments(s2s, opts.get("sigma2_f", float, required=True),
                                   opts.get("sigma2_sf", float, required=True), f_t)
    b = opts.get("b", float, required=True)
    nu = opts.get("nu", float, 1.0)
    return hedge.MarketMoments.from_ratios(b, nu, 1.0, f_t)


def cmd_solve(opts: Options) -> int:
    kind = opts.get("kind", str, "direct")
    profile = _profile(opts, kind)
    mm = _moments(opts)
    params = gev.GevParams(opts.get("tau", float, 0.59), opts.get("alpha", float, 0.011),
                           opts.get("beta", float, 0.011))
    sweep = opts.get("sweep", str)
    out = _out_dir(opts)
    if sweep:
        grid = _float_list(opts.get("grid", str, required=True))
        rows = hedge.sensitivity_sweep(profile, mm, params, sweep, grid)
        _write_table(out / f"sweep_{sweep}.csv", opts.header(), [sweep, "theta0"],
                     [[fmt(v), fmt(t)] for v, t in rows])
        _emit({"sweep": sweep, "rows": [{sweep: v, "theta0": t} for v, t in rows]})
        return EXIT_OK
    opt = hedge.solve(profile, mm, params)
    result = {
        "theta0": opt.theta0, "theta_star": opt.theta_star, "liq_prob": opt.liq_prob,
        "liq_prob_pct": float(pct(opt.liq_prob)), "implied_leverage": opt.implied_leverage,
        "objective": opt.objective_value, "b": opt.b, "config": dict(sorted(opts.used.items())),
    }
    (out / "solve.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    _emit(result)
    return EXIT_OK


def cmd_backtest(opts: Options) -> int:
    step_ms = opts.get("step_ms", int, MINUTE_MS)
    schema = opts.get("schema", str, "close")
    spot = ingest_csv(opts.get("spot", str, required=True), schema, step_ms)
    futures = ingest_csv(opts.get("futures", str, required=True), schema, step_ms)
    proxy_path = opts.get("proxy", str)
    proxy = ingest_csv(proxy_path, schema, step_ms) if proxy_path else None
    kind = opts.get("kind", str, "direct")
    profile = _profile(opts, kind)
    contract = margining.ContractSpec(kind, 1.0, profile.m0)
    config = backtest.BacktestConfig(
        spot=spot, futures=futures, contract=contract, profile=profile, gev_proxy=proxy,
        moments_window_steps=opts.get("moments_window_steps", int),
        gev_window_steps=opts.get("gev_window_steps", int),
        rebalance_steps=opts.get("rebalance_steps", int),
        moments_method=opts.get("moments_method", str, "overlapping"),
        block_overlap=opts.get("block_overlap", bool, False),
        force_theta_zero=opts.get("theta_zero", bool, False),
    )
    report = backtest.run(config)
    out = _out_dir(opts)
    report.write_csv(out / "backtest.csv", opts.header())
    summary = dict(report.summary, config=backtest.config_dict(config))
    (out / "backtest_summary.json").write_text(
        json.dumps(backtest._jsonable(summary), indent=2, sort_keys=True) + "\n")
    _emit(backtest._jsonable(report.summary))
    return EXIT_OK


def cmd_liq(opts: Options) -> int:
    step_ms = opts.get("step_ms", int, MINUTE_MS)
    series = ingest_csv(opts.get("input", str, required=True), opts.get("schema", str, "close"), step_ms)
    mark_path = opts.get("mark", str)
    mark = ingest_csv(mark_path, "close", step_ms) if mark_path else None
    if mark is not None and (mark.start_ts != series.start_ts or len(mark) != len(series)):
        raise ValidationError("mark price series must cover the same timestamps as the input")
    spec = margining.ContractSpec(opts.get("kind", str, "direct"), 1.0, opts.get("m0", float, 0.01))
    leverages = _float_list(opts.get("leverages", str, "5,20,50,100"))
    horizons = _int_list(opts.get("horizons", str, "480,1440"))
    table = margining.liquidation_table(series, spec, leverages, horizons, mark=mark)
    out = _out_dir(opts)
    _write_table(out / "liq_table.csv", opts.header(),
                 ["side", "leverage", "horizon_steps", "probability", "probability_pct"],
                 [[s, fmt(l), str(h), fmt(p), pct(p)] for s, l, h, p in table])
    _emit([{"side": s, "leverage": l, "horizon_steps": h, "probability": p} for s, l, h, p in table])
    return EXIT_OK


def cmd_metrics(opts: Options) -> int:
    records = speculation.ingest_buckets(opts.get("input", str, required=True))
    policy = opts.get("policy", str, "high-low")
    summary = speculation.summarize(records, opts.get("kind", str, "direct"), policy,
                                    opts.get("m0", float, speculation.DEFAULT_M0))
    columns = ["kind", "policy", "m0", "n_buckets", "si", "liq_short", "liq_long", "liq_total"]
    values = [summary.kind, summary.policy, fmt(summary.m0), str(summary.n_buckets),
              fmt(summary.si), fmt(summary.liq_short), fmt(summary.liq_long), fmt(summary.liq_total)]
    for name in ("lev_long", "lev_short"):
        if getattr(summary, name) is not None:
            columns.append(name)
            values.append(fmt(getattr(summary, name)))
    columns += ["ai_long", "ai_short", "ai_total", "skipped_events"]
    values += [fmt(summary.ai_long), fmt(summary.ai_short), fmt(summary.ai_total),
               str(sum(summary.skipped.values()))]
    out = _out_dir(opts)
    _write_table(out / "metrics.csv", opts.header() + [f"ohlc_policy={policy}"], columns, [values])
    _emit(dict(zip(columns, values)))
    return EXIT_OK


def cmd_mark(opts: Options) -> int:
    out = _out_dir(opts)
    interval = opts.get("interval_ms", int, margining.FUNDING_INTERVAL_MS)
    index_path = opts.get("index", str)
    if index_path:
        step_ms = opts.get("step_ms", int, MINUTE_MS)
        index = ingest_csv(index_path, opts.get("schema", str, "close"), step_ms)
        ts, rates = margining.ingest_funding_csv(opts.get("funding", str, required=True))
        marks = margining.mark_price_series(index, ts, rates, interval)
        write_csv(marks, out / "mark.csv", opts.header())
        _emit({"rows": len(marks), "output": str(out / "mark.csv")})
        return EXIT_OK
    mp = margining.MarkParams(opts.get("rate", float, required=True),
                              opts.get("next_funding_ts", int, required=True), interval)
    value = margining.fair_mark_price(opts.get("index_price", float, required=True), mp,
                                      opts.get("now_ts", int, required=True))
    _emit({"mark_price": value})
    return EXIT_OK


COMMANDS = {
    "fit-gev": cmd_fit_gev,
    "solve": cmd_solve,
    "backtest": cmd_backtest,
    "liq": cmd_liq,
    "metrics": cmd_metrics,
    "mark": cmd_mark,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a value given before the subcommand from being reset
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="PRNG seed recorded in output headers")

    parser = argparse.ArgumentParser(prog="perp-hedge", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-gev", parents=[common], help="fit GEV to block-maximum returns")
    p.add_argument("--input")
    p.add_argument("--schema", choices=["close", "ohlc"])
    p.add_argument("--step-ms", type=int)
    p.add_argument("--horizon", type=int, help="block length N in steps")
    p.add_argument("--convention", choices=["nominal", "inverse"])
    p.add_argument("--tail", choices=["right", "left"])
    p.add_argument("--overlap", action="store_true", default=None)

    hedger = argparse.ArgumentParser(add_help=False)
    hedger.add_argument("--kind", choices=["direct", "inverse"])
    hedger.add_argument("--m-bar", type=float)
    hedger.add_argument("--gamma", type=float)
    hedger.add_argument("--m0", type=float)
    hedger.add_argument("--horizon", type=int)

    p = sub.add_parser("solve", parents=[common, hedger], help="optimal hedge for given parameters")
    for name in ("tau", "alpha", "beta", "b", "nu", "sigma2-s", "sigma2-f", "sigma2-sf", "f-t"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--sweep", choices=["gamma", "m_bar", "tau", "rho"])
    p.add_argument("--grid", help="comma-separated sweep values")

    p = sub.add_parser("backtest", parents=[common, hedger], help="rolling-window backtest")
    p.add_argument("--spot")
    p.add_argument("--futures")
    p.add_argument("--proxy")
    p.add_argument("--schema", choices=["close", "ohlc"])
    p.add_argument("--step-ms", type=int)
    p.add_argument("--moments-window-steps", type=int)
    p.add_argument("--gev-window-steps", type=int)
    p.add_argument("--rebalance-steps", type=int)
    p.add_argument("--moments-method", choices=["overlapping", "scaled"])
    p.add_argument("--block-overlap", action="store_true", default=None)
    p.add_argument("--theta-zero", action="store_true", default=None,
                   help="diagnostic: hold no futures in every window")

    p = sub.add_parser("liq", parents=[common], help="historical liquidation probability table")
    p.add_argument("--input")
    p.add_argument("--schema", choices=["close", "ohlc"])
    p.add_argument("--step-ms", type=int)
    p.add_argument("--mark", help="optional mark price CSV used for triggering")
    p.add_argument("--kind", choices=["direct", "inverse"])
    p.add_argument("--m0", type=float)
    p.add_argument("--leverages", help="comma-separated, e.g. 5,20,50,100")
    p.add_argument("--horizons", help="comma-separated horizons in steps")

    p = sub.add_parser("metrics", parents=[common], help="speculation metrics from 4h buckets")
    p.add_argument("--input")
    p.add_argument("--kind", choices=["direct", "inverse"])
    p.add_argument("--policy", choices=list(speculation.POLICIES))
    p.add_argument("--m0", type=float)

    p = sub.add_parser("mark", parents=[common], help="fair mark price")
    p.add_argument("--index-price", type=float)
    p.add_argument("--rate", type=float)
    p.add_argument("--now-ts", type=int)
    p.add_argument("--next-funding-ts", type=int)
    p.add_argument("--interval-ms", type=int)
    p.add_argument("--index", help="index price CSV")
    p.add_argument("--funding", help="funding rate CSV (timestamp,rate)")
    p.add_argument("--schema", choices=["close", "ohlc"])
    p.add_argument("--step-ms", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        config_path = getattr(ns, "config", None)
        config = read_config(config_path) if config_path else {}
        opts = Options(ns, config)
        return COMMANDS[ns.command](opts)
    except (UsageError, FileNotFoundError) as exc:
        code = EXIT_INGEST if isinstance(exc, FileNotFoundError) else EXIT_VALIDATION
        print(f"error: {exc}", file=sys.stderr)
        return code
    except PerpHedgeError as exc:
        if isinstance(exc, IngestionError):
            code = EXIT_INGEST
        elif isinstance(exc, EstimationError):
            code = EXIT_ESTIMATION
        elif isinstance(exc, SolverError):
            code = EXIT_SOLVER
        else:
            code = EXIT_VALIDATION
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
