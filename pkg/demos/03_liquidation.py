"""Historical liquidation probabilities on a short crash path, and the
fair mark price that exchanges use to trigger liquidations.

Higher leverage and longer holding periods can only raise the
probability, so each row and column of the table is non-decreasing.
"""

import numpy as np

from perphedge import fixture_path, margining
from perphedge.margining import ContractSpec, MarkParams
from perphedge.timeseries import PriceSeries, ingest_csv

series = ingest_csv(fixture_path("crash.csv"))
leverages, horizons = [5, 20, 50, 100], [10, 30, 60]

for kind in ("direct", "inverse"):
    spec = ContractSpec(kind, 1.0, 0.01)
    print(f"\n{kind} perpetual, maintenance rate 1%")
    print("side   lev " + "".join(f"{h:>8d}m" for h in horizons))
    table = margining.liquidation_table(series, spec, leverages, horizons)
    for side in ("long", "short"):
        for lev in leverages:
            cells = [p for s, l, h, p in table if s == side and l == lev]
            print(f"{side:5s} {lev:4d}x" + "".join(f"{p:9.2%}" for p in cells))

hour = 3_600_000
mark = margining.fair_mark_price(10000.0, MarkParams(0.0004, 8 * hour), 6 * hour)
print(f"\nindex 10000, funding 0.04%, 2h to funding -> mark {mark}")

# a mark path that lags the trade price through the crash liquidates fewer longs
padded = np.concatenate([np.full(14, series.prices[0]), series.prices])
index = PriceSeries("index", series.start_ts, series.step_ms,
                    np.convolve(padded, np.ones(15) / 15, mode="valid"))
mark_path = 0.5 * (series.prices + index.prices)
spec = ContractSpec("direct", 1.0, 0.01)
for lev in (20, 50):
    trade = margining.historical_liquidation_probability(series, spec, "long", lev, 30)
    marked = margining.historical_liquidation_probability(series, spec, "long", lev, 30, mark=mark_path)
    print(f"long {lev}x, 30m: trade-price trigger {trade:.2%}, mark-price trigger {marked:.2%}")
