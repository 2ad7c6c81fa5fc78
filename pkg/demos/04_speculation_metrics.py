"""Speculation indexes from 4-hour exchange buckets.

SI compares traded volume with open interest; LIQ, LEV and AI describe
how much was liquidated, at what minimal leverage, and the two combined.
The OHLC policy decides which prices stand in for entry and liquidation.
"""

from perphedge import fixture_path, speculation

records = speculation.ingest_buckets(fixture_path("buckets.csv"))
print(f"{len(records)} buckets")
for kind in ("direct", "inverse"):
    for policy in speculation.POLICIES:
        s = speculation.summarize(records, kind, policy)
        lev = lambda v: "   n/a" if v is None else f"{v:6.2f}"  # noqa: E731
        print(f"{kind:8s} {policy:14s} SI={s.si:5.2f} LIQ={s.liq_total:.4%} "
              f"LEV long={lev(s.lev_long)} short={lev(s.lev_short)} AI={s.ai_total:.3%}"
              f" skipped={sum(s.skipped.values())}")
