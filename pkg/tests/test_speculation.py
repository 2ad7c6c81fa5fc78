import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from perphedge import fixture_path
from perphedge import speculation as sp
from perphedge.errors import BadOrdering, ValidationError
from perphedge.speculation import BucketLeverage, BucketRecord, LeverageEstimate, LiquidationEvent


def bucket(volume=2.0, oi=1.0, long_liq=0.0, short_liq=0.0, ohlc=(100.0, 120.0, 90.0, 95.0), ts=0):
    return BucketRecord(ts, volume, oi, long_liq, short_liq, *ohlc)


def event(side, vol, lev):
    return LiquidationEvent(vol, LeverageEstimate(side, "inverse", lev))


def test_speculative_index():
    assert sp.speculative_index(bucket(2.0, 1.0)) == 2.0
    assert sp.speculative_index(bucket(0.0, 1.0)) == 0.0


def test_liquidation_indexes():
    assert sp.liquidation_indexes(bucket(oi=100.0, long_liq=3.0, short_liq=1.0)) == pytest.approx((0.01, 0.03, 0.04))
    assert sp.liquidation_indexes(bucket()) == (0.0, 0.0, 0.0)


def test_backout_leverage_examples():
    assert sp.backout_leverage("inverse", "long", 10000, 5000, 0.0).value == pytest.approx(1.0)
    assert sp.backout_leverage("inverse", "long", 10000, 9500, 0.005).value == pytest.approx(9500 / 550)
    assert sp.backout_leverage("direct", "long", 10000, 9500, 0.005).value == pytest.approx(10000 / 547.5)


def test_backout_leverage_errors():
    with pytest.raises(BadOrdering):
        sp.backout_leverage("direct", "long", 100, 110, 0.005)
    with pytest.raises(BadOrdering):
        sp.backout_leverage("direct", "short", 110, 100, 0.005)
    with pytest.raises(ValidationError):
        sp.backout_leverage("direct", "long", 110, 100, 0.3)
    with pytest.raises(ValidationError):
        sp.backout_leverage("quanto", "long", 110, 100, 0.005)


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(["direct", "inverse"]),
    st.sampled_from(["long", "short"]),
    st.floats(1.5, 200.0),
    st.floats(10.0, 1e5),
    st.floats(0.001, 0.05),
)
def test_backout_inverts_liquidation_price(kind, side, lev, f1, m0):
    from perphedge.margining import liquidation_price

    assume(lev * m0 < 0.99)  # otherwise the position is liquidated on entry
    f2 = liquidation_price(kind, side, f1, lev, m0)
    assume(np.isfinite(f2) and f2 > 0)
    est = sp.backout_leverage(kind, side, f1, f2, m0)
    assert est.value == pytest.approx(lev, rel=1e-9)


def test_lev_indexes():
    assert sp.lev_indexes([event("long", 5.0, 10.0)]) == (10.0, None)
    assert sp.lev_indexes([event("short", 1.0, 10.0), event("short", 3.0, 20.0)]) == (None, 17.5)
    assert sp.lev_indexes([]) == (None, None)


def test_aggressiveness_indexes():
    one = BucketLeverage(100.0, (event("long", 1.0, 10.0),))
    assert sp.aggressiveness_indexes([one]) == pytest.approx((0.10, 0.0, 0.10))
    assert sp.aggressiveness_indexes([BucketLeverage(100.0)]) == (0.0, 0.0, 0.0)


def test_ohlc_price_pair_policies():
    rec = bucket()
    assert sp.ohlc_price_pair(rec, "long", "high-low") == (120.0, 90.0)
    assert sp.ohlc_price_pair(rec, "short", "high-low") == (90.0, 120.0)
    assert sp.ohlc_price_pair(rec, "long", "open-close") == (100.0, 95.0)
    assert sp.ohlc_price_pair(rec, "short", "open-low/high") == (100.0, 120.0)
    with pytest.raises(BadOrdering):
        sp.ohlc_price_pair(rec, "short", "open-close")
    flat = bucket(ohlc=(100.0, 100.0, 100.0, 100.0))
    for policy in sp.POLICIES:
        for side in ("long", "short"):
            with pytest.raises(BadOrdering):
                sp.ohlc_price_pair(flat, side, policy)


def test_flat_bucket_events_are_skipped():
    flat = bucket(long_liq=1.0, short_liq=1.0, ohlc=(100.0, 100.0, 100.0, 100.0))
    summary = sp.summarize([flat], "inverse")
    assert summary.lev_long is None and summary.lev_short is None
    assert summary.ai_total == 0.0
    assert sum(summary.skipped.values()) == 2


def test_bucket_validation():
    with pytest.raises(ValidationError):
        bucket(oi=0.0)
    with pytest.raises(ValidationError):
        bucket(ohlc=(100.0, 99.0, 90.0, 95.0))


def test_zero_liquidation_summary():
    s = sp.summarize([bucket(), bucket(ts=1)], "direct")
    assert (s.liq_short, s.liq_long, s.liq_total) == (0.0, 0.0, 0.0)
    assert (s.ai_long, s.ai_short, s.ai_total) == (0.0, 0.0, 0.0)
    assert s.lev_long is None and s.lev_short is None


def test_per_bucket_means_not_ratio_of_means():
    recs = [bucket(volume=1.0, oi=1.0), bucket(volume=30.0, oi=10.0, ts=1)]
    assert sp.summarize(recs, "direct").si == pytest.approx(2.0)


def test_bundled_buckets_additivity_and_scaling():
    recs = sp.ingest_buckets(fixture_path("buckets.csv"))
    assert len(recs) == 60
    for kind in ("direct", "inverse"):
        for policy in sp.POLICIES:
            s = sp.summarize(recs, kind, policy)
            assert s.liq_total == s.liq_short + s.liq_long
            assert s.ai_total == s.ai_long + s.ai_short
            t = sp.summarize([r.scaled(1234.5) for r in recs], kind, policy)
            for name in ("si", "liq_short", "liq_long", "liq_total", "lev_long", "lev_short",
                         "ai_long", "ai_short", "ai_total"):
                a, b = getattr(s, name), getattr(t, name)
                assert (a is None) == (b is None)
                if a:
                    assert abs(b - a) <= 1e-12 * abs(a)


@pytest.mark.parametrize("kind, side", [("inverse", "long"), ("direct", "long"),
                                        ("inverse", "short"), ("direct", "short")])
def test_backout_monotone_toward_entry(kind, side):
    # the closer the liquidation price to entry, the higher the implied leverage
    f1 = 10000.0
    sign = -1 if side == "long" else 1
    f2 = f1 * (1 + sign * np.linspace(0.3, 0.001, 40))
    lev = [sp.backout_leverage(kind, side, f1, v, 0.005).value for v in f2]
    assert np.all(np.diff(lev) > 0)
