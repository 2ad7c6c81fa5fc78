"""Exchange speculation metrics from 4-hour volume / open interest / liquidation buckets.

* SI   speculative index, volume over open interest
* LIQ  short, long and total liquidations over open interest
* LEV  liquidation-volume-weighted minimal leverage of liquidated positions
* AI   leverage-weighted liquidations over open interest

SI, LIQ and AI are reported as means of per-bucket ratios. LEV is a single
volume-weighted mean over the whole sample. The minimal leverage of a
liquidated position is backed out from an (entry, liquidation) price pair
taken from the bucket's OHLC prices according to a configurable policy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from perphedge.errors import BadOrdering, DegenerateDenominator, ValidationError
from perphedge.timeseries import parse_decimal, parse_timestamp, read_rows

logger = logging.getLogger(__name__)

Kind = Literal["direct", "inverse"]
Side = Literal["long", "short"]
POLICIES = ("high-low", "open-close", "open-low/high")
DEFAULT_M0 = 0.005

BUCKET_COLUMNS = [
    "timestamp", "volume_usd", "open_interest_usd", "long_liq_usd",
    "short_liq_usd", "open", "high", "low", "close",
]


@dataclass(frozen=True)
class BucketRecord:
    bucket_start_ts: int
    volume_usd: float
    open_interest_usd: float
    long_liq_usd: float
    short_liq_usd: float
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        if not self.open_interest_usd > 0:
            raise ValidationError("open interest must be positive")
        if min(self.volume_usd, self.long_liq_usd, self.short_liq_usd) < 0:
            raise ValidationError("volumes must be non-negative")
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValidationError("OHLC prices must be positive")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise ValidationError("inconsistent OHLC prices")

    def scaled(self, c: float) -> BucketRecord:
        """Copy with every USD amount multiplied by ``c``."""
        return BucketRecord(
            self.bucket_start_ts, self.volume_usd * c, self.open_interest_usd * c,
            self.long_liq_usd * c, self.short_liq_usd * c,
            self.open, self.high, self.low, self.close,
        )


@dataclass(frozen=True)
class LeverageEstimate:
    side: Side
    kind: Kind
    value: float

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValidationError("leverage must be positive and finite")


@dataclass(frozen=True)
class LiquidationEvent:
    """One side's liquidation volume in one bucket and its backed-out leverage."""

    volume: float
    leverage: LeverageEstimate


@dataclass(frozen=True)
class BucketLeverage:
    open_interest: float
    events: tuple[LiquidationEvent, ...] = ()


@dataclass
class MetricsSummary:
    kind: str
    policy: str
    m0: float
    n_buckets: int
    si: float
    liq_short: float
    liq_long: float
    liq_total: float
    lev_long: float | None
    lev_short: float | None
    ai_long: float
    ai_short: float
    ai_total: float
    skipped: dict = field(default_factory=dict)


def speculative_index(rec: BucketRecord) -> float:
    return rec.volume_usd / rec.open_interest_usd


def liquidation_indexes(rec: BucketRecord) -> tuple[float, float, float]:
    """``(liq_short, liq_long, liq_total)`` for one bucket."""
    oi = rec.open_interest_usd
    short, long_ = rec.short_liq_usd / oi, rec.long_liq_usd / oi
    return short, long_, short + long_


def backout_leverage(kind: Kind, side: Side, f1: float, f2: float, m0: float) -> LeverageEstimate:
    """Minimal leverage of a position opened at ``f1`` and liquidated at ``f2``.

    ``f1`` must exceed ``f2`` for a long and lie below it for a short.
    """
    if kind not in ("direct", "inverse"):
        raise ValidationError(f"unknown contract kind {kind!r}")
    if not 0 <= m0 < 0.25:
        raise ValidationError(f"maintenance rate must lie in [0, 0.25), got {m0}")
    if side == "long":
        if not f1 > f2:
            raise BadOrdering(f"long liquidation needs f1 > f2, got {f1}, {f2}")
    elif side == "short":
        if not f1 < f2:
            raise BadOrdering(f"short liquidation needs f1 < f2, got {f1}, {f2}")
    else:
        raise ValidationError(f"unknown side {side!r}")

    if kind == "inverse":
        num = f2
        den = (1.0 + m0) * f1 - f2 if side == "long" else f2 - (1.0 - m0) * f1
    else:
        num = f1
        den = f1 - (1.0 - m0) * f2 if side == "long" else (1.0 + m0) * f2 - f1
    if not den > 0:
        raise DegenerateDenominator(f"prices {f1}, {f2} too close for m0={m0}")
    return LeverageEstimate(side, kind, num / den)


def ohlc_price_pair(rec: BucketRecord, side: Side, policy: str = "high-low") -> tuple[float, float]:
    """(entry reference, liquidation reference) prices for one bucket and side."""
    if policy == "high-low":
        pair = (rec.high, rec.low) if side == "long" else (rec.low, rec.high)
    elif policy == "open-close":
        pair = (rec.open, rec.close)
    elif policy == "open-low/high":
        pair = (rec.open, rec.low) if side == "long" else (rec.open, rec.high)
    else:
        raise ValidationError(f"unknown OHLC policy {policy!r}; choose from {POLICIES}")
    f1, f2 = pair
    if (side == "long" and not f1 > f2) or (side == "short" and not f1 < f2):
        raise BadOrdering(f"policy {policy} gives {pair} for a {side} liquidation")
    return pair


def lev_indexes(events: Iterable[LiquidationEvent]) -> tuple[float | None, float | None]:
    """Volume-weighted mean leverage per side; ``None`` for a side with no volume."""
    sums = {"long": [0.0, 0.0], "short": [0.0, 0.0]}
    for ev in events:
        acc = sums[ev.leverage.side]
        acc[0] += ev.volume * ev.leverage.value
        acc[1] += ev.volume
    return tuple(s[0] / s[1] if s[1] > 0 else None for s in (sums["long"], sums["short"]))


def aggressiveness_indexes(buckets: Sequence[BucketLeverage]) -> tuple[float, float, float]:
    """``(ai_long, ai_short, ai_total)``: mean over buckets of
    ``sum(volume * leverage) / open interest``."""
    if not buckets:
        return 0.0, 0.0, 0.0
    ratios = np.zeros((len(buckets), 2))
    for i, bucket in enumerate(buckets):
        if not bucket.open_interest > 0:
            raise ValidationError("open interest must be positive")
        for ev in bucket.events:
            ratios[i, 0 if ev.leverage.side == "long" else 1] += ev.volume * ev.leverage.value
        ratios[i] /= bucket.open_interest
    ai_long, ai_short = ratios.mean(axis=0)
    return float(ai_long), float(ai_short), float(ai_long + ai_short)


def bucket_leverage(rec: BucketRecord, kind: Kind, policy: str = "high-low",
                    m0: float = DEFAULT_M0, skipped: dict | None = None) -> BucketLeverage:
    """Liquidation events of one bucket with their backed-out leverage.

    Events whose price pair is badly ordered or implies infinite leverage are
    dropped and counted in ``skipped``.
    """
    events = []
    for side, volume in (("long", rec.long_liq_usd), ("short", rec.short_liq_usd)):
        if volume <= 0:
            continue
        try:
            f1, f2 = ohlc_price_pair(rec, side, policy)
            lev = backout_leverage(kind, side, f1, f2, m0)
        except (BadOrdering, DegenerateDenominator) as exc:
            if skipped is not None:
                key = f"{side}:{type(exc).__name__}"
                skipped[key] = skipped.get(key, 0) + 1
            logger.debug("skipping %s event at %s: %s", side, rec.bucket_start_ts, exc)
            continue
        events.append(LiquidationEvent(volume, lev))
    return BucketLeverage(rec.open_interest_usd, tuple(events))


def summarize(records: Sequence[BucketRecord], kind: Kind, policy: str = "high-low",
              m0: float = DEFAULT_M0) -> MetricsSummary:
    """All speculation indexes over a sample of buckets."""
    if not records:
        raise ValidationError("no bucket records")
    skipped: dict = {}
    buckets = [bucket_leverage(r, kind, policy, m0, skipped) for r in records]
    liq = np.array([liquidation_indexes(r) for r in records]).mean(axis=0)
    si = float(np.mean([speculative_index(r) for r in records]))
    lev_long, lev_short = lev_indexes(ev for b in buckets for ev in b.events)
    ai_long, ai_short, _ = aggressiveness_indexes(buckets)
    return MetricsSummary(
        kind=kind, policy=policy, m0=m0, n_buckets=len(records), si=si,
        liq_short=float(liq[0]), liq_long=float(liq[1]), liq_total=float(liq[0] + liq[1]),
        lev_long=lev_long, lev_short=lev_short,
        ai_long=ai_long, ai_short=ai_short, ai_total=ai_long + ai_short,
        skipped=skipped,
    )


def ingest_buckets(path) -> list[BucketRecord]:
    """Read the 4-hour bucket CSV."""
    header, rows = read_rows(path)
    if header[: len(BUCKET_COLUMNS)] != BUCKET_COLUMNS:
        raise ValidationError(f"{path}: expected header {','.join(BUCKET_COLUMNS)}")
    out = []
    for row in rows:
        ts = parse_timestamp(row[0])
        nums = [parse_decimal(v, col) for v, col in zip(row[1:9], BUCKET_COLUMNS[1:])]
        out.append(BucketRecord(ts, *nums))
    return out
