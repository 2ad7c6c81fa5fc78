"""Minute-level price series: ingestion, alignment, returns and block maxima.

Two return conventions are used throughout:

* ``nominal`` (spot and direct perpetuals): ``(X[t+n] - X[t]) / X[t]``
* ``inverse`` (inverse perpetuals, value ``1/F`` per USD of notional):
  ``(1/F[t] - 1/F[t+n]) / (1/F[t]) = 1 - F[t] / F[t+n]``

Both are positive when the price rises, so the right tail is the loss side
for a short futures hedger under either convention.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from perphedge.errors import (
    GapTooLarge,
    HorizonTooLong,
    MalformedRow,
    NonPositivePrice,
    NoOverlap,
    SeriesTooShort,
    StepMismatch,
    ValidationError,
)

Convention = Literal["nominal", "inverse"]
Tail = Literal["right", "left"]

MINUTE_MS = 60_000
DAY_MS = 86_400_000
MAX_FILL_STEPS = 5


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Uniformly spaced, strictly positive prices for one instrument."""

    instrument_id: str
    start_ts: int
    step_ms: int
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        prices = _frozen(self.prices)
        if prices.ndim != 1 or prices.size < 2:
            raise ValidationError("a price series needs at least 2 prices")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise NonPositivePrice(f"{self.instrument_id}: prices must be finite and > 0")
        if int(self.step_ms) <= 0:
            raise ValidationError("step_ms must be a positive integer")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "start_ts", int(self.start_ts))
        object.__setattr__(self, "step_ms", int(self.step_ms))

    def __len__(self) -> int:
        return self.prices.size

    @property
    def end_ts(self) -> int:
        return self.start_ts + (len(self) - 1) * self.step_ms

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_ts + self.step_ms * np.arange(len(self), dtype=np.int64)

    def index_of(self, ts: int) -> int:
        """Index of timestamp ``ts``; it must sit on the grid."""
        offset = ts - self.start_ts
        if offset % self.step_ms or not 0 <= offset // self.step_ms < len(self):
            raise ValidationError(f"timestamp {ts} is not on the grid of {self.instrument_id}")
        return offset // self.step_ms

    def slice(self, start: int, stop: int) -> PriceSeries:
        """Sub-series over index range ``[start, stop)``."""
        return PriceSeries(
            self.instrument_id,
            self.start_ts + start * self.step_ms,
            self.step_ms,
            self.prices[start:stop],
        )


@dataclass(frozen=True)
class ReturnsMatrix:
    """n-period simple returns anchored at every step of a series."""

    base_ts: int
    step_ms: int
    horizon_steps: int
    convention: str
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ExtremeReturnSample:
    """Maximum over n = 1..N of the n-period return anchored at a block start."""

    block_start_ts: int
    block_len_steps: int
    value: float


def parse_timestamp(raw: str) -> int:
    """UTC epoch milliseconds from an integer string or an ISO-8601 stamp."""
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        as_float = float(raw)
    except ValueError:
        as_float = None
    if as_float is not None:
        if not as_float.is_integer():
            raise MalformedRow(f"fractional epoch timestamp {raw!r}")
        return int(as_float)
    text = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise MalformedRow(f"unparseable timestamp {raw!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(round(stamp.timestamp() * 1000))


def parse_decimal(raw: str, what: str = "value") -> float:
    try:
        value = float(raw.strip())
    except (ValueError, AttributeError) as exc:
        raise MalformedRow(f"bad {what} {raw!r}") from exc
    if not math.isfinite(value):
        raise MalformedRow(f"non-finite {what} {raw!r}")
    return value


def read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of a UTF-8 CSV, skipping ``#`` comment lines."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise MalformedRow(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    return header, rows[1:]


_SCHEMAS = {
    "close": ["timestamp", "price"],
    "ohlc": ["timestamp", "open", "high", "low", "close"],
}


def ingest_csv(
    path: str | Path,
    schema: str = "close",
    step_ms: int = MINUTE_MS,
    instrument_id: str | None = None,
) -> PriceSeries:
    """Read a price CSV into a gap-free :class:`PriceSeries`.

    ``schema`` is ``"close"`` (``timestamp,price``) or ``"ohlc"``
    (``timestamp,open,high,low,close``; the close is kept). Up to
    ``MAX_FILL_STEPS`` consecutive missing steps are forward-filled; a longer
    gap raises :class:`GapTooLarge`.
    """
    if schema in ("close-only", "close_only"):
        schema = "close"
    if schema not in _SCHEMAS:
        raise ValidationError(f"unknown schema {schema!r}")
    header, rows = read_rows(path)
    expected = _SCHEMAS[schema]
    if header[: len(expected)] != expected:
        raise MalformedRow(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
    price_col = 1 if schema == "close" else 4

    ts_list: list[int] = []
    px_list: list[float] = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) < len(expected):
            raise MalformedRow(f"{path}:{lineno}: expected {len(expected)} fields")
        ts = parse_timestamp(row[0])
        price = parse_decimal(row[price_col], "price")
        if price <= 0:
            raise NonPositivePrice(f"{path}:{lineno}: price {price} is not positive")
        if ts_list:
            diff = ts - ts_list[-1]
            if diff <= 0:
                raise MalformedRow(f"{path}:{lineno}: timestamps not strictly increasing")
            if diff % step_ms:
                raise MalformedRow(f"{path}:{lineno}: timestamp off the {step_ms} ms grid")
            missing = diff // step_ms - 1
            if missing > MAX_FILL_STEPS:
                raise GapTooLarge(
                    f"{path}:{lineno}: gap of {diff // step_ms} steps exceeds fill limit"
                )
            for k in range(missing):
                ts_list.append(ts_list[-1] + step_ms)
                px_list.append(px_list[-1])
        ts_list.append(ts)
        px_list.append(price)

    if len(px_list) < 2:
        raise MalformedRow(f"{path}: need at least 2 rows")
    return PriceSeries(instrument_id or Path(path).stem, ts_list[0], step_ms, px_list)


def write_csv(series: PriceSeries, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """Write ``timestamp,price`` rows readable by :func:`ingest_csv`."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("timestamp,price\n")
        for ts, px in zip(series.timestamps, series.prices):
            fh.write(f"{int(ts)},{float(px)!r}\n")


def align(a: PriceSeries, b: PriceSeries) -> tuple[PriceSeries, PriceSeries]:
    """Restrict two series to their common timestamp range."""
    if a.step_ms != b.step_ms:
        raise StepMismatch(f"step {a.step_ms} ms vs {b.step_ms} ms")
    if (a.start_ts - b.start_ts) % a.step_ms:
        raise StepMismatch("series grids are offset from each other")
    start = max(a.start_ts, b.start_ts)
    end = min(a.end_ts, b.end_ts)
    if end <= start:
        raise NoOverlap(f"{a.instrument_id} and {b.instrument_id} do not overlap")

    def cut(s: PriceSeries) -> PriceSeries:
        i0 = (start - s.start_ts) // s.step_ms
        i1 = (end - s.start_ts) // s.step_ms + 1
        if i0 == 0 and i1 == len(s):
            return s
        return s.slice(i0, i1)

    return cut(a), cut(b)


def _returns(prices: np.ndarray, n: int, convention: str) -> np.ndarray:
    base, ahead = prices[:-n], prices[n:]
    if convention == "nominal":
        return (ahead - base) / base
    if convention == "inverse":
        return 1.0 - base / ahead
    raise ValidationError(f"unknown convention {convention!r}")


def n_period_returns(series: PriceSeries, n: int, convention: Convention = "nominal") -> ReturnsMatrix:
    """n-period returns anchored at every index that admits a full horizon."""
    if not 1 <= n < len(series):
        raise HorizonTooLong(f"n={n} needs 1 <= n < {len(series)}")
    values = _frozen(_returns(series.prices, n, convention))
    return ReturnsMatrix(series.start_ts, series.step_ms, n, convention, values)


def _window_extremes(prices: np.ndarray, block_steps: int) -> tuple[np.ndarray, np.ndarray]:
    # max / min over prices[i+1 : i+N+1] for every anchor i with i+N in range
    n_anchor = prices.size - block_steps
    ahead = prices[1:]
    hi = maximum_filter1d(ahead, size=block_steps, origin=-(block_steps // 2), mode="nearest")
    lo = minimum_filter1d(ahead, size=block_steps, origin=-(block_steps // 2), mode="nearest")
    return hi[:n_anchor], lo[:n_anchor]


def extreme_returns(
    prices: np.ndarray,
    block_steps: int,
    convention: Convention = "nominal",
    tail: Tail = "right",
    anchors: np.ndarray | None = None,
) -> np.ndarray:
    """``max_{1<=n<=N}`` of the (signed) n-period return at each anchor index.

    Both conventions are monotone in the future price, so the maximum over
    the horizon is attained at the highest (right tail) or lowest (left
    tail) future price.
    """
    prices = np.asarray(prices, dtype=float)
    hi, lo = _window_extremes(prices, block_steps)
    idx = np.arange(hi.size) if anchors is None else np.asarray(anchors)
    base, hi, lo = prices[idx], hi[idx], lo[idx]
    if convention == "nominal":
        return hi / base - 1.0 if tail == "right" else 1.0 - lo / base
    if convention == "inverse":
        return 1.0 - base / hi if tail == "right" else base / lo - 1.0
    raise ValidationError(f"unknown convention {convention!r}")


def block_anchors(n_prices: int, block_steps: int, overlap: bool = False) -> np.ndarray:
    """Anchor indices of the blocks whose full horizon fits in the series."""
    last = n_prices - 1 - block_steps
    if last < 0:
        return np.empty(0, dtype=int)
    return np.arange(0, last + 1, 1 if overlap else block_steps)


def block_maxima(
    series: PriceSeries,
    block_steps: int,
    convention: Convention = "nominal",
    tail: Tail = "right",
    overlap: bool = False,
) -> list[ExtremeReturnSample]:
    """Extreme returns of consecutive non-overlapping blocks of ``block_steps``.

    Block ``k`` is anchored at index ``k * N`` and looks ahead ``n = 1..N``
    steps, so its last price is the next block's anchor. With
    ``overlap=True`` every index is an anchor instead.
    """
    if block_steps < 1:
        raise ValidationError("block_steps must be >= 1")
    if len(series) < block_steps + 1:
        raise SeriesTooShort(f"{len(series)} prices cannot hold a block of {block_steps} steps")
    anchors = block_anchors(len(series), block_steps, overlap)
    values = extreme_returns(series.prices, block_steps, convention, tail, anchors)
    ts = series.start_ts + series.step_ms * anchors
    return [ExtremeReturnSample(int(t), block_steps, float(v)) for t, v in zip(ts, values)]


def block_maxima_values(
    series: PriceSeries,
    block_steps: int,
    convention: Convention = "nominal",
    tail: Tail = "right",
    overlap: bool = False,
) -> np.ndarray:
    """Same as :func:`block_maxima` but returns the bare values."""
    return np.array([s.value for s in block_maxima(series, block_steps, convention, tail, overlap)])
