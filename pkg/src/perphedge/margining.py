"""Perpetual contract P&L, margin accounting and liquidation.

Direct (linear) perpetuals have a notional in BTC and settle in USDT:
a long makes ``exit - entry`` per BTC. Inverse perpetuals have a notional in
USD and settle in BTC: a long makes ``1/entry - 1/exit`` per USD. USDT is
taken as exactly one USD.

A position is liquidated as soon as its loss exceeds the margin buffer,
initial margin minus maintenance margin, both measured in the settlement
currency at the current price. Equality does not liquidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from perphedge.errors import (
    ClockAfterFunding,
    HorizonTooLong,
    SeriesTooShort,
    ValidationError,
)
from perphedge.timeseries import PriceSeries, parse_decimal, parse_timestamp, read_rows

Kind = Literal["direct", "inverse"]
Side = Literal["long", "short"]

FUNDING_INTERVAL_MS = 8 * 3_600_000


def _check_kind(kind: str) -> None:
    if kind not in ("direct", "inverse"):
        raise ValidationError(f"contract kind must be 'direct' or 'inverse', got {kind!r}")


def _check_side(side: str) -> None:
    if side not in ("long", "short"):
        raise ValidationError(f"side must be 'long' or 'short', got {side!r}")


@dataclass(frozen=True)
class ContractSpec:
    kind: Kind = "direct"
    notional: float = 1.0
    maintenance_rate: float = 0.01

    def __post_init__(self):
        _check_kind(self.kind)
        if not self.notional > 0:
            raise ValidationError("notional must be positive")
        if not 0 < self.maintenance_rate < 0.25:
            raise ValidationError("maintenance rate must lie in (0, 0.25)")


@dataclass(frozen=True)
class Position:
    side: Side
    contracts: float
    entry_price: float
    leverage: float

    def __post_init__(self):
        _check_side(self.side)
        if not self.contracts > 0:
            raise ValidationError("contracts must be positive")
        if not self.entry_price > 0:
            raise ValidationError("entry price must be positive")
        if not self.leverage > 0:
            raise ValidationError("leverage must be positive")


@dataclass(frozen=True)
class MarkParams:
    funding_rate: float
    next_funding_ts: int
    funding_interval_ms: int = FUNDING_INTERVAL_MS

    def __post_init__(self):
        if self.funding_interval_ms <= 0:
            raise ValidationError("funding interval must be positive")


@dataclass(frozen=True)
class SimulationOutcome:
    liquidated_at: int | None
    realized_return: float

    @property
    def survived(self) -> bool:
        return self.liquidated_at is None


def pnl(spec: ContractSpec, side: Side, entry: float, exit: float) -> float:
    """Settled P&L of one contract: USDT for direct, BTC for inverse."""
    _check_side(side)
    if not (entry > 0 and exit > 0):
        raise ValidationError("prices must be positive")
    if spec.kind == "direct":
        long_pnl = (exit - entry) * spec.notional
    else:
        long_pnl = (1.0 / entry - 1.0 / exit) * spec.notional
    return long_pnl if side == "long" else -long_pnl


def initial_margin(spec: ContractSpec, pos: Position) -> float:
    """Initial margin per contract in the settlement currency."""
    if spec.kind == "direct":
        return spec.notional * pos.entry_price / pos.leverage
    return spec.notional / (pos.leverage * pos.entry_price)


def fair_mark_price(index_price: float, mp: MarkParams, now_ts: int) -> float:
    """Index price times one plus the funding basis, which decays linearly to
    zero at the next funding time."""
    if not index_price > 0:
        raise ValidationError("index price must be positive")
    until = mp.next_funding_ts - now_ts
    if until <= 0:
        raise ClockAfterFunding(f"now {now_ts} is not before the funding time {mp.next_funding_ts}")
    if until > mp.funding_interval_ms:
        raise ValidationError("next funding time is more than one interval away")
    return index_price + index_price * mp.funding_rate * (until / mp.funding_interval_ms)


def _trigger(kind: str, side: str, entry, price, leverage, m0):
    # margin-buffer inequality multiplied through by the positive factor
    # 1 (direct) or entry*price (inverse) so that the boundary is exact
    inv_lev = 1.0 / leverage
    if kind == "direct":
        buffer = entry * inv_lev - m0 * price
        loss = entry - price if side == "long" else price - entry
    else:
        buffer = price * inv_lev - m0 * entry
        loss = entry - price if side == "long" else price - entry
    return loss > buffer


def liquidation_trigger(spec: ContractSpec, pos: Position, current_price: float) -> bool:
    """True iff the per-contract loss exceeds initial minus maintenance margin."""
    if not current_price > 0:
        raise ValidationError("price must be positive")
    return bool(
        _trigger(spec.kind, pos.side, pos.entry_price, current_price, pos.leverage, spec.maintenance_rate)
    )


def liquidation_price(kind: Kind, side: Side, entry: float, leverage: float, m0: float) -> float:
    """Price at which the liquidation inequality holds with equality.

    Returns ``inf`` for an inverse short that can never be liquidated
    (``leverage <= 1``) and ``0`` for a direct long that cannot be.
    """
    _check_kind(kind)
    _check_side(side)
    inv_lev = 1.0 / leverage
    if kind == "direct":
        if side == "long":
            return max(entry * (1.0 - inv_lev) / (1.0 - m0), 0.0)
        return entry * (1.0 + inv_lev) / (1.0 + m0)
    if side == "long":
        return entry * (1.0 + m0) / (1.0 + inv_lev)
    if leverage <= 1.0:
        return math.inf
    return entry * (1.0 - m0) / (1.0 - inv_lev)


def _path_prices(path) -> np.ndarray:
    return path.prices if isinstance(path, PriceSeries) else np.asarray(path, dtype=float)


def simulate_liquidation(
    path,
    spec: ContractSpec,
    pos: Position,
    horizon_steps: int,
    entry_index: int = 0,
    mark=None,
) -> SimulationOutcome:
    """Hold ``pos`` from ``entry_index`` for ``horizon_steps`` along ``path``.

    Liquidation is checked at every step against ``mark`` when given (the
    fair mark price path, same grid as ``path``), otherwise against the trade
    price. A liquidation loses the whole initial margin (return -1);
    otherwise the return is the horizon P&L over the initial margin.
    """
    prices = _path_prices(path)
    marks = prices if mark is None else _path_prices(mark)
    if marks.shape != prices.shape:
        raise ValidationError("mark path must match the trade price path")
    if horizon_steps < 1 or entry_index + horizon_steps > prices.size - 1:
        raise HorizonTooLong(
            f"horizon {horizon_steps} from index {entry_index} exceeds a path of {prices.size}"
        )
    window = marks[entry_index + 1 : entry_index + horizon_steps + 1]
    fired = _trigger(spec.kind, pos.side, pos.entry_price, window, pos.leverage, spec.maintenance_rate)
    hits = np.flatnonzero(fired)
    if hits.size:
        return SimulationOutcome(int(hits[0]) + 1, -1.0)
    exit_price = float(prices[entry_index + horizon_steps])
    ret = pnl(spec, pos.side, pos.entry_price, exit_price) / initial_margin(spec, pos)
    return SimulationOutcome(None, float(ret))


def liquidation_flags(prices: np.ndarray, spec: ContractSpec, side: Side, leverage: float,
                      horizon_steps: int, mark: np.ndarray | None = None) -> np.ndarray:
    """Per-entry liquidation indicator for every entry with a full horizon.

    The trigger is monotone in the price (a long fires at every price below
    one where it fires), so each window only needs its extreme mark price.
    """
    marks = prices if mark is None else mark
    n_entry = prices.size - horizon_steps
    ahead = marks[1:]
    origin = -(horizon_steps // 2)
    if side == "long":
        worst = minimum_filter1d(ahead, size=horizon_steps, origin=origin, mode="nearest")
    else:
        worst = maximum_filter1d(ahead, size=horizon_steps, origin=origin, mode="nearest")
    entries = prices[:n_entry]
    return _trigger(spec.kind, side, entries, worst[:n_entry], leverage, spec.maintenance_rate)


def historical_liquidation_probability(
    path,
    spec: ContractSpec,
    side: Side,
    leverage: float,
    horizon_steps: int,
    mark=None,
) -> float:
    """Fraction of entry times whose position is liquidated within the horizon.

    Every step that admits a full horizon is an entry; the entry price is the
    trade price at that step.
    """
    _check_side(side)
    if not leverage > 0:
        raise ValidationError("leverage must be positive")
    prices = _path_prices(path)
    marks = None if mark is None else _path_prices(mark)
    if horizon_steps < 1 or prices.size < horizon_steps + 1:
        raise SeriesTooShort(f"path of {prices.size} prices has no entry with horizon {horizon_steps}")
    return float(np.mean(liquidation_flags(prices, spec, side, leverage, horizon_steps, marks)))


def liquidation_table(
    path,
    spec: ContractSpec,
    leverages: Sequence[float],
    horizons: Sequence[int],
    sides: Sequence[Side] = ("long", "short"),
    mark=None,
) -> list[tuple[str, float, int, float]]:
    """``(side, leverage, horizon_steps, probability)`` over the full grid."""
    return [
        (side, float(lev), int(h), historical_liquidation_probability(path, spec, side, lev, h, mark))
        for side in sides
        for lev in leverages
        for h in horizons
    ]


def ingest_funding_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Funding boundaries and rates from a ``timestamp,rate`` CSV."""
    header, rows = read_rows(path)
    if header[:2] != ["timestamp", "rate"]:
        raise ValidationError(f"{path}: expected header timestamp,rate")
    ts = np.array([parse_timestamp(r[0]) for r in rows], dtype=np.int64)
    rates = np.array([parse_decimal(r[1], "rate") for r in rows])
    if ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValidationError(f"{path}: funding timestamps must be strictly increasing")
    return ts, rates


def mark_price_series(
    index: PriceSeries,
    funding_ts: np.ndarray,
    funding_rates: np.ndarray,
    funding_interval_ms: int = FUNDING_INTERVAL_MS,
) -> PriceSeries:
    """Fair mark price at every index timestamp.

    The rate published for funding time ``T`` applies on
    ``[T - interval, T)``: at each timestamp the next funding time is the
    first boundary strictly after it.
    """
    ts = index.timestamps
    pos = np.searchsorted(funding_ts, ts, side="right")
    if np.any(pos >= funding_ts.size):
        raise ClockAfterFunding("index series extends past the last funding boundary")
    until = funding_ts[pos] - ts
    if np.any(until > funding_interval_ms):
        raise ValidationError("funding boundaries are further apart than one interval")
    marks = index.prices + index.prices * funding_rates[pos] * (until / funding_interval_ms)
    return PriceSeries(f"{index.instrument_id}-mark", index.start_ts, index.step_ms, marks)
