"""Synthetic price paths used by the bundled fixtures, demos and tests."""

from __future__ import annotations

import numpy as np

from perphedge import gev
from perphedge.gev import GevParams
from perphedge.timeseries import MINUTE_MS, PriceSeries


def gev_block_path(params: GevParams, n_blocks: int, block_steps: int,
                   rng: np.random.Generator, start_price: float = 100.0,
                   wiggle: float = 0.002, start_ts: int = 0,
                   step_ms: int = MINUTE_MS) -> tuple[PriceSeries, np.ndarray]:
    """Price path whose non-overlapping nominal right-tail block maxima are
    exact GEV draws.

    Within block ``k`` (anchor price ``A``, draw ``M``) one randomly chosen
    step sits at ``A * (1 + M)`` and every other step at
    ``min(A * (1 + M), A * exp(e))`` with small Gaussian ``e``. The draws
    must exceed -1; returns the path and the draws.
    """
    draws = gev.sample(params, n_blocks, rng)
    if np.any(draws <= -1):
        raise ValueError("GEV draws must exceed -1 to keep prices positive")
    prices = np.empty(n_blocks * block_steps + 1)
    prices[0] = start_price
    for k, m in enumerate(draws):
        a = prices[k * block_steps]
        cap = a * (1.0 + m)
        seg = np.minimum(cap, a * np.exp(wiggle * rng.standard_normal(block_steps)))
        seg[rng.integers(block_steps)] = cap
        prices[k * block_steps + 1 : (k + 1) * block_steps + 1] = seg
    return PriceSeries("gev-block-path", start_ts, step_ms, prices), draws


def random_walk(n: int, rng: np.random.Generator, sigma: float = 0.001,
                start_price: float = 100.0, start_ts: int = 0,
                step_ms: int = MINUTE_MS, instrument_id: str = "rw") -> PriceSeries:
    """Geometric random walk with Student-t(3) log increments."""
    shocks = rng.standard_t(3, n - 1) * sigma / np.sqrt(3.0)
    prices = start_price * np.exp(np.concatenate([[0.0], np.cumsum(shocks)]))
    return PriceSeries(instrument_id, start_ts, step_ms, prices)


def basis_path(spot: PriceSeries, rng: np.random.Generator, noise: float = 0.0005,
               instrument_id: str = "perp") -> PriceSeries:
    """Futures path tracking ``spot`` with small independent noise."""
    shocks = noise * rng.standard_normal(len(spot))
    return PriceSeries(instrument_id, spot.start_ts, spot.step_ms, spot.prices * np.exp(shocks))


def crash_path(rng: np.random.Generator, n: int = 200, start_price: float = 10000.0,
               start_ts: int = 1_600_000_000_000, step_ms: int = MINUTE_MS) -> PriceSeries:
    """Short path with a rally, a sharp crash and a rebound, rounded to cents."""
    drift = np.zeros(n - 1)
    third = (n - 1) // 3
    drift[:third] = 0.001
    drift[third : third + 20] = -0.006
    drift[third + 20 :] = 0.0015
    steps = drift + 0.003 * rng.standard_normal(n - 1)
    prices = start_price * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
    return PriceSeries("crash", start_ts, step_ms, np.round(prices, 2))
