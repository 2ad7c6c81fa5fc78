"""Optimal static hedging with direct and inverse perpetual futures.

The package covers price ingestion and extreme returns, GEV tail fitting,
perpetual margining and liquidation, the loss-averse optimal hedge,
exchange speculation metrics and a rolling-window backtest.
"""

from pathlib import Path

from perphedge.errors import PerpHedgeError
from perphedge.gev import GevParams, cdf, fit_pwm, tail_exceedance
from perphedge.hedge import HedgerProfile, MarketMoments, OptimalHedge, solve
from perphedge.margining import ContractSpec, MarkParams, Position
from perphedge.timeseries import PriceSeries, ingest_csv

__all__ = [
    "ContractSpec",
    "GevParams",
    "HedgerProfile",
    "MarkParams",
    "MarketMoments",
    "OptimalHedge",
    "PerpHedgeError",
    "Position",
    "PriceSeries",
    "cdf",
    "fit_pwm",
    "fixture_path",
    "ingest_csv",
    "solve",
    "tail_exceedance",
]

__version__ = "0.1.0"


def fixture_path(name: str) -> Path:
    """Path of a bundled CSV fixture, e.g. ``fixture_path("crash.csv")``."""
    return Path(__file__).parent / "data" / name

