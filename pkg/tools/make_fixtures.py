"""Regenerate the bundled fixtures under src/perphedge/data.

Each file records its generator and seed in ``#`` header lines. Run from the
repository root: ``python3 tools/make_fixtures.py``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from perphedge import synthetic
from perphedge.gev import GevParams
from perphedge.timeseries import write_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "perphedge" / "data"
START_TS = 1_600_000_000_000

CRASH_SEED = 7
GEV_SEED = 20240
GEV_PARAMS = GevParams(tau=0.3, alpha=0.01, beta=0.01)
GEV_BLOCKS, GEV_BLOCK_STEPS = 1000, 30
BT_SEED = 11
BT_STEPS = 8000
BUCKET_SEED = 5
BUCKETS = 60


def crash():
    series = synthetic.crash_path(np.random.default_rng(CRASH_SEED), start_ts=START_TS)
    write_csv(series, DATA / "crash.csv",
              [f"crash_path n=200 seed={CRASH_SEED}"])


def gev_fixture():
    rng = np.random.default_rng(GEV_SEED)
    series, _ = synthetic.gev_block_path(GEV_PARAMS, GEV_BLOCKS, GEV_BLOCK_STEPS, rng,
                                         start_ts=START_TS)
    p = GEV_PARAMS
    write_csv(series, DATA / "gev_fixture.csv", [
        f"gev_block_path tau={p.tau} alpha={p.alpha} beta={p.beta} "
        f"blocks={GEV_BLOCKS} block_steps={GEV_BLOCK_STEPS} seed={GEV_SEED}",
    ])


def backtest_pair():
    rng = np.random.default_rng(BT_SEED)
    spot = synthetic.random_walk(BT_STEPS, rng, sigma=0.002, start_price=10000.0,
                                 start_ts=START_TS, instrument_id="spot")
    perp = synthetic.basis_path(spot, rng, noise=0.0005)
    head = f"random_walk n={BT_STEPS} sigma=0.002 + basis_path noise=0.0005 seed={BT_SEED}"
    write_csv(spot, DATA / "bt_spot.csv", [head])
    write_csv(perp, DATA / "bt_perp.csv", [head])


def buckets():
    rng = np.random.default_rng(BUCKET_SEED)
    step = 4 * 3_600_000
    with (DATA / "buckets.csv").open("w", newline="") as fh:
        fh.write(f"# synthetic 4h buckets n={BUCKETS} seed={BUCKET_SEED}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "volume_usd", "open_interest_usd", "long_liq_usd",
                    "short_liq_usd", "open", "high", "low", "close"])
        price = 10000.0
        for k in range(BUCKETS):
            o = price
            c = o * np.exp(0.01 * rng.standard_normal())
            hi = max(o, c) * (1 + abs(0.01 * rng.standard_normal()))
            lo = min(o, c) * (1 - abs(0.01 * rng.standard_normal()))
            oi = 1e9 * (1 + 0.1 * rng.random())
            vol = oi * rng.uniform(1.0, 5.0)
            ll = oi * 0.002 * rng.random() if rng.random() < 0.7 else 0.0
            sl = oi * 0.002 * rng.random() if rng.random() < 0.7 else 0.0
            w.writerow([START_TS + k * step] + [f"{v:.2f}" for v in (vol, oi, ll, sl, o, hi, lo, c)])
            price = c


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    crash()
    gev_fixture()
    backtest_pair()
    buckets()
