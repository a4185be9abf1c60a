"""Synthetic minute-price files used for tests and demos.

The bundled ``data/fixture_minutes.csv`` is ``synthetic_prices()`` with its
default arguments, written by ``write_price_csv``.
"""

from __future__ import annotations

import csv
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .io import atomic_write
from .marketdata import MINUTES_PER_DAY

SESSION_OPEN_MINUTE = 8 * 60


def fixture_path() -> Path:
    return Path(str(resources.files("eop") / "data" / "fixture_minutes.csv"))


def synthetic_prices(days: int = 25, spot: float = 5500.0, annual_sigma: float = 0.08,
                     nu: float = 4.0, seed: int = 7, start: date = date(2005, 11, 1),
                     gap_fraction: float = 0.002, minutes_per_day: int = MINUTES_PER_DAY,
                     minutes_per_year: int = MINUTES_PER_DAY * 252):
    """Weekday sessions of Student-t minute returns, with a few minutes missing.

    Returns ``(timestamps, prices)``; one large spike is planted on the third
    day so purification has something to remove.
    """
    rng = np.random.default_rng(seed)
    sigma = annual_sigma / np.sqrt(minutes_per_year)
    n = days * minutes_per_day
    r = rng.standard_t(nu, n) * np.sqrt((nu - 2) / nu) * sigma
    r[2 * minutes_per_day + 100] = 40 * sigma
    prices = spot * np.exp(np.cumsum(r))
    keep = rng.random(n) >= gap_fraction
    # session opens are always present
    keep[::minutes_per_day] = True

    stamps = []
    day = start
    while len(stamps) < days:
        if day.weekday() < 5:
            stamps.append(np.datetime64(day, "m") + np.timedelta64(SESSION_OPEN_MINUTE, "m"))
        day += timedelta(days=1)
    minute = np.tile(np.arange(minutes_per_day), days).astype("timedelta64[m]")
    ts = np.repeat(np.array(stamps), minutes_per_day) + minute
    return ts[keep], np.round(prices[keep], 2)


def write_price_csv(path: str | Path, timestamps, prices) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "price"])
        for t, p in zip(np.datetime_as_string(timestamps, unit="m"), prices):
            w.writerow([t, f"{p:.2f}"])
