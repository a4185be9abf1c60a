"""Minute-bar ingestion and return-series preprocessing.

The pipeline is ``ingest_csv -> fill_gaps -> log_returns -> purify -> detrend``.
Outliers are zeroed rather than dropped so the minute grid stays regular,
which both the sliding-window ensemble and the Haar transform rely on.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 510
DRIFT_WINDOW = 5 * MINUTES_PER_DAY
OUTLIER_SIGMA = 10.0
MAX_PURIFY_PASSES = 10

_ONE_MINUTE = np.timedelta64(1, "m")


class IngestError(ValueError):
    """Raised when a price file cannot be turned into a PriceSeries."""


@dataclass(frozen=True)
class PriceRecord:
    timestamp: np.datetime64
    price: float

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"price must be positive, got {self.price!r}")


@dataclass(frozen=True)
class CsvFormat:
    """Column mapping for price files.

    ``timestamp_format`` is a ``strptime`` pattern; when ``None`` the column
    is parsed as ISO-8601.
    """

    timestamp: str = "timestamp"
    price: str = "price"
    timestamp_format: str | None = None
    delimiter: str = ","


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Minute index levels, possibly spanning several trading sessions.

    ``session_boundaries`` holds the index of the first record of every
    session after the first one.
    """

    timestamps: np.ndarray
    prices: np.ndarray
    session_boundaries: tuple[int, ...] = ()
    minutes_per_day: int = MINUTES_PER_DAY

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        px = np.asarray(self.prices, dtype=float)
        if ts.shape != px.shape or ts.ndim != 1:
            raise ValueError("timestamps and prices must be 1-d arrays of equal length")
        if px.size and not np.all(px > 0):
            raise ValueError("prices must be positive")
        b = tuple(int(i) for i in self.session_boundaries)
        if list(b) != sorted(set(b)) or any(i <= 0 or i >= px.size for i in b):
            raise ValueError("session_boundaries must be sorted interior indices")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        object.__setattr__(self, "session_boundaries", b)

    def __len__(self) -> int:
        return self.prices.size

    @property
    def records(self) -> list[PriceRecord]:
        return [PriceRecord(t, float(p)) for t, p in zip(self.timestamps, self.prices)]

    def sessions(self) -> Iterator[slice]:
        edges = (0, *self.session_boundaries, len(self))
        for lo, hi in zip(edges[:-1], edges[1:]):
            yield slice(lo, hi)


@dataclass(frozen=True)
class DriftEstimate:
    window_minutes: int = DRIFT_WINDOW
    per_minute_drift: float = 0.0

    def __post_init__(self):
        if self.window_minutes < 2:
            raise ValueError("drift window must be at least 2 minutes")


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Detrended per-minute log-return increments.

    ``mean_removed`` is the average drift subtracted per element (trailing
    drift plus the final re-centering). ``drift_fallback`` is set when the
    series was too short for the trailing window and only the global mean was
    removed. ``meta`` carries free-form provenance (e.g. filter settings).
    """

    values: np.ndarray
    step_minutes: int = 1
    mean_removed: float = 0.0
    outliers_neutralized: int = 0
    source_span: tuple[str, str] | None = None
    drift_fallback: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("return values must be 1-d")
        v = v.view()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def std(self) -> float:
        return float(self.values.std()) if self.values.size else 0.0


def _parse_timestamp(raw: str, fmt: str | None) -> np.datetime64:
    raw = raw.strip()
    dt = datetime.strptime(raw, fmt) if fmt else datetime.fromisoformat(raw)
    if dt.second or dt.microsecond:
        raise ValueError(f"timestamp {raw!r} is not on a whole minute")
    return np.datetime64(dt.replace(tzinfo=None), "m")


def ingest_csv(path: str | Path, fmt: CsvFormat = CsvFormat(),
               minutes_per_day: int = MINUTES_PER_DAY) -> PriceSeries:
    """Read a minute price file.

    Row numbers in error messages are 1-based file lines, header included.
    Timestamps must be strictly increasing; sessions split on date changes.
    """
    times: list[np.datetime64] = []
    prices: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=fmt.delimiter)
        missing = {fmt.timestamp, fmt.price} - set(reader.fieldnames or ())
        if missing:
            raise IngestError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            line = reader.line_num
            try:
                ts = _parse_timestamp(row[fmt.timestamp], fmt.timestamp_format)
                price = float(row[fmt.price])
            except (TypeError, ValueError) as exc:
                raise IngestError(f"{path}: row {line}: cannot parse ({exc})") from None
            if not np.isfinite(price) or price <= 0:
                raise IngestError(f"{path}: row {line}: non-positive price {row[fmt.price]!r}")
            if times and ts <= times[-1]:
                what = "duplicate" if ts == times[-1] else "non-monotone"
                raise IngestError(f"{path}: row {line}: {what} timestamp {row[fmt.timestamp]!r}")
            times.append(ts)
            prices.append(price)
    if not times:
        raise IngestError(f"{path}: no price rows")
    ts = np.array(times, dtype="datetime64[m]")
    days = ts.astype("datetime64[D]")
    boundaries = tuple(int(i) for i in np.flatnonzero(days[1:] != days[:-1]) + 1)
    return PriceSeries(ts, np.array(prices), boundaries, minutes_per_day)


def fill_gaps(series: PriceSeries) -> PriceSeries:
    """Forward-fill missing minutes inside each session.

    Overnight gaps are left alone: sessions are concatenated back to back.
    """
    if len(series) == 0:
        raise ValueError("cannot fill an empty series")
    out_t, out_p, boundaries = [], [], []
    offset = 0
    for sl in series.sessions():
        t = series.timestamps[sl]
        p = series.prices[sl]
        minute = ((t - t[0]) // _ONE_MINUTE).astype(np.int64)
        grid = np.arange(minute[-1] + 1)
        # index of the last observed record at or before each grid minute
        src = np.searchsorted(minute, grid, side="right") - 1
        out_t.append(t[0] + grid.astype("timedelta64[m]"))
        out_p.append(p[src])
        if offset:
            boundaries.append(offset)
        offset += grid.size
    return PriceSeries(np.concatenate(out_t), np.concatenate(out_p),
                       tuple(boundaries), series.minutes_per_day)


def log_returns(series: PriceSeries | Sequence[float] | np.ndarray) -> np.ndarray:
    prices = series.prices if isinstance(series, PriceSeries) else np.asarray(series, float)
    if prices.size < 2:
        raise ValueError("need at least two prices for a return")
    return np.diff(np.log(prices))


def purify(returns, outlier_sigma: float = OUTLIER_SIGMA,
           max_passes: int = MAX_PURIFY_PASSES) -> tuple[np.ndarray, int]:
    """Zero out returns larger than ``outlier_sigma`` global standard deviations.

    The standard deviation is recomputed after each pass until no new points
    are flagged (or ``max_passes`` is reached). Returns the cleaned copy and the
    number of neutralized elements.
    """
    x = np.array(returns, dtype=float)
    if x.size == 0:
        raise ValueError("returns must be non-empty")
    if not outlier_sigma > 0:
        raise ValueError("outlier_sigma must be positive")
    count = 0
    for _ in range(max_passes):
        sd = x.std()
        if sd == 0:
            break
        flagged = np.abs(x) > outlier_sigma * sd
        n = int(flagged.sum())
        if n == 0:
            break
        x[flagged] = 0.0
        count += n
    return x, count


def trailing_drift(returns: np.ndarray, window: int) -> np.ndarray:
    """Per-element drift: mean of the ``window`` preceding returns.

    The first ``window`` elements have no full history and get the global mean.
    """
    x = np.asarray(returns, float)
    drift = np.full(x.size, x.mean())
    if x.size > window:
        # centring before the cumulative sum keeps the prefix magnitudes small
        c = x.mean()
        csum = np.concatenate(([0.0], np.cumsum(x - c)))
        drift[window:] = c + (csum[window:-1] - csum[:-window - 1]) / window
    return drift


def detrend(returns, drift_window: int = DRIFT_WINDOW, *, outliers_neutralized: int = 0,
            source_span: tuple[str, str] | None = None) -> ReturnSeries:
    """Remove the trailing one-week drift, then re-center exactly.

    Series shorter than ``drift_window`` fall back to global-mean removal and
    are flagged through ``ReturnSeries.drift_fallback``.
    """
    DriftEstimate(drift_window)
    x = np.asarray(returns, float)
    if x.size == 0:
        raise ValueError("returns must be non-empty")
    fallback = x.size < drift_window
    if fallback:
        logger.warning("series of %d returns is shorter than the %d-minute drift window; "
                       "removing the global mean only", x.size, drift_window)
        drift = np.full(x.size, x.mean())
    else:
        drift = trailing_drift(x, drift_window)
    y = x - drift
    shift = y.mean()
    y = y - shift
    return ReturnSeries(
        values=y,
        mean_removed=float(drift.mean() + shift),
        outliers_neutralized=outliers_neutralized,
        source_span=source_span,
        drift_fallback=fallback,
    )


def preprocess(series: PriceSeries, outlier_sigma: float = OUTLIER_SIGMA,
               drift_window: int = DRIFT_WINDOW) -> ReturnSeries:
    """Full cleaning step: gap filling, log-returns, purification, detrending."""
    dense = fill_gaps(series)
    clean, n_out = purify(log_returns(dense), outlier_sigma)
    span = (str(dense.timestamps[0]), str(dense.timestamps[-1]))
    return detrend(clean, drift_window, outliers_neutralized=n_out, source_span=span)
