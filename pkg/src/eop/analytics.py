"""Horizon histograms, the Black-Scholes reference price, synthetic returns and
original-vs-filtered premium comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .marketdata import ReturnSeries
from .pricing import (ENSEMBLE_STRIDE, MINUTES_PER_YEAR, EnsembleSpec, ladder, price_ladder,
                      window_sums)

HIST_BINS = 61
HIST_SPAN = 6.0


@dataclass(frozen=True, eq=False)
class HorizonHistogram:
    horizon_minutes: int
    bin_edges: np.ndarray
    counts: np.ndarray
    sample_count: int
    mean: float
    stddev: float
    excess_kurtosis: float

    def density(self) -> np.ndarray:
        widths = np.diff(self.bin_edges)
        return self.counts / (self.sample_count * widths)

    def rows(self):
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            yield float(lo), float(hi), int(c)


def horizon_sums(returns: ReturnSeries | np.ndarray, horizon: int,
                 stride: int = ENSEMBLE_STRIDE) -> np.ndarray:
    values = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, float)
    if horizon < 1 or stride < 1:
        raise ValueError("horizon and stride must be >= 1")
    if values.size < horizon:
        raise ValueError(f"series of {values.size} samples is shorter than the "
                         f"{horizon}-minute horizon")
    return window_sums(values, horizon, stride)


def _moments(x: np.ndarray) -> tuple[float, float, float]:
    mean = float(x.mean())
    d = x - mean
    var = float(np.mean(d * d))
    if var == 0:
        return mean, 0.0, 0.0
    kurt = float(np.mean(d ** 4)) / var ** 2 - 3.0
    return mean, math.sqrt(var), kurt


def horizon_histogram(returns: ReturnSeries | np.ndarray, horizon: int,
                      stride: int = ENSEMBLE_STRIDE, bins: int = HIST_BINS,
                      edges: np.ndarray | None = None) -> HorizonHistogram:
    """Histogram of ``horizon``-minute aggregated returns.

    By default the bins are ``bins`` equal-width cells over mean +/- 6 stddev.
    Values outside the outer edges are counted in the end bins so the counts
    always add up to the number of windows. A degenerate (zero-spread) sample
    gets unit-width cells centred on its mean.
    """
    sums = horizon_sums(returns, horizon, stride)
    mean, sd, kurt = _moments(sums)
    if edges is None:
        half = HIST_SPAN * sd if sd > 0 else 0.5
        edges = np.linspace(mean - half, mean + half, bins + 1)
    else:
        edges = np.asarray(edges, float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
    idx = np.searchsorted(edges, sums, side="right") - 1
    idx = np.clip(idx, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1)
    return HorizonHistogram(horizon, edges, counts, int(sums.size), mean, sd, kurt)


def histogram_l1(original: ReturnSeries | np.ndarray, filtered: ReturnSeries | np.ndarray,
                 horizon: int, stride: int = ENSEMBLE_STRIDE, bins: int = HIST_BINS) -> float:
    """L1 distance between the two empirical distributions, on the original's bins.

    Returns a value in ``[0, 2]``; 0 means identical bin occupancy.
    """
    h0 = horizon_histogram(original, horizon, stride, bins)
    h1 = horizon_histogram(filtered, horizon, stride, edges=h0.bin_edges)
    return float(np.abs(h0.counts / h0.sample_count - h1.counts / h1.sample_count).sum())


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(S: float, E: float, T_minutes: float, r_annual: float,
                       sigma_annual: float, minutes_per_year: int = MINUTES_PER_YEAR) -> float:
    """Closed-form European call with expiry given in trading minutes."""
    if S <= 0 or E <= 0 or T_minutes <= 0:
        raise ValueError("S, E and T must be positive")
    if sigma_annual < 0:
        raise ValueError("sigma must be non-negative")
    t = T_minutes / minutes_per_year
    df = math.exp(-r_annual * t)
    vol = sigma_annual * math.sqrt(t)
    if vol == 0:
        return max(0.0, S - E * df)
    d1 = (math.log(S / E) + r_annual * t + 0.5 * vol * vol) / vol
    return S * _norm_cdf(d1) - E * df * _norm_cdf(d1 - vol)


def generate_synthetic(kind: str, length: int, per_minute_sigma: float, seed: int | None = None,
                       nu: float = 4.0) -> ReturnSeries:
    """i.i.d. per-minute returns with standard deviation ``per_minute_sigma``.

    ``kind`` is ``"gaussian"`` or ``"student_t"``; Student-t draws are scaled to
    unit variance first. The sample is re-centred so it is a valid
    zero-mean ReturnSeries.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if not per_minute_sigma > 0:
        raise ValueError("per_minute_sigma must be positive")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        x = rng.standard_normal(length)
    elif kind in ("student_t", "student-t", "t"):
        if not nu > 2:
            raise ValueError("nu must be > 2 for finite variance")
        x = rng.standard_t(nu, length) * math.sqrt((nu - 2) / nu)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    x *= per_minute_sigma
    x -= x.mean()
    return ReturnSeries(x, meta={"synthetic": {"kind": kind, "sigma": per_minute_sigma,
                                               "seed": seed, "nu": nu if kind != "gaussian" else None}})


@dataclass(frozen=True)
class ComparisonRow:
    strike: float
    premium_original: float
    premium_filtered: float
    market: float | None = None

    @property
    def abs_diff(self) -> float:
        return abs(self.premium_original - self.premium_filtered)

    @property
    def rel_diff(self) -> float:
        base = abs(self.premium_original)
        return self.abs_diff / base if base > 0 else (0.0 if self.abs_diff == 0 else math.inf)

    def to_dict(self) -> dict:
        return {"strike": self.strike, "market": self.market, "original": self.premium_original,
                "filtered": self.premium_filtered, "abs_diff": self.abs_diff,
                "rel_diff": self.rel_diff}


def compare_premiums(original: ReturnSeries, filtered: ReturnSeries, spot: float,
                     strikes: Sequence[float], expiry_minutes: int, rate_annual: float = 0.0,
                     g_factor: float = 1.0, *, stride: int = ENSEMBLE_STRIDE,
                     minutes_per_year: int = MINUTES_PER_YEAR,
                     market: Sequence[float | None] | None = None,
                     common_span: bool = True, threads: int = 1) -> list[ComparisonRow]:
    """Price one strike ladder on both series with identical settings.

    With ``common_span`` the original is cut to the filtered length, so the
    filter's dropped remainder does not give the original extra windows.
    """
    if market is not None and len(market) != len(strikes):
        raise ValueError("market premiums must align with strikes")
    orig_values = original.values
    if common_span and orig_values.size > filtered.values.size:
        orig_values = orig_values[: filtered.values.size]
    spec = EnsembleSpec(expiry_minutes, stride)
    reqs = ladder(spot, strikes, expiry_minutes, rate_annual, g_factor, minutes_per_year)
    op = price_ladder(ReturnSeries(orig_values), reqs, spec, threads)
    fp = price_ladder(filtered, reqs, spec, threads)
    mkt = list(market) if market is not None else [None] * len(strikes)
    return [ComparisonRow(float(k), a.premium, b.premium, m)
            for k, a, b, m in zip(strikes, op, fp, mkt)]
