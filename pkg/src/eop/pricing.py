"""Empirical European call pricing over a sliding-window return ensemble.

Every window ``{dx_(m*stride), ..., dx_(m*stride + N - 1)}`` of the (g-scaled)
return series is one scenario for the log-price path over the option's life.
The terminal level of a window is::

    S_T = S * exp(r*T + sum_n (dx_n - dx_n**2 / 2))

and the premium is the discounted average of ``max(S_T - E, 0)`` over all
windows. Since ``dx_n = g * dy_n`` the exponent only needs the per-window sums
of ``dy`` and ``dy**2``, so those are computed once and reused across strikes
and across g values during calibration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .marketdata import MINUTES_PER_DAY, ReturnSeries

MINUTES_PER_YEAR = MINUTES_PER_DAY * 252
ENSEMBLE_STRIDE = 60


@dataclass(frozen=True)
class EnsembleSpec:
    window_length: int
    stride: int = ENSEMBLE_STRIDE

    def __post_init__(self):
        if self.window_length < 1 or self.stride < 1:
            raise ValueError("window_length and stride must be >= 1")

    def count(self, n: int) -> int:
        """Number of windows that fit in a series of ``n`` samples."""
        return 0 if n < self.window_length else (n - self.window_length) // self.stride + 1


@dataclass(frozen=True)
class PricingRequest:
    spot: float
    strike: float
    expiry_minutes: int
    rate_annual: float = 0.0
    g_factor: float = 1.0
    minutes_per_year: int = MINUTES_PER_YEAR

    def __post_init__(self):
        if not (self.spot > 0 and self.strike > 0):
            raise ValueError("spot and strike must be positive")
        if self.expiry_minutes < 1:
            raise ValueError("expiry must be at least one minute")
        if not self.g_factor > 0:
            raise ValueError("g_factor must be positive")
        if self.minutes_per_year < 1:
            raise ValueError("minutes_per_year must be positive")

    @property
    def rate_time(self) -> float:
        """r*T with T expressed in years."""
        return self.rate_annual * self.expiry_minutes / self.minutes_per_year


@dataclass(frozen=True)
class PremiumQuote:
    strike: float
    premium: float
    sample_count: int
    payoff_stddev: float
    exercised_fraction: float


class EmptyEnsembleError(ValueError):
    pass


def trading_minutes_between(quote_date: date, expiry_date: date,
                            minutes_per_day: int = MINUTES_PER_DAY,
                            holidays: Sequence[date] = ()) -> int:
    """Trading minutes from the close of ``quote_date`` to the close of expiry.

    Counts weekdays in ``(quote_date, expiry_date]`` that are not holidays.
    """
    if expiry_date <= quote_date:
        raise ValueError("expiry must be after the quote date")
    days = np.busday_count(quote_date + timedelta(days=1), expiry_date + timedelta(days=1),
                           holidays=[np.datetime64(h, "D") for h in holidays])
    return int(days) * minutes_per_day


def build_ensemble(returns: ReturnSeries | np.ndarray, spec: EnsembleSpec) -> np.ndarray:
    """All windows in stride order, as a read-only ``(count, N)`` view."""
    values = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, float)
    if spec.count(values.size) == 0:
        raise EmptyEnsembleError(
            f"series of {values.size} samples is shorter than the {spec.window_length}-sample window")
    return sliding_window_view(values, spec.window_length)[:: spec.stride]


def window_sums(values: np.ndarray, length: int, stride: int) -> np.ndarray:
    """Sum of every ``length``-sample window starting at multiples of ``stride``.

    Uses prefix sums of the mean-centred series, so the running totals stay
    near zero and the differences lose no precision to large prefixes.
    """
    x = np.asarray(values, float)
    starts = np.arange(0, x.size - length + 1, stride)
    if starts.size == 0:
        raise EmptyEnsembleError(f"series of {x.size} samples is shorter than {length}")
    if starts.size == 1 or length <= 64:
        return sliding_window_view(x, length)[::stride].sum(axis=1)
    c = x.mean()
    csum = np.empty(x.size + 1)
    csum[0] = 0.0
    np.cumsum(x - c, out=csum[1:])
    return (csum[starts + length] - csum[starts]) + c * length


def scale_window(window, g: float) -> np.ndarray:
    if not g > 0:
        raise ValueError("g must be positive")
    return g * np.asarray(window, float)


def terminal_price(window, request: PricingRequest) -> float:
    """Terminal index level for one already-scaled window."""
    dx = np.asarray(window, float)
    return request.spot * math.exp(request.rate_time + math.fsum(dx - 0.5 * dx * dx))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Per-window sums of raw increments and of their squares."""

    spec: EnsembleSpec
    linear: np.ndarray
    quadratic: np.ndarray

    @classmethod
    def from_returns(cls, returns: ReturnSeries | np.ndarray, spec: EnsembleSpec) -> "Ensemble":
        values = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, float)
        if spec.count(values.size) == 0:
            raise EmptyEnsembleError(
                f"series of {values.size} samples is shorter than the "
                f"{spec.window_length}-sample window")
        s1 = window_sums(values, spec.window_length, spec.stride)
        s2 = window_sums(values * values, spec.window_length, spec.stride)
        return cls(spec, s1, s2)

    def __len__(self) -> int:
        return self.linear.size

    def log_growth(self, g: float) -> np.ndarray:
        """``sum(dx - dx**2/2)`` per window for ``dx = g * dy``."""
        return g * self.linear - 0.5 * (g * g) * self.quadratic

    def terminal_prices(self, spot: float, rate_time: float, g: float) -> np.ndarray:
        return spot * np.exp(rate_time + self.log_growth(g))


def _payoff_stats(terminal: np.ndarray, strike: float, discount: float,
                  threads: int) -> tuple[float, float, float]:
    def chunk(sl: slice) -> np.ndarray:
        return np.maximum(terminal[sl] - strike, 0.0)

    n = terminal.size
    if threads > 1 and n > 1:
        bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
        slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            payoff = np.concatenate(list(pool.map(chunk, slices)))
    else:
        payoff = chunk(slice(None))
    # fsum is exactly rounded, so the mean does not depend on chunking
    mean = math.fsum(payoff) / n
    var = math.fsum((payoff - mean) ** 2) / n
    exercised = int(np.count_nonzero(payoff)) / n
    return discount * mean, discount * math.sqrt(var), exercised


def _check_ladder(requests: Sequence[PricingRequest], spec: EnsembleSpec) -> PricingRequest:
    if not requests:
        raise ValueError("no pricing requests")
    head = requests[0]
    for r in requests[1:]:
        if replace(r, strike=head.strike) != head:
            raise ValueError("ladder requests must share spot, expiry, rate, g and time basis")
    if head.expiry_minutes != spec.window_length:
        raise ValueError(f"expiry of {head.expiry_minutes} minutes does not match the "
                         f"{spec.window_length}-sample ensemble window")
    return head


def price_ladder(returns: ReturnSeries | Ensemble, requests: Sequence[PricingRequest],
                 spec: EnsembleSpec | None = None, threads: int = 1) -> list[PremiumQuote]:
    """Price a strike ladder; terminal prices are computed once for all strikes."""
    if isinstance(returns, Ensemble):
        ensemble = returns
        spec = spec or ensemble.spec
        if spec != ensemble.spec:
            raise ValueError("ensemble was built for a different spec")
    else:
        if spec is None:
            raise ValueError("an EnsembleSpec is required when pricing from a series")
        ensemble = Ensemble.from_returns(returns, spec)
    head = _check_ladder(requests, spec)
    terminal = ensemble.terminal_prices(head.spot, head.rate_time, head.g_factor)
    discount = math.exp(-head.rate_time)
    quotes = []
    for req in requests:
        premium, sd, ex = _payoff_stats(terminal, req.strike, discount, threads)
        quotes.append(PremiumQuote(req.strike, premium, len(ensemble), sd, ex))
    return quotes


def price_call(returns: ReturnSeries | Ensemble, request: PricingRequest,
               spec: EnsembleSpec | None = None, threads: int = 1) -> PremiumQuote:
    return price_ladder(returns, [request], spec, threads)[0]


def ladder(spot: float, strikes: Sequence[float], expiry_minutes: int, rate_annual: float = 0.0,
           g_factor: float = 1.0, minutes_per_year: int = MINUTES_PER_YEAR) -> list[PricingRequest]:
    return [PricingRequest(spot, float(k), expiry_minutes, rate_annual, g_factor, minutes_per_year)
            for k in strikes]
