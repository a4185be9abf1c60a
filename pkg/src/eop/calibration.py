"""Least-squares fit of the volatility rescaling factor g."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .marketdata import ReturnSeries
from .pricing import (MINUTES_PER_YEAR, Ensemble, EnsembleSpec, PricingRequest,
                      ladder, price_ladder)

INV_PHI = (math.sqrt(5) - 1) / 2
EXCLUDE_FLOOR = 0.05


@dataclass(frozen=True)
class MarketQuoteSet:
    quote_date: date | None
    spot: float
    expiry_date: date | None
    rate_annual: float
    quotes: tuple[tuple[float, float], ...]
    exclusions: frozenset[float] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple((float(k), float(v)) for k, v in self.quotes))
        object.__setattr__(self, "exclusions", frozenset(float(k) for k in self.exclusions))
        strikes = [k for k, _ in self.quotes]
        if len(set(strikes)) != len(strikes):
            raise ValueError("strikes must be distinct")
        if not self.spot > 0:
            raise ValueError("spot must be positive")

    @property
    def usable(self) -> list[tuple[float, float]]:
        return [(k, v) for k, v in self.quotes if k not in self.exclusions]

    def excluding(self, strikes) -> "MarketQuoteSet":
        return MarketQuoteSet(self.quote_date, self.spot, self.expiry_date, self.rate_annual,
                              self.quotes, self.exclusions | frozenset(strikes))


@dataclass(frozen=True)
class StrikeFit:
    strike: float
    market: float
    model: float

    @property
    def residual(self) -> float:
        return self.model - self.market


@dataclass
class CalibrationResult:
    g: float
    sigma_star: float
    sigma_historical: float
    rss: float
    per_strike: list[StrikeFit]
    iterations: int
    at_bound: bool = False
    excluded: tuple[float, ...] = ()
    bounds: tuple[float, float] = (0.1, 3.0)
    grid: list[tuple[float, float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "g": self.g,
            "sigma_star": self.sigma_star,
            "sigma_historical": self.sigma_historical,
            "rss": self.rss,
            "iterations": self.iterations,
            "at_bound": self.at_bound,
            "bounds": list(self.bounds),
            "excluded": list(self.excluded),
            "per_strike": [{"strike": f.strike, "market": f.market, "model": f.model,
                            "residual": f.residual} for f in self.per_strike],
        }


def read_quotes(path: str | Path, rate_annual: float,
                exclusions: Sequence[float] = ()) -> MarketQuoteSet:
    """Load a quote file with columns quote_date, expiry_date, spot, strike, premium.

    All rows must share quote date, expiry date and spot.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no quotes")
    head = {(r["quote_date"].strip(), r["expiry_date"].strip(), float(r["spot"])) for r in rows}
    if len(head) != 1:
        raise ValueError(f"{path}: quotes span several quote dates, expiries or spots")
    qd, ed, spot = head.pop()
    return MarketQuoteSet(date.fromisoformat(qd), spot, date.fromisoformat(ed), rate_annual,
                          tuple((float(r["strike"]), float(r["premium"])) for r in rows),
                          frozenset(exclusions))


def _as_ensemble(returns, spec: EnsembleSpec) -> Ensemble:
    if isinstance(returns, Ensemble):
        if returns.spec != spec:
            raise ValueError("ensemble was built for a different spec")
        return returns
    return Ensemble.from_returns(returns, spec)


def model_premiums(g: float, quotes: MarketQuoteSet, returns, spec: EnsembleSpec,
                   minutes_per_year: int = MINUTES_PER_YEAR,
                   strikes: Sequence[float] | None = None) -> list[float]:
    strikes = [k for k, _ in quotes.usable] if strikes is None else list(strikes)
    reqs = ladder(quotes.spot, strikes, spec.window_length, quotes.rate_annual, g,
                  minutes_per_year)
    return [q.premium for q in price_ladder(_as_ensemble(returns, spec), reqs, spec)]


def objective(g: float, quotes: MarketQuoteSet, returns, spec: EnsembleSpec,
              minutes_per_year: int = MINUTES_PER_YEAR) -> float:
    """Sum of squared premium residuals over the non-excluded strikes."""
    if not g > 0:
        raise ValueError("g must be positive")
    usable = quotes.usable
    if not usable:
        raise ValueError("no usable quotes")
    model = model_premiums(g, quotes, returns, spec, minutes_per_year)
    return math.fsum((m - v) ** 2 for m, (_, v) in zip(model, usable))


def golden_section(f: Callable[[float], float], a: float, b: float,
                   tol: float = 1e-4) -> tuple[float, float, int]:
    """Minimize ``f`` on ``[a, b]`` until the bracket is narrower than ``tol``.

    Returns ``(x, f(x), evaluations)`` for the best point seen.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    return (c, fc, evals) if fc <= fd else (d, fd, evals)


def _fit(quotes, ensemble, spec, bounds, grid_step, tol, minutes_per_year, threads):
    lo, hi = bounds
    steps = int(round((hi - lo) / grid_step))
    grid = [lo + i * grid_step for i in range(steps + 1)]
    if grid[-1] < hi - 1e-12:
        grid.append(hi)

    def f(g):
        return objective(g, quotes, ensemble, spec, minutes_per_year)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(f, grid))
    else:
        values = [f(g) for g in grid]
    if not all(math.isfinite(v) for v in values):
        bad = next(g for g, v in zip(grid, values) if not math.isfinite(v))
        raise FloatingPointError(f"objective is not finite at g={bad:.4f}; series may be corrupt")
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    g_best, f_best, evals = golden_section(f, a, b, tol)
    # keep the grid point if refinement did not improve on it
    if values[i] <= f_best:
        g_best, f_best = grid[i], values[i]
    return g_best, f_best, len(grid) + evals, list(zip(grid, values))


def fit_g(quotes: MarketQuoteSet, returns: ReturnSeries | Ensemble, spec: EnsembleSpec,
          bounds: tuple[float, float] = (0.1, 3.0), *, grid_step: float = 0.01,
          tol: float = 1e-4, minutes_per_year: int = MINUTES_PER_YEAR,
          exclude_below: float | None = None, threads: int = 1) -> CalibrationResult:
    """Fit g by a coarse grid scan followed by golden-section refinement.

    With ``exclude_below`` set, strikes whose fitted model premium falls under
    that floor are dropped and the fit is repeated once.
    """
    lo, hi = bounds
    if not 0 < lo < hi:
        raise ValueError("bounds must satisfy 0 < lower < upper")
    if len(quotes.usable) < 2:
        raise ValueError("at least two usable quotes are needed for a fit")
    ensemble = _as_ensemble(returns, spec)
    g, rss, iters, grid = _fit(quotes, ensemble, spec, bounds, grid_step, tol,
                               minutes_per_year, threads)
    if exclude_below is not None:
        strikes = [k for k, _ in quotes.usable]
        model = model_premiums(g, quotes, ensemble, spec, minutes_per_year, strikes)
        drop = [k for k, m in zip(strikes, model) if m < exclude_below]
        if drop and len(quotes.usable) - len(drop) >= 2:
            quotes = quotes.excluding(drop)
            g, rss, more, grid = _fit(quotes, ensemble, spec, bounds, grid_step, tol,
                                      minutes_per_year, threads)
            iters += more

    strikes = [k for k, _ in quotes.quotes]
    model = model_premiums(g, quotes, ensemble, spec, minutes_per_year, strikes)
    if isinstance(returns, ReturnSeries):
        sigma_hist = returns.std * math.sqrt(minutes_per_year / returns.step_minutes)
    else:
        sigma_hist = float("nan")
    return CalibrationResult(
        g=g,
        sigma_star=g * sigma_hist,
        sigma_historical=sigma_hist,
        rss=rss,
        per_strike=[StrikeFit(k, v, m) for (k, v), m in zip(quotes.quotes, model)],
        iterations=iters,
        at_bound=min(g - lo, hi - g) < tol,
        excluded=tuple(sorted(quotes.exclusions)),
        bounds=(lo, hi),
        grid=grid,
    )
