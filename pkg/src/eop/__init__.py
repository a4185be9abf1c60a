"""Empirical option pricing on raw and Haar low-pass filtered minute returns."""

__version__ = "0.1.0"

from .analytics import (ComparisonRow, HorizonHistogram, black_scholes_call, compare_premiums,
                        generate_synthetic, histogram_l1, horizon_histogram)
from .calibration import CalibrationResult, MarketQuoteSet, fit_g, objective
from .marketdata import (CsvFormat, PriceSeries, ReturnSeries, detrend, fill_gaps, ingest_csv,
                         log_returns, preprocess, purify)
from .pricing import (Ensemble, EnsembleSpec, PremiumQuote, PricingRequest, build_ensemble,
                      ladder, price_call, price_ladder, scale_window, terminal_price)
from .wavelet import (CompressionReport, FilterSpec, HaarBasisIndex, WaveletDecomposition,
                      filter_series, haar_forward, haar_inverse, lowpass_filter)

__all__ = [
    "CalibrationResult", "ComparisonRow", "CompressionReport", "CsvFormat", "Ensemble",
    "EnsembleSpec", "FilterSpec", "HaarBasisIndex", "HorizonHistogram", "MarketQuoteSet",
    "PremiumQuote", "PriceSeries", "PricingRequest", "ReturnSeries", "WaveletDecomposition",
    "black_scholes_call", "build_ensemble", "compare_premiums", "detrend", "fill_gaps",
    "filter_series", "fit_g", "generate_synthetic", "haar_forward", "haar_inverse",
    "histogram_l1", "horizon_histogram", "ingest_csv", "ladder", "log_returns", "lowpass_filter",
    "objective", "preprocess", "price_call", "price_ladder", "purify", "scale_window",
    "terminal_price",
]
