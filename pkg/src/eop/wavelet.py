"""Haar decomposition and scale-threshold low-pass filtering.

Basis functions are the unnormalized +/-1 Haar wavelets on ``[0, 1)``
sampled at ``i / N``::

    psi_jk(i / N) = psi_00(2**j * i / N - k),   0 <= j <= J,  0 <= k < 2**j

with ``N = 2**(J + 1)``. A wavelet at scale ``j`` spans ``N / 2**j`` samples
(+1 on the first half, -1 on the second), so its squared norm is ``N / 2**j``
and its coefficient is half the difference of the two half-block averages.
Together with the mean this gives exactly ``N`` values per segment.

Dropping every scale ``j >= j*`` leaves the mean plus ``2**j* - 1`` wavelets,
which for Haar is the same as replacing each block of ``N / 2**j*`` samples by
its average.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .marketdata import ReturnSeries


@dataclass(frozen=True, order=True)
class HaarBasisIndex:
    j: int
    k: int

    def __post_init__(self):
        if self.j < 0 or not 0 <= self.k < 2 ** self.j:
            raise ValueError(f"invalid Haar index (j={self.j}, k={self.k})")


@dataclass(frozen=True)
class FilterSpec:
    """Keep scales ``j < j_star``; ``j_star = J + 1`` keeps everything."""

    j_star: int = 4
    keep_mean: bool = True

    def validate(self, J: int) -> None:
        if not 1 <= self.j_star <= J + 1:
            raise ValueError(f"j_star must lie in [1, {J + 1}], got {self.j_star}")


@dataclass(eq=False)
class WaveletDecomposition:
    """Mean plus Haar coefficients of one segment.

    ``levels[j]`` holds ``c_j0 .. c_j(2**j - 1)``; absent scales count as zero.
    ``has_mean`` is False when a filter discarded the DC term.
    """

    subseries_length: int
    mean: float
    levels: dict[int, np.ndarray] = field(default_factory=dict)
    has_mean: bool = True

    def __post_init__(self):
        n = self.subseries_length
        if n < 2 or n & (n - 1):
            raise ValueError(f"segment length must be a power of two >= 2, got {n}")
        for j, c in self.levels.items():
            if not 0 <= j <= self.J or np.shape(c) != (2 ** j,):
                raise ValueError(f"bad coefficient block at scale {j}")

    @property
    def J(self) -> int:
        return self.subseries_length.bit_length() - 2

    @property
    def coefficient_count(self) -> int:
        return sum(c.size for c in self.levels.values())

    @property
    def retained_values(self) -> int:
        return self.coefficient_count + int(self.has_mean)

    def __getitem__(self, index) -> float:
        idx = index if isinstance(index, HaarBasisIndex) else HaarBasisIndex(*index)
        c = self.levels.get(idx.j)
        return 0.0 if c is None else float(c[idx.k])

    def items(self):
        for j in sorted(self.levels):
            for k, c in enumerate(self.levels[j]):
                yield HaarBasisIndex(j, k), float(c)

    def as_dict(self) -> dict[HaarBasisIndex, float]:
        return dict(self.items())


def _check_length(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(f"segment length must be a power of two >= 2, got {n}")
    return n.bit_length() - 2


def _forward_rows(x: np.ndarray) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    # pyramid on block averages: at each level the detail is half the
    # difference of sibling averages, which is c_jk in the +/-1 convention
    a = x
    levels = {}
    j = x.shape[-1].bit_length() - 2
    while a.shape[-1] > 1:
        even, odd = a[..., 0::2], a[..., 1::2]
        levels[j] = (even - odd) / 2.0
        a = (even + odd) / 2.0
        j -= 1
    return a[..., 0], levels


def _inverse_rows(mean: np.ndarray, levels: dict[int, np.ndarray], J: int) -> np.ndarray:
    a = np.asarray(mean, float)[..., None]
    for j in range(J + 1):
        c = levels.get(j)
        out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
        if c is None:
            out[..., 0::2] = a
            out[..., 1::2] = a
        else:
            out[..., 0::2] = a + c
            out[..., 1::2] = a - c
        a = out
    return a


def haar_forward(segment) -> WaveletDecomposition:
    """Decompose a power-of-two segment in O(N)."""
    x = np.asarray(segment, dtype=float)
    if x.ndim != 1:
        raise ValueError("segment must be 1-d")
    _check_length(x.size)
    mean, levels = _forward_rows(x)
    return WaveletDecomposition(x.size, float(mean), levels)


def haar_inverse(decomp: WaveletDecomposition) -> np.ndarray:
    mean = decomp.mean if decomp.has_mean else 0.0
    return _inverse_rows(np.float64(mean), decomp.levels, decomp.J)


def lowpass_filter(decomp: WaveletDecomposition, spec: FilterSpec) -> WaveletDecomposition:
    spec.validate(decomp.J)
    kept = {j: c.copy() for j, c in decomp.levels.items() if j < spec.j_star}
    has_mean = decomp.has_mean and spec.keep_mean
    return WaveletDecomposition(decomp.subseries_length, decomp.mean if has_mean else 0.0,
                                kept, has_mean)


@dataclass(frozen=True)
class CompressionReport:
    total_samples: int
    subseries_length: int
    subseries_count: int
    remainder_samples: int
    retained_coefficients: int
    J: int
    j_star: int

    @property
    def processed_samples(self) -> int:
        return self.subseries_count * self.subseries_length

    @property
    def retention_fraction(self) -> float:
        return self.retained_coefficients / self.processed_samples

    @property
    def compression_rate(self) -> float:
        return 1.0 - self.retention_fraction

    def to_dict(self) -> dict:
        return {
            "total_samples": self.total_samples,
            "subseries_length": self.subseries_length,
            "subseries_count": self.subseries_count,
            "remainder_samples": self.remainder_samples,
            "retained_coefficients": self.retained_coefficients,
            "retention_fraction": self.retention_fraction,
            "compression_rate": self.compression_rate,
            "J": self.J,
            "j_star": self.j_star,
        }


def _filter_block(rows: np.ndarray, J: int, spec: FilterSpec) -> np.ndarray:
    mean, levels = _forward_rows(rows)
    kept = {j: c for j, c in levels.items() if j < spec.j_star}
    if not spec.keep_mean:
        mean = np.zeros_like(mean)
    return _inverse_rows(mean, kept, J)


def filter_series(returns: ReturnSeries, J: int = 11, spec: FilterSpec = FilterSpec(),
                  threads: int = 1) -> tuple[ReturnSeries, CompressionReport]:
    """Low-pass filter consecutive disjoint subseries of length ``2**(J+1)``.

    Samples past the last full subseries are dropped from the output and
    counted in ``CompressionReport.remainder_samples``. Subseries are
    independent; ``threads`` only changes scheduling, never the result.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    spec.validate(J)
    n = 2 ** (J + 1)
    values = returns.values
    count = values.size // n
    if count == 0:
        raise ValueError(f"series of {values.size} samples is shorter than one "
                         f"subseries of {n}")
    blocks = values[: count * n].reshape(count, n)
    if threads > 1 and count > 1:
        chunks = np.array_split(np.arange(count), min(threads, count))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda idx: _filter_block(blocks[idx], J, spec), chunks))
        filtered = np.concatenate(parts, axis=0)
    else:
        filtered = _filter_block(blocks, J, spec)
    per_block = (2 ** spec.j_star - 1) + int(spec.keep_mean)
    report = CompressionReport(
        total_samples=values.size,
        subseries_length=n,
        subseries_count=count,
        remainder_samples=values.size - count * n,
        retained_coefficients=count * per_block,
        J=J,
        j_star=spec.j_star,
    )
    meta = dict(returns.meta)
    meta["filter"] = report.to_dict() | {"keep_mean": spec.keep_mean}
    out = ReturnSeries(
        values=filtered.reshape(-1),
        step_minutes=returns.step_minutes,
        mean_removed=returns.mean_removed,
        outliers_neutralized=returns.outliers_neutralized,
        source_span=returns.source_span,
        drift_fallback=returns.drift_fallback,
        meta=meta,
    )
    return out, report
