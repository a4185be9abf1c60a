import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eop.marketdata import ReturnSeries
from eop.wavelet import (FilterSpec, HaarBasisIndex, WaveletDecomposition, filter_series,
                         haar_forward, haar_inverse, lowpass_filter)


def mother(t):
    t = np.asarray(t, float)
    return np.where((0 <= t) & (t < 0.5), 1.0, np.where((0.5 <= t) & (t < 1), -1.0, 0.0))


def basis_matrix(n):
    """Columns: constant, then psi_jk(i/N) for j = 0..J, k = 0..2**j - 1."""
    J = int(np.log2(n)) - 1
    i = np.arange(n)
    cols = [np.ones(n)]
    labels = [None]
    for j in range(J + 1):
        for k in range(2 ** j):
            cols.append(mother(2 ** j * i / n - k))
            labels.append((j, k))
    return np.column_stack(cols), labels


def block_means(x, block):
    return np.repeat(x.reshape(-1, block).mean(axis=1), block)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestForward:
    def test_constant(self):
        d = haar_forward(np.full(16, 2.5))
        assert d.mean == 2.5
        assert all(v == 0 for _, v in d.items())
        assert d.coefficient_count == 15

    def test_single_mother_wavelet(self):
        d = haar_forward([1.0, -1.0])
        assert d.J == 0
        assert d.mean == 0.0
        assert d[0, 0] == 1.0

    def test_matches_least_squares_projection(self):
        x = np.random.default_rng(0).standard_normal(16)
        A, labels = basis_matrix(16)
        coef, *_ = np.linalg.lstsq(A, x, rcond=None)
        d = haar_forward(x)
        assert abs(d.mean - coef[0]) < 1e-10
        got = np.array([d[j, k] for j, k in labels[1:]])
        assert np.max(np.abs(got - coef[1:])) < 1e-10

    @pytest.mark.parametrize("n", [0, 1, 3, 12, 4095])
    def test_rejects_non_power_of_two(self, n):
        with pytest.raises(ValueError):
            haar_forward(np.zeros(n))

    def test_index_validation(self):
        with pytest.raises(ValueError):
            HaarBasisIndex(2, 4)
        with pytest.raises(ValueError):
            HaarBasisIndex(-1, 0)
        assert HaarBasisIndex(3, 7).k == 7


class TestInverse:
    def test_round_trip_4096(self):
        x = np.random.default_rng(1).standard_normal(4096)
        y = haar_inverse(haar_forward(x))
        assert np.max(np.abs(y - x)) / np.max(np.abs(x)) < 1e-10

    def test_mean_only(self):
        y = haar_inverse(WaveletDecomposition(8, 3.0))
        np.testing.assert_array_equal(y, np.full(8, 3.0))

    def test_empty(self):
        np.testing.assert_array_equal(haar_inverse(WaveletDecomposition(32, 0.0)), np.zeros(32))

    def test_matches_explicit_expansion(self):
        rng = np.random.default_rng(2)
        A, labels = basis_matrix(32)
        levels = {j: rng.standard_normal(2 ** j) for j in range(5)}
        d = WaveletDecomposition(32, 0.7, levels)
        c = np.array([0.7] + [levels[j][k] for j, k in labels[1:]])
        np.testing.assert_allclose(haar_inverse(d), A @ c, atol=1e-12)

    @given(st.integers(1, 13).flatmap(lambda p: arrays(np.float64, 2 ** p, elements=finite)))
    def test_round_trip_property(self, x):
        y = haar_inverse(haar_forward(x))
        scale = max(np.max(np.abs(x)), 1e-300)
        assert np.max(np.abs(y - x)) / scale < 1e-10


class TestProperties:
    @given(st.integers(1, 10).flatmap(lambda p: arrays(np.float64, 2 ** p, elements=finite)))
    def test_energy_split(self, x):
        d = haar_forward(x)
        n = x.size
        energy = n * d.mean ** 2 + sum(np.sum(c ** 2) * n / 2 ** j for j, c in d.levels.items())
        total = np.sum(x ** 2)
        assert energy == pytest.approx(total, rel=1e-9, abs=1e-9)

    @given(arrays(np.float64, 64, elements=finite), arrays(np.float64, 64, elements=finite),
           st.floats(-10, 10), st.floats(-10, 10))
    def test_linearity(self, x, y, a, b):
        lhs = haar_forward(a * x + b * y)
        dx, dy = haar_forward(x), haar_forward(y)
        scale = 1 + abs(a) * np.abs(x).max() + abs(b) * np.abs(y).max()
        assert abs(lhs.mean - (a * dx.mean + b * dy.mean)) < 1e-10 * scale
        for j in lhs.levels:
            assert np.max(np.abs(lhs.levels[j] - (a * dx.levels[j] + b * dy.levels[j]))) < 1e-10 * scale


class TestLowpass:
    def test_full_threshold_is_identity(self):
        x = np.random.default_rng(3).standard_normal(256)
        d = haar_forward(x)
        f = lowpass_filter(d, FilterSpec(d.J + 1))
        assert f.retained_values == 256
        np.testing.assert_array_equal(haar_inverse(f), haar_inverse(d))

    def test_retention_at_default_threshold(self):
        d = haar_forward(np.random.default_rng(4).standard_normal(4096))
        f = lowpass_filter(d, FilterSpec(4))
        assert d.J == 11
        assert f.coefficient_count == 15
        assert f.retained_values == 16
        assert sorted(f.levels) == [0, 1, 2, 3]
        assert f.retained_values / 4096 == pytest.approx(0.0039, abs=1e-4)
        assert 1 - f.retained_values / 4096 == pytest.approx(0.996, abs=5e-4)

    @pytest.mark.parametrize("j_star", [1, 2, 4, 7, 11])
    def test_equals_block_averages(self, j_star):
        x = np.random.default_rng(j_star).standard_normal(4096)
        y = haar_inverse(lowpass_filter(haar_forward(x), FilterSpec(j_star)))
        assert np.max(np.abs(y - block_means(x, 4096 >> j_star))) < 1e-10

    def test_drop_mean(self):
        x = np.random.default_rng(5).standard_normal(64) + 3
        y = haar_inverse(lowpass_filter(haar_forward(x), FilterSpec(2, keep_mean=False)))
        np.testing.assert_allclose(y, block_means(x, 16) - x.mean(), atol=1e-12)

    @pytest.mark.parametrize("j_star", [0, 13])
    def test_threshold_range(self, j_star):
        with pytest.raises(ValueError):
            lowpass_filter(haar_forward(np.zeros(4096)), FilterSpec(j_star))


class TestFilterSeries:
    def test_desk_length_partition(self):
        x = ReturnSeries(np.random.default_rng(6).standard_normal(241664))
        out, rep = filter_series(x, 11, FilterSpec(4))
        assert rep.subseries_count == 59
        assert rep.retained_coefficients == 944
        assert rep.remainder_samples == 0
        assert rep.retention_fraction == 944 / 241664
        assert len(out) == 241664

    def test_full_retention_identity(self):
        x = ReturnSeries(np.random.default_rng(7).standard_normal(4096))
        out, rep = filter_series(x, 11, FilterSpec(12))
        np.testing.assert_allclose(out.values, x.values, atol=1e-12)
        assert rep.retained_coefficients == 4096

    def test_remainder_excluded(self):
        x = ReturnSeries(np.random.default_rng(8).standard_normal(5000))
        out, rep = filter_series(x, 11, FilterSpec(4))
        assert rep.subseries_count == 1
        assert rep.remainder_samples == 904
        assert len(out) == 4096
        assert out.meta["filter"]["remainder_samples"] == 904

    def test_too_short(self):
        with pytest.raises(ValueError):
            filter_series(ReturnSeries(np.zeros(100)), 11)

    def test_threads_do_not_change_output(self):
        x = ReturnSeries(np.random.default_rng(9).standard_t(4, 20 * 4096))
        a, _ = filter_series(x, 11, FilterSpec(4), threads=1)
        b, _ = filter_series(x, 11, FilterSpec(4), threads=3)
        assert a.values.tobytes() == b.values.tobytes()

    def test_block_sum_preservation(self):
        x = np.random.default_rng(10).standard_t(4, 3 * 4096) * 1e-4
        out, _ = filter_series(ReturnSeries(x), 11, FilterSpec(4))
        for start in (0, 256, 1024, 4096 + 512):
            for length in (256, 768, 2048):
                sl = slice(start, start + length)
                assert out.values[sl].sum() == pytest.approx(x[sl].sum(), abs=1e-15)
