import math

import numpy as np
import pytest

from eop.analytics import (black_scholes_call, compare_premiums, generate_synthetic,
                           histogram_l1, horizon_histogram, horizon_sums)
from eop.marketdata import ReturnSeries
from eop.wavelet import FilterSpec, filter_series


@pytest.fixture(scope="module")
def student():
    return generate_synthetic("student_t", 241664, 2.2e-4, seed=5)


@pytest.fixture(scope="module")
def student_filtered(student):
    return filter_series(student, 11, FilterSpec(4))[0]


class TestHistogram:
    def test_zero_series(self):
        h = horizon_histogram(ReturnSeries(np.zeros(1000)), 100)
        assert np.count_nonzero(h.counts) == 1
        centre = np.flatnonzero(h.counts)[0]
        assert h.bin_edges[centre] <= 0 < h.bin_edges[centre + 1]
        assert h.counts.sum() == h.sample_count == (1000 - 100) // 60 + 1

    def test_gaussian_kurtosis(self):
        g = generate_synthetic("gaussian", 700_000, 1e-4, seed=1)
        h = horizon_histogram(g, 100)
        assert h.sample_count >= 10_000
        assert abs(h.excess_kurtosis) < 0.3

    def test_moments_and_edges(self, student):
        h = horizon_histogram(student, 300, bins=41)
        sums = horizon_sums(student, 300)
        assert h.mean == pytest.approx(sums.mean())
        assert h.stddev == pytest.approx(sums.std())
        assert len(h.bin_edges) == 42
        assert h.bin_edges[0] == pytest.approx(h.mean - 6 * h.stddev)
        assert np.all(np.diff(h.bin_edges) > 0)
        assert h.counts.sum() == h.sample_count

    def test_mass_conserved_with_outside_values(self):
        x = np.zeros(2000)
        x[50] = 1.0
        h = horizon_histogram(ReturnSeries(x), 10, stride=1, edges=np.linspace(-0.1, 0.1, 5))
        assert h.counts.sum() == h.sample_count

    def test_too_short(self):
        with pytest.raises(ValueError):
            horizon_histogram(ReturnSeries(np.zeros(50)), 100)

    def test_l1_shrinks_with_horizon(self, student, student_filtered):
        d = [histogram_l1(student, student_filtered, T) for T in (100, 300, 600)]
        assert d[0] > d[1] > d[2]

    def test_aligned_windows_identical(self, student, student_filtered):
        a = horizon_histogram(student, 512, stride=256)
        b = horizon_histogram(student_filtered, 512, stride=256)
        np.testing.assert_array_equal(a.counts, b.counts)


class TestBlackScholes:
    def test_zero_vol_intrinsic(self):
        assert black_scholes_call(100, 90, 510, 0.0, 0.0) == 10.0
        assert black_scholes_call(100, 90, 510, 0.0, 1e-12) == pytest.approx(10.0, abs=1e-9)

    def test_atm_one_year(self):
        v = black_scholes_call(100, 100, 128520, 0.0, 0.2, 128520)
        assert v == pytest.approx(7.965567455405797, abs=1e-10)

    def test_textbook_value(self):
        # S=K=100, r=5%, sigma=20%, one year
        assert black_scholes_call(100, 100, 1, 0.05, 0.2, 1) == pytest.approx(10.4506, abs=1e-4)

    def test_vega_positive(self):
        vals = [black_scholes_call(100, 105, 5100, 0.045, s) for s in (0.05, 0.1, 0.2, 0.4)]
        assert vals == sorted(vals) and len(set(vals)) == 4

    @pytest.mark.parametrize("E", [50, 90, 100, 110, 200])
    def test_parity_bounds(self, E):
        v = black_scholes_call(100, E, 2550, 0.045, 0.3)
        assert 100 - E * math.exp(-0.045 * 2550 / 128520) <= v <= 100


class TestSynthetic:
    def test_gaussian_std(self):
        g = generate_synthetic("gaussian", 1_000_000, 1e-4, seed=2)
        assert g.std == pytest.approx(1e-4, rel=0.005)
        assert abs(g.values.mean()) <= 1e-12 * g.std

    def test_seed_determinism(self):
        a = generate_synthetic("student_t", 1000, 1e-4, seed=9)
        b = generate_synthetic("student_t", 1000, 1e-4, seed=9)
        assert a.values.tobytes() == b.values.tobytes()

    def test_student_t_heavy_tails(self):
        t = generate_synthetic("student_t", 2_000_000, 1e-4, seed=3)
        x = t.values
        kurt = np.mean(x ** 4) / np.mean(x ** 2) ** 2 - 3
        assert kurt > 3
        assert t.std == pytest.approx(1e-4, rel=0.02)

    @pytest.mark.parametrize("kwargs", [dict(kind="student_t", nu=2.0), dict(kind="cauchy"),
                                        dict(kind="gaussian", length=0)])
    def test_invalid(self, kwargs):
        args = dict(kind="gaussian", length=10, per_minute_sigma=1e-4) | kwargs
        with pytest.raises(ValueError):
            generate_synthetic(**args)


class TestCompare:
    def test_identity_filter(self):
        x = generate_synthetic("student_t", 8192, 2e-4, seed=4)
        f, _ = filter_series(x, 11, FilterSpec(12))
        rows = compare_premiums(x, f, 5500, [5450, 5500, 5550], 1020, 0.045)
        assert all(r.abs_diff < 1e-9 for r in rows)

    def test_market_column(self, student, student_filtered):
        rows = compare_premiums(student, student_filtered, 5500, [5400, 5500], 2550, 0.045,
                                market=[110.0, None])
        assert rows[0].market == 110.0 and rows[1].market is None
        assert rows[0].abs_diff == abs(rows[0].premium_original - rows[0].premium_filtered)

    def test_common_span(self):
        x = generate_synthetic("gaussian", 5000, 2e-4, seed=6)
        f, _ = filter_series(x, 11, FilterSpec(12))
        rows = compare_premiums(x, f, 100, [100], 510)
        assert rows[0].abs_diff < 1e-12

    def test_two_day_near_the_money(self, student, student_filtered):
        rows = compare_premiums(student, student_filtered, 5500, [5500], 1020, 0.045)
        assert rows[0].rel_diff <= 0.05
