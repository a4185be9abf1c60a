import numpy as np
import pytest

from eop.analytics import generate_synthetic
from eop.fixtures import fixture_path
from eop.io import SeriesFormatError, atomic_write, load_returns, load_series, save_series
from eop.marketdata import ingest_csv, preprocess


def test_returns_round_trip_exact(tmp_path):
    rs = generate_synthetic("student_t", 5000, 3e-4, seed=1)
    p = tmp_path / "r.eops"
    save_series(rs, p)
    back = load_series(p)
    assert back.values.tobytes() == rs.values.tobytes()
    assert back.meta == rs.meta
    assert p.read_text().startswith("# eop-series v1\n# meta: ")


def test_prices_round_trip(tmp_path):
    prices = ingest_csv(fixture_path())
    p = tmp_path / "p.eops"
    save_series(prices, p)
    back = load_series(p)
    np.testing.assert_array_equal(back.timestamps, prices.timestamps)
    np.testing.assert_array_equal(back.prices, prices.prices)
    assert back.session_boundaries == prices.session_boundaries


def test_preprocessed_metadata_survives(tmp_path):
    rs = preprocess(ingest_csv(fixture_path()))
    p = tmp_path / "r.eops"
    save_series(rs, p)
    back = load_returns(p)
    assert back.outliers_neutralized == rs.outliers_neutralized >= 1
    assert back.source_span == rs.source_span
    assert back.mean_removed == rs.mean_removed


def test_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("timestamp,price\n")
    with pytest.raises(SeriesFormatError):
        load_series(p)


def test_load_returns_rejects_prices(tmp_path):
    p = tmp_path / "p.eops"
    save_series(ingest_csv(fixture_path()), p)
    with pytest.raises(SeriesFormatError, match="preprocess"):
        load_returns(p)


def test_atomic_write_cleans_up(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(RuntimeError):
        with atomic_write(target) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []


def test_fixture_shape():
    prices = ingest_csv(fixture_path())
    assert len(prices.session_boundaries) == 24
    assert len(prices) < 25 * 510
