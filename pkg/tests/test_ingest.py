import numpy as np
import pytest

from lpplfit.ingest import IngestError, RawSeries, load_csv, to_series
from lpplfit.weights import WeightScheme


def write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_headered_file_by_name(tmp_path):
    p = write(tmp_path, "Date,Open,Close\n2020-01-02,10,11.5\n2020-01-03,11,12.25\n")
    raw = load_csv(p, column="close")
    np.testing.assert_array_equal(raw.closes, [11.5, 12.25])
    assert raw.dates == ["2020-01-02", "2020-01-03"]


def test_headerless_file_by_position(tmp_path):
    p = write(tmp_path, "1,100.0\n2,101.0\n3,99.5\n")
    raw = load_csv(p, column=1)
    np.testing.assert_array_equal(raw.closes, [100.0, 101.0, 99.5])
    assert raw.dates is None


def test_missing_column_name(tmp_path):
    p = write(tmp_path, "date,close\n2020-01-02,10\n")
    with pytest.raises(IngestError, match="adj_close"):
        load_csv(p, column="adj_close")


def test_unparsable_row_reports_file_row_number(tmp_path):
    p = write(tmp_path, "date,close\n2020-01-02,10\n2020-01-03,N/A\n")
    with pytest.raises(IngestError, match="row 3"):
        load_csv(p)


def test_nonpositive_close_rejected(tmp_path):
    p = write(tmp_path, "date,close\n2020-01-02,10\n2020-01-03,-4\n")
    with pytest.raises(IngestError, match="row 3"):
        load_csv(p)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(IngestError, match="no such file"):
        load_csv(tmp_path / "absent.csv")
    p = write(tmp_path, "\n\n")
    with pytest.raises(IngestError, match="empty"):
        load_csv(p)
    p2 = write(tmp_path, "date,close\n", name="header_only.csv")
    with pytest.raises(IngestError, match="no data rows"):
        load_csv(p2)


def test_blank_lines_skipped(tmp_path):
    p = write(tmp_path, "close\n10\n\n11\n")
    assert load_csv(p).n == 2


def test_out_of_order_dates_warn(tmp_path):
    p = write(tmp_path, "date,close\n2020-01-03,10\n2020-01-02,11\n")
    with pytest.warns(UserWarning, match="out of order"):
        load_csv(p)


def test_raw_series_validation():
    with pytest.raises(IngestError):
        RawSeries(closes=np.array([]))
    with pytest.raises(IngestError, match="index 2"):
        RawSeries(closes=np.array([1.0, 0.0, 2.0]))
    with pytest.raises(IngestError):
        RawSeries(closes=np.array([1.0, np.nan]))


def test_to_series_log_transform_and_weights():
    raw = RawSeries(closes=np.exp(np.linspace(0, 1, 10)))
    series = to_series(raw, WeightScheme.step(4, 10))
    np.testing.assert_allclose(series.log_prices, np.linspace(0, 1, 10), rtol=1e-15)
    np.testing.assert_array_equal(series.weights[:3], 0)
    np.testing.assert_array_equal(series.weights[3:], 1)


def test_trading_period_indices_ignore_calendar_gaps(tmp_path):
    # a weekend gap between rows still advances the index by exactly one
    p = write(tmp_path, "date,close\n2020-01-03,10\n2020-01-06,11\n" * 1)
    raw = load_csv(p)
    series = to_series(raw)
    np.testing.assert_array_equal(series.indices, [1, 2])
