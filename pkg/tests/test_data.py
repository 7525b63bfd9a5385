import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundliq import data as dm
from fundliq.data import DataValidationError

from conftest import write


def test_stock_bars_pass_through(tmp_path):
    p = write(tmp_path / "b.csv", "stock_id,date,ret,dvol\nS1,2015-01-02,0.01,100\nS1,2015-01-05,-0.02,50\nS2,2015-01-02,0,0\n")
    df = dm.ingest_stock_bars(p)
    assert len(df) == 3
    assert list(df.columns) == dm.STOCK_BARS_COLUMNS


def test_negative_volume_rejected_with_line(tmp_path):
    p = write(tmp_path / "b.csv", "stock_id,date,ret,dvol\nS1,2015-01-02,0.01,100\nS1,2015-01-05,0.01,-5\n")
    with pytest.raises(DataValidationError) as e:
        dm.ingest_stock_bars(p)
    assert "line 3" in str(e.value)


def test_duplicate_bar_names_both_lines(tmp_path):
    p = write(tmp_path / "b.csv", "stock_id,date,ret,dvol\nS1,2015-01-02,0.01,100\nS2,2015-01-02,0.0,1\nS1,2015-01-02,0.02,90\n")
    with pytest.raises(DataValidationError) as e:
        dm.ingest_stock_bars(p)
    msg = str(e.value)
    assert "2" in msg and "4" in msg and "duplicate" in msg.lower()


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        dm.ingest_stock_bars(tmp_path / "nope.csv")


def test_bad_header(tmp_path):
    p = write(tmp_path / "b.csv", "stock,date,ret,dvol\nS1,2015-01-02,0.01,100\n")
    with pytest.raises(DataValidationError, match="header"):
        dm.ingest_stock_bars(p)


def test_malformed_number(tmp_path):
    p = write(tmp_path / "b.csv", "stock_id,date,ret,dvol\nS1,2015-01-02,abc,100\n")
    with pytest.raises(DataValidationError, match="line 2"):
        dm.ingest_stock_bars(p)


HOLD = "fund_id,month,stock_id,weight\n"


@pytest.mark.parametrize(
    "rows, ok",
    [
        ("F1,2015-01,S1,0.50\nF1,2015-01,S2,0.45\nF1,2015-01,CASH_NET,0.05\n", True),
        ("F1,2015-01,S1,0.50\nF1,2015-01,S2,0.30\n", False),
        ("F1,2015-01,S1,0.5\nF1,2015-01,S2,0.5\nF1,2015-01,TBILL,0.03\n", True),
        ("F1,2015-01,S1,1.2\nF1,2015-01,S2,-0.2\n", False),
    ],
)
def test_holdings_weight_budget(tmp_path, rows, ok):
    p = write(tmp_path / "h.csv", HOLD + rows)
    if ok:
        df = dm.ingest_holdings(p)
        assert df.groupby(["fund_id", "month"])["weight"].sum().between(0.95, 1.05).all()
    else:
        with pytest.raises(DataValidationError):
            dm.ingest_holdings(p)


def test_snapshot_view(tmp_path):
    p = write(tmp_path / "h.csv", HOLD + "F1,2015-01,S1,0.50\nF1,2015-01,S2,0.45\nF1,2015-01,CASH_NET,0.03\nF1,2015-01,CD,0.02\n")
    (snap,) = list(dm.iter_snapshots(dm.ingest_holdings(p)))
    assert snap.positions == {"S1": 0.50, "S2": 0.45}
    assert snap.cash_components["cash_and_net_assets"] == pytest.approx(3.0)
    assert snap.cash_components["certificate_of_deposit"] == pytest.approx(2.0)
    assert snap.total_weight == pytest.approx(1.0)


FS = "fund_id,month,nav,tna,expense_ratio,turnover,age_months\n"


def test_fund_series_ok(tmp_path):
    p = write(tmp_path / "f.csv", FS + "F1,2015-01,10,100,2,50,12\nF1,2015-02,10.1,101,2,50,13\n")
    assert len(dm.ingest_fund_series(p)) == 2


def test_fund_series_zero_tna(tmp_path):
    p = write(tmp_path / "f.csv", FS + "F1,2015-01,10,0,2,50,12\n")
    with pytest.raises(DataValidationError, match="tna"):
        dm.ingest_fund_series(p)


def test_fund_series_age_decrease_names_months(tmp_path):
    p = write(tmp_path / "f.csv", FS + "F1,2015-01,10,100,2,50,12\nF1,2015-02,10,100,2,50,11\n")
    with pytest.raises(DataValidationError) as e:
        dm.ingest_fund_series(p)
    assert "2015-01" in str(e.value) and "2015-02" in str(e.value)


def _factors(ms):
    return "month,mkt_excess,smb,hml,wml,rf\n" + "".join(f"{m},0.01,0,0,0,0.005\n" for m in ms)


def test_factors_contiguous(tmp_path):
    ms = pd.period_range("2013-01", periods=36, freq="M").strftime("%Y-%m")
    assert len(dm.ingest_factors(write(tmp_path / "x.csv", _factors(ms)))) == 36


def test_factor_gap_reported(tmp_path):
    ms = [m for m in pd.period_range("2015-01", periods=12, freq="M").strftime("%Y-%m") if m != "2015-06"]
    with pytest.raises(DataValidationError, match="2015-06"):
        dm.ingest_factors(write(tmp_path / "x.csv", _factors(ms)))


def test_market_daily_uses_trading_calendar(tmp_path):
    days = pd.bdate_range("2015-01-01", "2015-01-31")
    text = "date,mkt_ret\n" + "".join(f"{d:%Y-%m-%d},0.001\n" for d in days)
    p = write(tmp_path / "m.csv", text)
    assert len(dm.ingest_market_daily(p, trading_days=days)) == len(days)
    # a holiday in the stock calendar is fine; a missing traded day is not
    assert len(dm.ingest_market_daily(p, trading_days=days.delete(3))) == len(days)
    short = write(tmp_path / "m2.csv", "date,mkt_ret\n" + "".join(f"{d:%Y-%m-%d},0.001\n" for d in days.delete(5)))
    with pytest.raises(DataValidationError, match=f"{days[5]:%Y-%m-%d}"):
        dm.ingest_market_daily(short, trading_days=days)


def _funds(counts: dict[str, int], start="2011-01") -> pd.DataFrame:
    rows = []
    for f, n in counts.items():
        for m in pd.period_range(start, periods=n, freq="M"):
            rows.append((f, m))
    return pd.DataFrame(rows, columns=["fund_id", "month"])


def test_sample_filter_boundaries():
    kept = dm.apply_sample_filter(_funds({"A": 35, "B": 36, "DEAD": 48, "C": 156}))
    assert set(kept["fund_id"]) == {"B", "DEAD", "C"}


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.sampled_from("ABCDEFG"), st.integers(1, 60), min_size=1), st.integers(1, 60), st.integers(1, 60))
def test_sample_filter_idempotent_monotone(counts, m1, m2):
    funds = _funds(counts)
    lo, hi = sorted((m1, m2))
    once = dm.apply_sample_filter(funds, lo)
    pd.testing.assert_frame_equal(dm.apply_sample_filter(once, lo), once)
    assert set(dm.apply_sample_filter(funds, hi)["fund_id"]) <= set(once["fund_id"])


def test_round_trip(tmp_path, small_universe_dir):
    df = dm.ingest_fund_series(small_universe_dir / "fund_series.csv")
    again = dm.ingest_fund_series(dm.write_csv(df, tmp_path / "fs.csv"))
    pd.testing.assert_frame_equal(df, again)
    h = dm.ingest_holdings(small_universe_dir / "holdings.csv")
    pd.testing.assert_frame_equal(h, dm.ingest_holdings(dm.write_csv(h, tmp_path / "h.csv")))


def test_ingest_ignores_row_order(tmp_path, small_universe_dir):
    src = (small_universe_dir / "stock_bars.csv").read_text().splitlines()
    head, body = src[0], src[1:]
    shuffled = write(tmp_path / "s.csv", "\n".join([head, *reversed(body)]) + "\n")
    pd.testing.assert_frame_equal(dm.ingest_stock_bars(small_universe_dir / "stock_bars.csv"), dm.ingest_stock_bars(shuffled))
