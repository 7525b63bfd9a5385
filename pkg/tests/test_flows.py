import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundliq.data import CASH_FIELDS, HoldingsSnapshot
from fundliq.flows import cash_changes, cash_pct, cash_pct_frame, fund_flows, horizon_flow, monthly_flow

from conftest import months


def test_monthly_flow_examples():
    assert monthly_flow(110, 100, 0.10) == pytest.approx(0.0, abs=1e-15)
    assert monthly_flow(115, 100, 0.10) == pytest.approx(0.05, rel=1e-12)
    assert math.isnan(monthly_flow(115, np.nan, 0.10))


def test_large_redemption_allowed():
    assert monthly_flow(10, 100, 0.0) == pytest.approx(-0.9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e3, 1e12), st.floats(-0.99, 3.0))
def test_pure_return_growth_is_zero_flow(tna, r):
    assert abs(monthly_flow(tna * (1 + r), tna, r)) <= 1e-12


def test_horizon_flow_example():
    idx = months("2015-01", 4)
    tna = pd.Series([100, 101, 101, 103.02], index=idx)
    ret = pd.Series(0.0, index=idx)
    assert horizon_flow(tna, ret, 3).iloc[3] == pytest.approx(0.0302, rel=1e-12)


def test_horizon_flow_zero_flows(rng):
    idx = months("2015-01", 10)
    r = pd.Series(rng.normal(0.01, 0.05, 10), index=idx)
    tna = 100 * (1 + r).cumprod()
    assert np.allclose(horizon_flow(tna, r, 3).dropna(), 0.0, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(50, 500), st.floats(-0.3, 0.3)), min_size=2, max_size=24))
def test_horizon_one_equals_monthly(path):
    idx = months("2012-01", len(path))
    tna = pd.Series([a for a, _ in path], index=idx)
    ret = pd.Series([r for _, r in path], index=idx)
    h = horizon_flow(tna, ret, 1).to_numpy()
    m = monthly_flow(tna.to_numpy()[1:], tna.to_numpy()[:-1], ret.to_numpy()[1:])
    assert math.isnan(h[0])
    np.testing.assert_array_equal(h[1:], m)


def test_horizon_flow_gap_is_missing():
    idx = months("2015-01", 7)
    tna = pd.Series(100.0, index=idx).drop(idx[2])
    ret = pd.Series(0.0, index=idx).drop(idx[2])
    out = horizon_flow(tna, ret, 3)
    # every window touching 2015-03 (as a return month or as the base) is missing
    assert out.loc[idx[3:6]].isna().all() and out.loc[idx[6]] == 0.0


def _snap(components):
    return HoldingsSnapshot("F", pd.Period("2015-01", "M"), {"S": 0.9}, dict(zip(CASH_FIELDS, components)))


def test_cash_pct_examples():
    assert cash_pct(_snap([2, 0, 1, 0, 0])) == 3.0
    assert cash_pct(_snap([0] * 5)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=5, max_size=5), st.permutations(range(5)))
def test_cash_pct_permutation_invariant(c, perm):
    assert cash_pct(_snap([c[i] for i in perm])) == pytest.approx(cash_pct(_snap(c)), rel=1e-12)
    assert cash_pct(_snap(c)) == pytest.approx(sum(c), rel=1e-12)


def test_cash_pct_frame():
    h = pd.DataFrame({"fund_id": "F", "month": pd.Period("2015-01", "M"),
                      "stock_id": ["S", "CASH_NET", "TBILL"], "weight": [0.95, 0.02, 0.01]})
    assert cash_pct_frame(h)["cash_pct"].iloc[0] == pytest.approx(3.0)


def test_cash_changes_examples():
    idx = months("2015-01", 7)
    tna = pd.Series(100.0, index=idx)
    cp = pd.Series([3.0] * 6 + [5.0], index=idx)
    out = cash_changes(cp, tna).iloc[6]
    assert out["dcash_level_6m"] == pytest.approx(0.02)
    assert out["dcash_prop_6m"] == pytest.approx(0.02)  # two percentage points as a fraction

    doubled = pd.Series([100.0] * 6 + [200.0], index=idx)
    out = cash_changes(pd.Series(3.0, index=idx), doubled).iloc[6]
    assert out["dcash_level_6m"] == pytest.approx(0.03)
    assert out["dcash_prop_6m"] == 0.0


def test_cash_changes_unchanged_and_missing():
    idx = months("2015-01", 8)
    out = cash_changes(pd.Series(4.0, index=idx), pd.Series(50.0, index=idx))
    assert out.iloc[:6].isna().all().all()
    assert (out.iloc[6:] == 0).all().all()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 30), min_size=7, max_size=7), st.lists(st.floats(10, 1000), min_size=7, max_size=7), st.floats(0.1, 10))
def test_prop_invariant_to_tna_scale(cp, tna, k):
    idx = months("2015-01", 7)
    a = cash_changes(pd.Series(cp, index=idx), pd.Series(tna, index=idx))
    b = cash_changes(pd.Series(cp, index=idx), pd.Series(tna, index=idx) * k)
    assert a["dcash_prop_6m"].iloc[6] == b["dcash_prop_6m"].iloc[6]
    assert b["dcash_level_6m"].iloc[6] == pytest.approx(a["dcash_level_6m"].iloc[6], rel=1e-9, abs=1e-12)


def test_fund_flows_matches_series_helpers(rng):
    n = 14
    idx = months("2015-01", n)
    r = rng.normal(0.01, 0.03, n)
    tna = 100 * np.cumprod(1 + r + rng.normal(0.005, 0.01, n))
    cp = rng.uniform(1, 6, n)
    panel = pd.DataFrame({"fund_id": "F", "month": idx, "tna": tna, "ret_net": r, "cash_pct": cp})
    out = fund_flows(panel)
    s_tna, s_ret = pd.Series(tna, index=idx), pd.Series(r, index=idx)
    np.testing.assert_allclose(out["flow_q0"], horizon_flow(s_tna, s_ret, 3), rtol=1e-12)
    np.testing.assert_allclose(out["flow_1m"], horizon_flow(s_tna, s_ret, 1), rtol=1e-12)
    np.testing.assert_allclose(out["flow_q1"].to_numpy()[6:], out["flow_q0"].to_numpy()[3:-3])
    cc = cash_changes(pd.Series(cp, index=idx), s_tna)
    np.testing.assert_allclose(out["dcash_level_6m"], cc["dcash_level_6m"], rtol=1e-12)
