"""Investor flows, cash holdings and the six-month cash-change variables.

Flows assume all new money arrives at month end, so a month's growth in
TNA beyond the fund's own return is net investor money.  Series helpers
operate on a calendar-month grid: a missing month is a gap, never zero.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .data import CASH_CODES, CASH_FIELDS, HoldingsSnapshot


def monthly_flow(tna_t, tna_prev, ret_t):
    """(TNA_t - TNA_{t-1} (1 + R_t)) / TNA_{t-1}; NaN when the prior TNA is missing."""
    tna_t, tna_prev, ret_t = (np.asarray(a, dtype=float) for a in (tna_t, tna_prev, ret_t))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tna_prev > 0, (tna_t - tna_prev * (1.0 + ret_t)) / tna_prev, np.nan)
    return out[()] if out.ndim == 0 else out


def _calendar(s: pd.Series) -> pd.Series:
    s = s.sort_index()
    if s.index.has_duplicates:
        raise ValueError("series index has duplicate months")
    return s.reindex(pd.period_range(s.index.min(), s.index.max(), freq="M"))


def horizon_flow(tna: pd.Series, ret: pd.Series, horizon: int = 3) -> pd.Series:
    """Cumulative flow over (t - horizon, t] for every month t.

    (TNA_t - TNA_{t-h} * prod_{s=t-h+1..t} (1 + R_s)) / TNA_{t-h}.  Both
    series are indexed by monthly ``Period``; any gap inside the window gives
    NaN.  With ``horizon=1`` this is :func:`monthly_flow`.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    tna_c = _calendar(tna)
    ret_c = _calendar(ret).reindex(tna_c.index)
    growth = 1.0 + ret_c
    for k in range(1, horizon):
        growth = growth * (1.0 + ret_c.shift(k))
    base = tna_c.shift(horizon)
    out = pd.Series(monthly_flow(tna_c.to_numpy(), base.to_numpy(), growth.to_numpy() - 1.0), index=tna_c.index)
    return out.reindex(tna.index)


def cash_pct(snapshot: HoldingsSnapshot) -> float:
    """Cash and cash equivalents as % of TNA: the sum of the five categories."""
    return float(sum(snapshot.cash_components[f] for f in CASH_FIELDS))


def cash_pct_frame(holdings: pd.DataFrame) -> pd.DataFrame:
    """Vectorised :func:`cash_pct` over a long holdings frame (fund_id, month, cash_pct)."""
    w = holdings["weight"].where(holdings["stock_id"].isin(CASH_CODES), 0.0)
    tmp = pd.DataFrame({"fund_id": holdings["fund_id"], "month": holdings["month"], "cash_pct": 100.0 * w})
    return tmp.groupby(["fund_id", "month"], sort=True)["cash_pct"].sum().reset_index()


def cash_changes(cash_pct: pd.Series, tna: pd.Series, horizon: int = 6) -> pd.DataFrame:
    """Six-month changes in cash for one fund, indexed by month.

    dcash_level_6m: (Cash_t - Cash_{t-6}) / TNA_{t-6}, cash level = cash_pct/100 * TNA.
    dcash_prop_6m: (Cash/TNA)_t - (Cash/TNA)_{t-6}, as a fraction (0.02 = 2 points).
    """
    idx = cash_pct.index.union(tna.index)
    full = pd.period_range(idx.min(), idx.max(), freq="M")
    c = cash_pct.reindex(full) / 100.0
    a = tna.reindex(full)
    level = c * a
    prev_a = a.shift(horizon)
    out = pd.DataFrame(
        {
            "dcash_level_6m": (level - level.shift(horizon)) / prev_a.where(prev_a > 0),
            "dcash_prop_6m": c - c.shift(horizon),
        }
    )
    return out.reindex(cash_pct.index)


def fund_flows(panel: pd.DataFrame) -> pd.DataFrame:
    """Flow and cash-change columns for a calendar-gridded fund panel.

    ``panel`` must hold fund_id, month, tna, ret_net and cash_pct, with one
    row for every calendar month of every fund (gaps as NaN rows) and be
    sorted by fund then month.  Returns flow_1m, flow_q0, flow_q1,
    dcash_level_6m, dcash_prop_6m aligned to ``panel``'s index.
    """
    fund = panel["fund_id"]

    def lag(s: pd.Series, k: int) -> pd.Series:
        return s.groupby(fund, sort=False).shift(k)

    tna = panel["tna"]
    ret = panel["ret_net"]
    flow_1m = pd.Series(monthly_flow(tna, lag(tna, 1), ret), index=panel.index)
    growth = (1.0 + ret) * (1.0 + lag(ret, 1)) * (1.0 + lag(ret, 2))
    flow_q0 = pd.Series(monthly_flow(tna, lag(tna, 3), growth - 1.0), index=panel.index)
    flow_q1 = lag(flow_q0, 3)

    c = panel["cash_pct"] / 100.0
    level = c * tna
    prev_tna = lag(tna, 6)
    dlevel = (level - lag(level, 6)) / prev_tna.where(prev_tna > 0)
    dprop = c - lag(c, 6)
    return pd.DataFrame(
        {
            "flow_1m": flow_1m,
            "flow_q0": flow_q0,
            "flow_q1": flow_q1,
            "dcash_level_6m": dlevel,
            "dcash_prop_6m": dprop,
        },
        index=panel.index,
    )
