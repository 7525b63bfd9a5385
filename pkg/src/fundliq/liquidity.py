"""Stock-month Amihud illiquidity, Pastor-Stambaugh gamma, and fund aggregation.

Scalar functions (``amihud_stock_month``, ``ps_gamma_stock_month``,
``fund_illiquidity``) work on one unit and are the reference definitions.
``stock_month_liquidity`` and ``fund_month_illiquidity`` compute the same
quantities for a whole dataset in vectorised form.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Mapping, NamedTuple

import numpy as np
import pandas as pd

from .data import CASH_CODES, HoldingsSnapshot

MIN_DAYS_AMIHUD = 10
MIN_PAIRS_PS = 15
MIN_COVERAGE = 0.5
SINGULAR_SV_RATIO = 1e-5

SignConvention = Literal["excess", "raw"]
Measure = Literal["amihud", "ps"]


@dataclass(frozen=True)
class StockMonthLiquidity:
    stock_id: str
    month: pd.Period
    illiq_amihud: float = math.nan
    gamma: float = math.nan
    n_days: int = 0
    theta: float = math.nan
    phi: float = math.nan
    n_pairs: int = 0
    # "ok" when the gamma regression ran; otherwise why it did not
    ps_status: str = "not_run"


def _one_stock_month(bars: pd.DataFrame) -> tuple[str, pd.Period]:
    ids = pd.unique(bars["stock_id"])
    months = pd.unique(pd.DatetimeIndex(bars["date"]).to_period("M"))
    if len(ids) != 1 or len(months) != 1:
        raise ValueError("bars must belong to exactly one stock and one month")
    return ids[0], months[0]


def amihud_stock_month(bars: pd.DataFrame, min_days: int = MIN_DAYS_AMIHUD) -> StockMonthLiquidity:
    """Average of |ret| / dvol over the month's days with positive volume.

    Zero-volume days are dropped rather than counted as infinitely illiquid.
    The score is NaN when fewer than ``min_days`` days remain.
    """
    sid, month = _one_stock_month(bars)
    ret = bars["ret"].to_numpy(float)
    dvol = bars["dvol"].to_numpy(float)
    ok = (dvol > 0) & np.isfinite(ret)
    n = int(ok.sum())
    if n < min_days:
        return StockMonthLiquidity(sid, month, n_days=n)
    return StockMonthLiquidity(sid, month, illiq_amihud=float(np.mean(np.abs(ret[ok]) / dvol[ok])), n_days=n)


def _ps_pairs(dates: np.ndarray, ret: np.ndarray, dvol: np.ndarray, mkt: np.ndarray, sign: SignConvention):
    """Build (y, X) for the gamma regression from consecutive bars of one stock-month."""
    order = np.argsort(dates, kind="mergesort")
    ret, dvol, mkt = ret[order], dvol[order], mkt[order]
    excess = ret - mkt
    signed = np.sign(excess if sign == "excess" else ret) * dvol
    y = excess[1:]
    X = np.column_stack([np.ones(len(y)), ret[:-1], signed[:-1]])
    return y, X


def ps_gamma_stock_month(
    bars: pd.DataFrame,
    market_daily: pd.Series,
    min_pairs: int = MIN_PAIRS_PS,
    sign: SignConvention = "excess",
) -> StockMonthLiquidity:
    """Regress next-day excess return on [1, ret, sign(excess ret) * dvol].

    ``market_daily`` is the daily market return indexed by date.  Pairs are
    consecutive bars of the stock inside the month.  ``sign="raw"`` uses the
    sign of the raw return instead of the excess return.
    """
    sid, month = _one_stock_month(bars)
    dates = pd.DatetimeIndex(bars["date"])
    mkt = market_daily.reindex(dates).to_numpy(float)
    if np.isnan(mkt).any():
        missing = dates[np.isnan(mkt)][0].date()
        raise KeyError(f"market return missing for {missing}")
    y, X = _ps_pairs(dates.to_numpy(), bars["ret"].to_numpy(float), bars["dvol"].to_numpy(float), mkt, sign)
    n = len(y)
    if n < min_pairs:
        return StockMonthLiquidity(sid, month, n_pairs=n, ps_status="insufficient_pairs")
    scale = np.sqrt((X**2).mean(axis=0))
    scale[scale == 0] = 1.0
    coef, _, _, sv = np.linalg.lstsq(X / scale, y, rcond=None)
    # same conditioning cut-off as the batched path (eigenvalue ratio 1e-10)
    if sv[-1] <= SINGULAR_SV_RATIO * sv[0]:
        return StockMonthLiquidity(sid, month, n_pairs=n, ps_status="singular")
    theta, phi, gamma = coef / scale
    return StockMonthLiquidity(sid, month, gamma=float(gamma), theta=float(theta), phi=float(phi), n_pairs=n, ps_status="ok")


def _amihud_frame(bars: pd.DataFrame, min_days: int) -> pd.DataFrame:
    ok = bars["dvol"] > 0
    ratio = (bars["ret"].abs() / bars["dvol"]).where(ok)
    g = pd.DataFrame({"stock_id": bars["stock_id"], "month": bars["month"], "r": ratio})
    agg = g.groupby(["stock_id", "month"], sort=True)["r"].agg(["sum", "count"])
    illiq = (agg["sum"] / agg["count"]).where(agg["count"] >= min_days)
    return pd.DataFrame({"illiq_amihud": illiq, "n_days": agg["count"].astype(int)})


def _gamma_frame(bars: pd.DataFrame, min_pairs: int, sign: SignConvention) -> pd.DataFrame:
    """Batched gamma regressions through per-group normal equations."""
    b = bars
    same = (b["stock_id"].to_numpy()[1:] == b["stock_id"].to_numpy()[:-1]) & (
        b["month"].to_numpy()[1:] == b["month"].to_numpy()[:-1]
    )
    ret = b["ret"].to_numpy(float)
    excess = ret - b["mkt_ret"].to_numpy(float)
    signed = np.sign(excess if sign == "excess" else ret) * b["dvol"].to_numpy(float)
    y = excess[1:][same]
    X = np.column_stack([np.ones(same.sum()), ret[:-1][same], signed[:-1][same]])
    keys = b[["stock_id", "month"]].iloc[1:][same]
    codes, uniques = pd.MultiIndex.from_frame(keys).factorize(sort=True)
    n_groups = len(uniques)
    counts = np.bincount(codes, minlength=n_groups)

    # per-group column scaling keeps the 3x3 systems well conditioned
    sq = np.zeros((n_groups, 3))
    for j in range(3):
        sq[:, j] = np.bincount(codes, weights=X[:, j] ** 2, minlength=n_groups)
    scale = np.sqrt(sq / np.maximum(counts, 1)[:, None])
    scale[scale == 0] = 1.0
    Xs = X / scale[codes]
    xtx = np.zeros((n_groups, 3, 3))
    xty = np.zeros((n_groups, 3))
    for i in range(3):
        xty[:, i] = np.bincount(codes, weights=Xs[:, i] * y, minlength=n_groups)
        for j in range(i, 3):
            v = np.bincount(codes, weights=Xs[:, i] * Xs[:, j], minlength=n_groups)
            xtx[:, i, j] = xtx[:, j, i] = v

    status = np.full(n_groups, "ok", dtype=object)
    status[counts < min_pairs] = "insufficient_pairs"
    eig = np.linalg.eigvalsh(xtx)
    singular = (eig[:, 0] <= SINGULAR_SV_RATIO**2 * np.maximum(eig[:, -1], 1e-300)) & (status == "ok")
    status[singular] = "singular"
    good = status == "ok"
    coef = np.full((n_groups, 3), np.nan)
    if good.any():
        coef[good] = np.linalg.solve(xtx[good], xty[good][..., None])[..., 0] / scale[good]
    idx = pd.MultiIndex.from_tuples(list(uniques), names=["stock_id", "month"])
    return pd.DataFrame(
        {"theta": coef[:, 0], "phi": coef[:, 1], "gamma": coef[:, 2], "n_pairs": counts, "ps_status": status},
        index=idx,
    )


def stock_month_liquidity(
    bars: pd.DataFrame,
    market_daily: pd.DataFrame | None = None,
    *,
    min_days: int = MIN_DAYS_AMIHUD,
    min_pairs: int = MIN_PAIRS_PS,
    sign: SignConvention = "excess",
    workers: int = 1,
) -> pd.DataFrame:
    """Amihud and gamma for every stock-month in ``bars``.

    Returns one row per stock-month with columns stock_id, month,
    illiq_amihud, gamma, n_days, theta, phi, n_pairs, ps_status.  Gamma
    columns are NaN (status "no_market") when ``market_daily`` is None.
    ``workers`` splits the stock universe into chunks computed in threads;
    every chunk is computed independently so results do not depend on it.
    """
    b = bars[["stock_id", "date", "ret", "dvol"]].sort_values(["stock_id", "date"], kind="mergesort")
    b = b.assign(month=b["date"].dt.to_period("M"))
    if market_daily is not None:
        mkt = market_daily.set_index("date")["mkt_ret"]
        b = b.assign(mkt_ret=mkt.reindex(b["date"]).to_numpy())
        if b["mkt_ret"].isna().any():
            missing = b.loc[b["mkt_ret"].isna(), "date"].iloc[0].date()
            raise KeyError(f"market return missing for {missing}")

    stocks = np.array(sorted(b["stock_id"].unique()))
    chunks = [c for c in np.array_split(stocks, max(1, min(workers, len(stocks)))) if len(c)]

    def run(chunk) -> pd.DataFrame:
        part = b[b["stock_id"].isin(chunk)]
        out = _amihud_frame(part, min_days)
        if market_daily is not None:
            out = out.join(_gamma_frame(part, min_pairs, sign), how="left")
        return out

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    out = pd.concat(parts).sort_index()
    if market_daily is None:
        out = out.assign(theta=np.nan, phi=np.nan, gamma=np.nan, n_pairs=0, ps_status="no_market")
    out["n_pairs"] = out["n_pairs"].fillna(0).astype(int)
    out["ps_status"] = out["ps_status"].fillna("insufficient_pairs")
    cols = ["illiq_amihud", "gamma", "n_days", "theta", "phi", "n_pairs", "ps_status"]
    return out[cols].reset_index()


class FundIlliquidity(NamedTuple):
    value: float
    coverage: float


def fund_illiquidity(
    snapshot: HoldingsSnapshot,
    stock_liq: Mapping[str, float | StockMonthLiquidity],
    measure: Measure = "amihud",
    min_coverage: float = MIN_COVERAGE,
) -> FundIlliquidity:
    """Value-weighted illiquidity of one snapshot's equity positions.

    Weights are renormalised over positions with a non-missing score; cash
    is excluded.  ``coverage`` is the covered share of equity weight and the
    value is NaN when it falls below ``min_coverage``.
    """
    num = covered = total = 0.0
    for sid, w in sorted(snapshot.positions.items()):
        if sid in CASH_CODES:
            continue
        total += w
        liq = stock_liq.get(sid)
        if isinstance(liq, StockMonthLiquidity):
            if liq.month != snapshot.month:
                raise ValueError(f"liquidity for {sid} is dated {liq.month}, snapshot is {snapshot.month}")
            liq = liq.illiq_amihud if measure == "amihud" else liq.gamma
        if liq is None or not np.isfinite(liq):
            continue
        num += w * liq
        covered += w
    if total <= 0 or covered <= 0:
        return FundIlliquidity(math.nan, 0.0)
    coverage = covered / total
    if coverage < min_coverage:
        return FundIlliquidity(math.nan, coverage)
    return FundIlliquidity(num / covered, coverage)


def fund_month_illiquidity(
    holdings: pd.DataFrame,
    stock_liq: pd.DataFrame,
    min_coverage: float = MIN_COVERAGE,
) -> pd.DataFrame:
    """Fund-month Amihud and gamma illiquidity for every snapshot.

    Columns: fund_id, month, illiq_amihud, illiq_ps, coverage (Amihud
    coverage), coverage_ps.
    """
    eq = holdings[~holdings["stock_id"].isin(CASH_CODES)]
    m = eq.merge(stock_liq[["stock_id", "month", "illiq_amihud", "gamma"]], on=["stock_id", "month"], how="left")
    keys = ["fund_id", "month"]
    total = m.groupby(keys, sort=True)["weight"].sum()
    out = {}
    for col, name in (("illiq_amihud", "amihud"), ("gamma", "ps")):
        x = pd.to_numeric(m[col], errors="coerce")
        w = m["weight"].where(x.notna(), 0.0)
        tmp = pd.DataFrame({"fund_id": m["fund_id"], "month": m["month"], "w": w, "wx": w * x.fillna(0.0)})
        g = tmp.groupby(keys, sort=True)[["w", "wx"]].sum()
        cov = (g["w"] / total).where(total > 0, 0.0)
        val = (g["wx"] / g["w"]).where((cov >= min_coverage) & (g["w"] > 0))
        out[name] = (val, cov)
    # snapshots holding only cash have no equity rows; they get NaN scores
    allkeys = holdings.groupby(keys, sort=True).size().index
    res = pd.DataFrame(
        {
            "illiq_amihud": out["amihud"][0],
            "illiq_ps": out["ps"][0],
            "coverage": out["amihud"][1],
            "coverage_ps": out["ps"][1],
        }
    ).reindex(allkeys)
    res[["coverage", "coverage_ps"]] = res[["coverage", "coverage_ps"]].fillna(0.0)
    return res.reset_index()


def delta_illiq(illiq: pd.Series, horizon: int = 3) -> pd.Series:
    """illiq_t - illiq_{t-horizon} on a calendar-month index (gaps stay missing)."""
    s = illiq.sort_index()
    full = pd.period_range(s.index.min(), s.index.max(), freq="M")
    s = s.reindex(full)
    return (s - s.shift(horizon)).reindex(illiq.index)

