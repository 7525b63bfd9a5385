"""Fund-month panel assembly and the study's tables.

Internally returns, flows and alphas are fractions per month; the
``*_table`` helpers scale them to percent for reporting.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .econometrics import (
    FACTOR_SETS,
    RegressionFit,
    fe_regress,
    nw_mean_test,
    rolling_alpha_matrix,
    standardize,
    winsorize,
)
from .flows import fund_flows

PERF_METRICS = (
    "ret_gross", "alpha_capm_gross", "alpha_ff3_gross", "alpha_ff4_gross",
    "ret_net", "alpha_capm", "alpha_ff3", "alpha_ff4",
)
CONTROLS = ("age_months", "size", "expense_ratio", "turnover")

# pooled 5/95 clipping applies to these columns when winsorisation is on
WINSORIZED = (
    "ret_net", "ret_gross", "flow", "flow_q0", "flow_q1", "cash_pct", "dcash_level_6m",
    "dcash_prop_6m", "illiq_amihud", "illiq_ps", "illiq", "dilliq_3m", "activeness",
    "alpha_capm", "alpha_ff3", "alpha_ff4", "alpha_capm_gross", "alpha_ff3_gross",
    "alpha_ff4_gross", "size", "expense_ratio", "turnover",
)

PANEL_COLUMNS = [
    "fund_id", "month", "nav", "tna", "ret_net", "ret_gross", "flow", "flow_q0", "flow_q1",
    "cash_pct", "dcash_level_6m", "dcash_prop_6m", "illiq_amihud", "illiq_ps", "illiq",
    "dilliq_3m", "activeness", "alpha_capm", "alpha_ff3", "alpha_ff4", "alpha_capm_gross",
    "alpha_ff3_gross", "alpha_ff4_gross", "size", "expense_ratio", "turnover", "age_months",
    "flow_lag1", "flow_lag2", "flow_lag3", "flow_lag4", "flow_lag5", "illiq_lag6",
]


@dataclass(frozen=True)
class StudyConfig:
    winsor: tuple[float, float] | None = (5.0, 95.0)
    measure: str = "amihud"
    activeness_window: int = 12
    activeness_min_obs: int = 10
    alpha_window: int = 36
    alpha_timing: str = "out_of_sample"
    compute_alphas: bool = True
    start: str | None = None
    end: str | None = None
    min_months: int = 36
    cash_flow_lags: int = 6
    illiq_flow_lags: int = 4
    min_funds_sort: int = 10
    nw_lags: int | str = "auto"

    def __post_init__(self):
        if self.measure not in ("amihud", "ps"):
            raise ValueError(f"measure must be 'amihud' or 'ps', got {self.measure!r}")
        if self.activeness_window < 2:
            raise ValueError("activeness_window must be >= 2")
        if self.winsor is not None:
            lo, hi = self.winsor
            if not 0 <= lo < hi <= 100:
                raise ValueError(f"bad winsor bounds {self.winsor}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["winsor"] = list(self.winsor) if self.winsor else None
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class FundMonthRecord:
    fund_id: str
    month: pd.Period
    ret_net: float
    ret_gross: float
    flow: float
    cash_pct: float
    illiq_amihud: float
    illiq_ps: float
    activeness: float
    alpha_capm: float
    alpha_ff3: float
    alpha_ff4: float
    size: float
    expense_ratio: float
    turnover: float
    age_months: float


@dataclass
class PanelDataset:
    rows: pd.DataFrame
    provenance: dict = field(default_factory=dict)

    def record(self, fund_id: str, month) -> FundMonthRecord:
        month = pd.Period(month, freq="M")
        hit = self.rows[(self.rows["fund_id"] == fund_id) & (self.rows["month"] == month)]
        if hit.empty:
            raise KeyError((fund_id, str(month)))
        r = hit.iloc[0]
        return FundMonthRecord(**{f: r[f] for f in FundMonthRecord.__dataclass_fields__})

    def to_csv_text(self) -> str:
        from .data import to_csv_text

        return to_csv_text(self.rows)

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv_text().encode()).hexdigest()


def gross_return(ret_net, expense_ratio):
    """Monthly return gross of fees: net + (annual expense % / 1200)."""
    if not isinstance(expense_ratio, pd.Series):
        expense_ratio = np.asarray(expense_ratio, dtype=float)
    return ret_net + expense_ratio / 1200.0


def _calendar_grid(funds: pd.DataFrame) -> pd.DataFrame:
    """One row per fund per calendar month between its first and last report."""
    ords = funds["month"].map(lambda p: p.ordinal).astype("int64")
    span = pd.DataFrame({"fund_id": funds["fund_id"], "o": ords}).groupby("fund_id", sort=True)["o"].agg(["min", "max"])
    lengths = (span["max"] - span["min"] + 1).to_numpy()
    fund_ids = np.repeat(span.index.to_numpy(), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    month_ord = np.repeat(span["min"].to_numpy(), lengths) + offsets
    months = pd.PeriodIndex.from_ordinals(month_ord, freq="M")
    return pd.DataFrame({"fund_id": fund_ids, "month": months})


def _lagged_matrix(values: pd.Series, fund: pd.Series, lags: range) -> np.ndarray:
    return np.column_stack([values.groupby(fund, sort=False).shift(k).to_numpy() for k in lags])


def trailing_sd(values: pd.Series, fund: pd.Series, window: int = 12, min_obs: int = 10) -> pd.Series:
    """Sample SD of each fund's values over the ``window`` months before t."""
    M = _lagged_matrix(values, fund, range(1, window + 1))
    n = np.isfinite(M).sum(axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        # centre on a member of the window so a constant window gives exactly 0
        sd = np.nanstd(M - np.nanmax(M, axis=1, keepdims=True), axis=1, ddof=1)
    return pd.Series(np.where(n >= min_obs, sd, np.nan), index=values.index)


def liquidity_activeness(illiq: pd.Series, window: int = 12, min_obs: int = 10) -> pd.Series:
    """Liquidity activeness of one fund: SD of illiquidity over months [t-window, t-1].

    ``illiq`` is indexed by monthly Period; gaps count as missing values.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    s = illiq.sort_index()
    full = s.reindex(pd.period_range(s.index.min(), s.index.max(), freq="M"))
    fund = pd.Series(0, index=full.index)
    return trailing_sd(full, fund, window, min_obs).reindex(illiq.index)


def build_panel(
    fund_series: pd.DataFrame,
    factors: pd.DataFrame,
    fund_month: pd.DataFrame,
    config: StudyConfig = StudyConfig(),
    provenance: dict | None = None,
) -> PanelDataset:
    """Join fund series, holdings-derived cash/illiquidity and factors into the panel.

    ``fund_month`` carries fund_id, month, cash_pct, illiq_amihud and
    illiq_ps (as produced by :func:`fund_month_inputs` or by the synthetic
    generator).  Lags are taken on a calendar grid so gaps give
    missing values.  Lagged regressors (flow_lag*, illiq_lag6) are built
    from the winsorised base columns.
    """
    fs = fund_series
    fm = fund_month
    if config.start:
        fs = fs[fs["month"] >= pd.Period(config.start, freq="M")]
        fm = fm[fm["month"] >= pd.Period(config.start, freq="M")]
    if config.end:
        fs = fs[fs["month"] <= pd.Period(config.end, freq="M")]
        fm = fm[fm["month"] <= pd.Period(config.end, freq="M")]
    if fs.empty:
        raise ValueError("no fund-month rows inside the sample window")

    grid = _calendar_grid(fs)
    p = grid.merge(fs.assign(_real=True), on=["fund_id", "month"], how="left")
    p["_real"] = p["_real"].fillna(False).astype(bool)
    cols = ["fund_id", "month", "cash_pct", "illiq_amihud", "illiq_ps"]
    p = p.merge(fm[cols], on=["fund_id", "month"], how="left")
    fund = p["fund_id"]

    def lag(s: pd.Series, k: int) -> pd.Series:
        return s.groupby(fund, sort=False).shift(k)

    p["ret_net"] = p["nav"] / lag(p["nav"], 1) - 1.0
    p["ret_gross"] = gross_return(p["ret_net"], p["expense_ratio"])
    fl = fund_flows(p)
    p["flow"] = fl["flow_1m"]
    for c in ("flow_q0", "flow_q1", "dcash_level_6m", "dcash_prop_6m"):
        p[c] = fl[c]
    p["illiq"] = p["illiq_amihud"] if config.measure == "amihud" else p["illiq_ps"]
    p["dilliq_3m"] = p["illiq"] - lag(p["illiq"], 3)
    p["activeness"] = trailing_sd(p["illiq"], fund, config.activeness_window, config.activeness_min_obs)
    p["size"] = np.log(p["tna"])

    alpha_cols = ["alpha_capm", "alpha_ff3", "alpha_ff4", "alpha_capm_gross", "alpha_ff3_gross", "alpha_ff4_gross"]
    for c in alpha_cols:
        p[c] = np.nan
    if config.compute_alphas:
        f = factors.set_index("month")
        fac = f.reindex(p["month"])
        rf = fac["rf"].to_numpy()
        ex = np.column_stack([p["ret_net"].to_numpy() - rf, p["ret_gross"].to_numpy() - rf])
        bounds = np.flatnonzero(np.r_[True, fund.to_numpy()[1:] != fund.to_numpy()[:-1], True])
        for model in ("capm", "ff3", "ff4"):
            F = fac[list(FACTOR_SETS[model])].to_numpy()
            out = np.full(ex.shape, np.nan)
            for a, b in zip(bounds[:-1], bounds[1:]):
                out[a:b] = rolling_alpha_matrix(ex[a:b], F[a:b], config.alpha_window, config.alpha_timing)
            p[f"alpha_{model}"] = out[:, 0]
            p[f"alpha_{model}_gross"] = out[:, 1]

    # calendar filler rows carry nothing of their own
    p.loc[~p["_real"], [c for c in WINSORIZED if c in p.columns]] = np.nan
    if config.winsor is not None:
        lo, hi = config.winsor
        real = p["_real"]
        for c in WINSORIZED:
            if p.loc[real, c].notna().any():
                p.loc[real, c] = winsorize(p.loc[real, c], lo, hi)

    for k in range(1, 6):
        p[f"flow_lag{k}"] = lag(p["flow"], k)
    p["illiq_lag6"] = lag(p["illiq"], 6)

    p = p[p["_real"]].reset_index(drop=True)
    rows = p[PANEL_COLUMNS].copy()
    if rows.empty:
        raise ValueError("panel has no rows")
    prov = dict(provenance or {})
    prov["config"] = config.to_dict()
    prov["config_digest"] = config.digest()
    return PanelDataset(rows, prov)


# ---------------------------------------------------------------------------
# Table 1
# ---------------------------------------------------------------------------

TABLE1_ROWS = [
    ("Cash (%)", "cash_pct", 1.0),
    ("Illiq(Amihud) x 100", "illiq_amihud", 100.0),
    ("Illiq(PS) x 100", "illiq_ps", 100.0),
    ("Flows (%)", "flow", 100.0),
    ("Turnover (%)", "turnover", 1.0),
    ("Expense (%)", "expense_ratio", 1.0),
    ("Age (Months)", "age_months", 1.0),
    ("TNA (INR Billions)", "tna", 1e-9),
    ("Ret (%)", "ret_net", 100.0),
    ("alpha_1 (%)", "alpha_capm", 100.0),
    ("alpha_3 (%)", "alpha_ff3", 100.0),
    ("alpha_4 (%)", "alpha_ff4", 100.0),
]


def summary_stats(panel: PanelDataset | pd.DataFrame) -> pd.DataFrame:
    """Pooled mean, median, SD, P25 and P75 per variable, in Table 1 order and units."""
    rows = panel.rows if isinstance(panel, PanelDataset) else panel
    if rows.empty:
        raise ValueError("empty panel")
    out = []
    for label, col, scale in TABLE1_ROWS:
        v = rows[col].dropna().to_numpy(float) * scale
        if v.size == 0:
            out.append((label, np.nan, np.nan, np.nan, np.nan, np.nan, 0))
            continue
        q25, med, q75 = np.percentile(v, [25, 50, 75])
        sd = v.std(ddof=1) if v.size > 1 else 0.0
        out.append((label, v.mean(), med, sd, q25, q75, v.size))
    return pd.DataFrame(out, columns=["variable", "mean", "median", "sd", "q25", "q75", "n"]).set_index("variable")


# ---------------------------------------------------------------------------
# Table 2
# ---------------------------------------------------------------------------

def _rows(panel) -> pd.DataFrame:
    return panel.rows if isinstance(panel, PanelDataset) else panel


def flow_lag_columns(n_lags: int) -> list[str]:
    return ["flow"] + [f"flow_lag{k}" for k in range(1, n_lags)]


def run_eq4(panel, lags: int = 6) -> RegressionFit:
    """Six-month change in cash level on current and lagged monthly flows."""
    return fe_regress(_rows(panel), "dcash_level_6m", flow_lag_columns(lags))


def run_eq5(panel, lags: int = 6) -> RegressionFit:
    """Six-month change in the cash share of TNA on current and lagged flows."""
    return fe_regress(_rows(panel), "dcash_prop_6m", flow_lag_columns(lags))


def run_eq6(panel, lags: int = 4) -> RegressionFit:
    """Three-month change in fund illiquidity on current and lagged flows."""
    return fe_regress(_rows(panel), "dilliq_3m", flow_lag_columns(lags))


EQ7_TERMS = ["flow_q0", "flow_q0_x_illiq", "flow_q1", "flow_q1_x_illiq", "illiq_z"]


def eq7_frame(panel) -> pd.DataFrame:
    """Estimation sample for the interaction model with standardised lagged illiquidity."""
    rows = _rows(panel)
    need = ["dcash_level_6m", "flow_q0", "flow_q1", "illiq_lag6"]
    d = rows.loc[rows[need].notna().all(axis=1)].copy()
    d["illiq_z"] = standardize(d["illiq_lag6"])
    d["flow_q0_x_illiq"] = d["flow_q0"] * d["illiq_z"]
    d["flow_q1_x_illiq"] = d["flow_q1"] * d["illiq_z"]
    return d


def run_eq7(panel) -> RegressionFit:
    """Six-month cash change on quarterly flows interacted with standardised illiquidity at t-6."""
    return fe_regress(eq7_frame(panel), "dcash_level_6m", EQ7_TERMS)


# ---------------------------------------------------------------------------
# Table 3
# ---------------------------------------------------------------------------

@dataclass
class SortTable:
    """Quintile means over time, the 5-1 spread and its Newey-West t."""

    means: pd.DataFrame  # index quintile 1..5, columns signal + metrics
    spread: pd.Series
    nw_t: pd.Series
    monthly: pd.DataFrame  # long: month, quintile, n_funds, signal, metrics
    spread_series: pd.DataFrame  # month x metric, q5 - q1
    skipped_months: list = field(default_factory=list)

    @property
    def n_months(self) -> int:
        return len(self.spread_series)


def assign_quintiles(signal: np.ndarray, fund_ids: np.ndarray, n_groups: int = 5) -> np.ndarray:
    """Quintile 1..n by ascending signal, ties broken by fund_id; sizes differ by at most one."""
    order = np.lexsort((fund_ids, signal))
    q = np.empty(len(signal), dtype=int)
    q[order] = (np.arange(len(signal)) * n_groups) // len(signal) + 1
    return q


def quintile_sort(
    panel,
    signal: str = "activeness",
    metrics: Sequence[str] = PERF_METRICS,
    min_funds: int = 10,
    nw_lags: int | str = "auto",
) -> SortTable:
    """Monthly quintile sorts on lagged activeness with next-month performance.

    The panel's ``activeness`` at month t uses illiquidity through t-1, so
    sorting on it at t and averaging month-t performance is a sort formed at
    the end of t-1.  A fund enters a month's sort only if it has the signal
    and every requested metric.  Months with fewer than ``min_funds`` such
    funds are skipped with a warning.
    """
    rows = _rows(panel)
    metrics = list(metrics)
    d = rows.loc[rows[[signal, *metrics]].notna().all(axis=1), ["fund_id", "month", signal, *metrics]]
    recs = []
    skipped = []
    for month, g in d.groupby("month", sort=True):
        if len(g) < min_funds:
            skipped.append(month)
            continue
        q = assign_quintiles(g[signal].to_numpy(float), g["fund_id"].to_numpy().astype(str))
        vals = g[[signal, *metrics]].to_numpy(float)
        for k in range(1, 6):
            sel = q == k
            recs.append((month, k, int(sel.sum()), *vals[sel].mean(axis=0)))
    if skipped:
        warnings.warn(f"quintile_sort skipped {len(skipped)} month(s) with fewer than {min_funds} funds", RuntimeWarning, stacklevel=2)
    monthly = pd.DataFrame(recs, columns=["month", "quintile", "n_funds", "signal", *metrics])
    if monthly.empty:
        raise ValueError("no month had enough funds to sort")
    means = monthly.groupby("quintile")[["signal", *metrics]].mean()
    wide = monthly.pivot(index="month", columns="quintile", values=metrics)
    spread_series = pd.DataFrame({m: wide[(m, 5)] - wide[(m, 1)] for m in metrics})
    spread = means.loc[5, metrics] - means.loc[1, metrics]
    nw_t = pd.Series({m: nw_mean_test(spread_series[m].to_numpy(), nw_lags).t for m in metrics})
    return SortTable(means, spread, nw_t, monthly, spread_series, skipped)


# ---------------------------------------------------------------------------
# Table 4
# ---------------------------------------------------------------------------

def run_activeness_performance(
    panel,
    metrics: Sequence[str] = PERF_METRICS,
    controls: Sequence[str] = CONTROLS,
    workers: int = 1,
) -> dict[str, RegressionFit]:
    """Regress each performance metric on lagged activeness plus fund controls.

    Controls that the fund and month effects absorb completely (fund age
    grows one month per month, so it always is) are dropped and listed in
    ``fit.dropped``.
    """
    rows = _rows(panel)

    def one(m: str) -> RegressionFit:
        return fe_regress(rows, m, ["activeness", *controls], drop_absorbed=True)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(one, metrics))
    else:
        fits = [one(m) for m in metrics]
    return dict(zip(metrics, fits))


# ---------------------------------------------------------------------------
# inputs from raw files
# ---------------------------------------------------------------------------

def fund_month_inputs(holdings: pd.DataFrame, stock_liq: pd.DataFrame) -> pd.DataFrame:
    """Cash share and fund illiquidity per fund-month from holdings and stock scores."""
    from .flows import cash_pct_frame
    from .liquidity import fund_month_illiquidity

    cash = cash_pct_frame(holdings)
    illiq = fund_month_illiquidity(holdings, stock_liq)
    return cash.merge(illiq, on=["fund_id", "month"], how="outer").sort_values(["fund_id", "month"]).reset_index(drop=True)


# ---------------------------------------------------------------------------
# report tables
# ---------------------------------------------------------------------------

def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def fit_diagnostics(fit: RegressionFit) -> dict:
    return {
        "n_obs": fit.n_obs,
        "r2_adj": _num(fit.r2_adj),
        "r2_within": _num(fit.r2_within),
        "n_clusters": fit.n_clusters,
        "dropped": list(fit.dropped),
    }


def fits_table(fits: dict[str, RegressionFit], key: str = "model") -> pd.DataFrame:
    """Long table of coefficients: one row per (model, term)."""
    parts = []
    for name, fit in fits.items():
        s = fit.summary().reset_index()
        s.insert(0, key, name)
        s["n_obs"] = fit.n_obs
        s["r2_adj"] = fit.r2_adj
        s["n_clusters"] = fit.n_clusters
        parts.append(s)
    return pd.concat(parts, ignore_index=True)


def table3_frame(sort: SortTable) -> pd.DataFrame:
    """Quintile means in % per month (signal unscaled), the 5-1 spread and its NW t."""
    metrics = list(sort.spread.index)
    body = sort.means.copy()
    body[metrics] = body[metrics] * 100.0
    body.index = [str(q) for q in body.index]
    spread = pd.Series({"signal": body.loc["5", "signal"] - body.loc["1", "signal"], **(sort.spread * 100.0).to_dict()})
    nwt = pd.Series({"signal": np.nan, **sort.nw_t.to_dict()})
    out = pd.concat([body, spread.to_frame("5-1").T, nwt.to_frame("NW t").T])
    out.index.name = "quintile"
    return out.rename(columns={"signal": "sigma_illiq"}).reset_index()


ALL_TABLES = ("table1", "table2_panelA", "table2_panelB", "table3", "table4")


def compute_tables(
    panel: PanelDataset,
    tables: Sequence[str] = ALL_TABLES,
    workers: int = 1,
    config: StudyConfig = StudyConfig(),
) -> dict[str, tuple[pd.DataFrame, dict]]:
    """Frames and sidecar payloads for the requested tables.

    Independent fits run in a thread pool of ``workers``; every fit is a
    pure function of the panel, so output does not depend on it.
    """
    rows = panel.rows
    out: dict[str, tuple[pd.DataFrame, dict]] = {}

    def sidecar(name: str, extra: dict) -> dict:
        return {
            "table": name,
            "config_digest": panel.provenance.get("config_digest"),
            "inputs": panel.provenance.get("inputs", {}),
            "panel_rows": int(len(rows)),
            "n_funds": int(rows["fund_id"].nunique()),
            "n_months": int(rows["month"].nunique()),
            **extra,
        }

    jobs: dict[str, callable] = {}
    if "table2_panelA" in tables:
        jobs["eq4"] = lambda: run_eq4(rows, config.cash_flow_lags)
        jobs["eq5"] = lambda: run_eq5(rows, config.cash_flow_lags)
        jobs["eq6"] = lambda: run_eq6(rows, config.illiq_flow_lags)
    if "table2_panelB" in tables:
        jobs["eq7"] = lambda: run_eq7(rows)
    if "table4" in tables:
        for m in PERF_METRICS:
            jobs[f"t4:{m}"] = (lambda m=m: fe_regress(rows, m, ["activeness", *CONTROLS], drop_absorbed=True))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {k: pool.submit(f) for k, f in jobs.items()}
            fits = {k: f.result() for k, f in futs.items()}
    else:
        fits = {k: f() for k, f in jobs.items()}

    if "table1" in tables:
        t1 = summary_stats(rows)
        out["table1"] = (t1.reset_index(), sidecar("table1", {"n_obs": {k: int(v) for k, v in t1["n"].items()}}))
    if "table2_panelA" in tables:
        f = {k: fits[k] for k in ("eq4", "eq5", "eq6")}
        out["table2_panelA"] = (fits_table(f), sidecar("table2_panelA", {"fits": {k: fit_diagnostics(v) for k, v in f.items()}}))
    if "table2_panelB" in tables:
        out["table2_panelB"] = (fits_table({"eq7": fits["eq7"]}), sidecar("table2_panelB", {"fits": {"eq7": fit_diagnostics(fits["eq7"])}}))
    if "table3" in tables:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            st = quintile_sort(rows, min_funds=config.min_funds_sort, nw_lags=config.nw_lags)
        extra = {
            "n_months": st.n_months,
            "skipped_months": [str(m) for m in st.skipped_months],
            "warnings": [str(w.message) for w in caught],
        }
        out["table3"] = (table3_frame(st), sidecar("table3", extra))
    if "table4" in tables:
        f = {m: fits[f"t4:{m}"] for m in PERF_METRICS}
        out["table4"] = (fits_table(f, key="metric"), sidecar("table4", {"fits": {k: fit_diagnostics(v) for k, v in f.items()}}))
    return out


def write_tables(tables: dict[str, tuple[pd.DataFrame, dict]], outdir) -> list[tuple[str, str]]:
    """Write each table as CSV plus a JSON sidecar, atomically.  Returns (path, sha256) pairs."""
    from pathlib import Path

    from .data import atomic_write_text, to_csv_text

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (frame, meta) in tables.items():
        for path, text in (
            (outdir / f"{name}.csv", to_csv_text(frame)),
            (outdir / f"{name}.json", json.dumps(meta, sort_keys=True, indent=2, default=str) + "\n"),
        ):
            atomic_write_text(path, text)
            written.append((str(path), hashlib.sha256(text.encode()).hexdigest()))
    return written
