"""Flat-file inputs: schemas, validated ingest, sample filter and export.

Every ingest function returns a pandas DataFrame sorted on its natural key,
so the same file bytes always give the same frame.  Any invariant violation
raises :class:`DataValidationError` carrying one message per offending line
(line numbers count the header as line 1).
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
import pandas as pd

STOCK_BARS_COLUMNS = ["stock_id", "date", "ret", "dvol"]
HOLDINGS_COLUMNS = ["fund_id", "month", "stock_id", "weight"]
FUND_SERIES_COLUMNS = ["fund_id", "month", "nav", "tna", "expense_ratio", "turnover", "age_months"]
FACTORS_COLUMNS = ["month", "mkt_excess", "smb", "hml", "wml", "rf"]
MARKET_DAILY_COLUMNS = ["date", "mkt_ret"]

# holdings.csv stock_id codes for the five cash-equivalent categories, in reporting order
CASH_CODES = ("CASH_NET", "CD", "TBILL", "CP", "BILLS_REDISC")
CASH_FIELDS = (
    "cash_and_net_assets",
    "certificate_of_deposit",
    "treasury_bills",
    "commercial_paper",
    "bills_rediscounting",
)

WEIGHT_SUM_BOUNDS = (0.95, 1.05)


class DataValidationError(ValueError):
    """Raised when an input file breaks its schema or a record invariant."""

    def __init__(self, path, issues: Iterable[str]):
        self.path = str(path)
        self.issues = list(issues)
        shown = "\n  ".join(self.issues[:20])
        more = f"\n  ... {len(self.issues) - 20} more" if len(self.issues) > 20 else ""
        super().__init__(f"{self.path}: {len(self.issues)} problem(s)\n  {shown}{more}")


@dataclass(frozen=True)
class HoldingsSnapshot:
    """A fund's month-end portfolio.

    ``positions`` maps stock_id to weight as a fraction of TNA.
    ``cash_components`` holds the five cash-equivalent categories as
    *percentages* of TNA, keyed by the names in ``CASH_FIELDS``.
    """

    fund_id: str
    month: pd.Period
    positions: Mapping[str, float]
    cash_components: Mapping[str, float] = field(
        default_factory=lambda: dict.fromkeys(CASH_FIELDS, 0.0)
    )

    @property
    def equity_weight(self) -> float:
        return float(sum(self.positions.values()))

    @property
    def total_weight(self) -> float:
        return self.equity_weight + sum(self.cash_components.values()) / 100.0


# ---------------------------------------------------------------------------
# low-level parsing helpers
# ---------------------------------------------------------------------------

def _read(path, columns: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if list(df.columns) != columns:
        raise DataValidationError(
            path, [f"line 1: header {list(df.columns)} does not match expected {columns}"]
        )
    df.index = np.arange(2, len(df) + 2)  # file line numbers
    return df


def _numeric(df: pd.DataFrame, col: str, issues: list[str]) -> pd.Series:
    out = pd.to_numeric(df[col].str.strip(), errors="coerce")
    for line in out.index[out.isna() | ~np.isfinite(out.fillna(0.0))]:
        issues.append(f"line {line}: malformed {col} {df.at[line, col]!r}")
    return out.astype(float)


def _months(df: pd.DataFrame, col: str, issues: list[str]) -> pd.Series:
    parsed = pd.to_datetime(df[col].str.strip(), format="%Y-%m", errors="coerce")
    for line in parsed.index[parsed.isna()]:
        issues.append(f"line {line}: malformed {col} {df.at[line, col]!r} (expected YYYY-MM)")
    return parsed.dt.to_period("M")


def _dates(df: pd.DataFrame, col: str, issues: list[str]) -> pd.Series:
    parsed = pd.to_datetime(df[col].str.strip(), format="%Y-%m-%d", errors="coerce")
    for line in parsed.index[parsed.isna()]:
        issues.append(f"line {line}: malformed {col} {df.at[line, col]!r} (expected YYYY-MM-DD)")
    return parsed


def _ids(df: pd.DataFrame, col: str, issues: list[str]) -> pd.Series:
    out = df[col].str.strip()
    for line in out.index[out == ""]:
        issues.append(f"line {line}: empty {col}")
    return out


def _duplicates(df: pd.DataFrame, key: list[str], issues: list[str], what: str) -> None:
    dup = df.duplicated(key, keep=False)
    if not dup.any():
        return
    for _, grp in df[dup].groupby(key, sort=True):
        lines = ", ".join(str(i) for i in grp.index)
        label = ", ".join(str(grp.iloc[0][k]) for k in key)
        issues.append(f"lines {lines}: duplicate {what} ({label})")


def _check(path, issues: list[str]) -> None:
    if issues:
        raise DataValidationError(path, issues)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def ingest_stock_bars(path) -> pd.DataFrame:
    """Read ``stock_bars.csv`` (stock_id,date,ret,dvol)."""
    raw = _read(path, STOCK_BARS_COLUMNS)
    issues: list[str] = []
    df = pd.DataFrame(
        {
            "stock_id": _ids(raw, "stock_id", issues),
            "date": _dates(raw, "date", issues),
            "ret": _numeric(raw, "ret", issues),
            "dvol": _numeric(raw, "dvol", issues),
        },
        index=raw.index,
    )
    for line in df.index[df["dvol"] < 0]:
        issues.append(f"line {line}: dvol {df.at[line, 'dvol']} is negative")
    for line in df.index[df["ret"] <= -1]:
        issues.append(f"line {line}: ret {df.at[line, 'ret']} is not above -1")
    _duplicates(df, ["stock_id", "date"], issues, "(stock_id, date)")
    _check(path, issues)
    return df.sort_values(["stock_id", "date"], kind="mergesort").reset_index(drop=True)


def ingest_holdings(path) -> pd.DataFrame:
    """Read ``holdings.csv`` (fund_id,month,stock_id,weight).

    Weights are fractions of TNA for every row, cash rows included.  The
    per-snapshot budget (stocks + cash) must fall in ``WEIGHT_SUM_BOUNDS``.
    Use :func:`iter_snapshots` to view the result as ``HoldingsSnapshot``.
    """
    raw = _read(path, HOLDINGS_COLUMNS)
    issues: list[str] = []
    df = pd.DataFrame(
        {
            "fund_id": _ids(raw, "fund_id", issues),
            "month": _months(raw, "month", issues),
            "stock_id": _ids(raw, "stock_id", issues),
            "weight": _numeric(raw, "weight", issues),
        },
        index=raw.index,
    )
    for line in df.index[df["weight"] < 0]:
        issues.append(f"line {line}: negative weight {df.at[line, 'weight']}")
    _duplicates(df, ["fund_id", "month", "stock_id"], issues, "(fund_id, month, stock_id)")
    _check(path, issues)

    lo, hi = WEIGHT_SUM_BOUNDS
    totals = df.groupby(["fund_id", "month"], sort=True)["weight"].sum()
    for (fund, month), total in totals.items():
        if not lo <= total <= hi:
            issues.append(
                f"snapshot ({fund}, {month}): weight sum {total:.6f} outside [{lo}, {hi}]"
            )
    _check(path, issues)
    return df.sort_values(["fund_id", "month", "stock_id"], kind="mergesort").reset_index(drop=True)


def iter_snapshots(holdings: pd.DataFrame) -> Iterator[HoldingsSnapshot]:
    """Yield one snapshot per (fund_id, month) in key order."""
    code_to_field = dict(zip(CASH_CODES, CASH_FIELDS))
    for (fund, month), grp in holdings.groupby(["fund_id", "month"], sort=True):
        positions: dict[str, float] = {}
        cash = dict.fromkeys(CASH_FIELDS, 0.0)
        for sid, w in zip(grp["stock_id"], grp["weight"]):
            if sid in code_to_field:
                cash[code_to_field[sid]] += 100.0 * w
            else:
                positions[sid] = float(w)
        yield HoldingsSnapshot(fund, month, positions, cash)


def ingest_fund_series(path) -> pd.DataFrame:
    """Read ``fund_series.csv`` (fund_id,month,nav,tna,expense_ratio,turnover,age_months)."""
    raw = _read(path, FUND_SERIES_COLUMNS)
    issues: list[str] = []
    cols = {"fund_id": _ids(raw, "fund_id", issues), "month": _months(raw, "month", issues)}
    for c in FUND_SERIES_COLUMNS[2:]:
        cols[c] = _numeric(raw, c, issues)
    df = pd.DataFrame(cols, index=raw.index)
    for c in ("tna", "nav"):
        for line in df.index[df[c] <= 0]:
            issues.append(f"line {line}: {c} {df.at[line, c]} must be positive")
    for c in ("expense_ratio", "turnover", "age_months"):
        for line in df.index[df[c] < 0]:
            issues.append(f"line {line}: {c} {df.at[line, c]} is negative")
    _duplicates(df, ["fund_id", "month"], issues, "(fund_id, month)")
    _check(path, issues)

    df = df.sort_values(["fund_id", "month"], kind="mergesort")
    prev_age = df.groupby("fund_id")["age_months"].shift(1)
    prev_month = df.groupby("fund_id")["month"].shift(1)
    bad = df.index[prev_age.notna() & (df["age_months"] <= prev_age)]
    for line in bad:
        issues.append(
            f"line {line}: fund {df.at[line, 'fund_id']} age_months not increasing "
            f"between {prev_month[line]} ({prev_age[line]:g}) and {df.at[line, 'month']} "
            f"({df.at[line, 'age_months']:g})"
        )
    _check(path, issues)
    return df.reset_index(drop=True)


def _gap_ranges(present: Iterable, expected: Iterable) -> list[tuple]:
    """Contiguous runs of ``expected`` items that are absent from ``present``."""
    have = set(present)
    runs: list[tuple] = []
    start = prev = None
    for item in expected:
        if item in have:
            if start is not None:
                runs.append((start, prev))
                start = None
        else:
            start = item if start is None else start
        prev = item
    if start is not None:
        runs.append((start, prev))
    return runs


def _fmt_run(run, fmt=str) -> str:
    a, b = run
    return fmt(a) if a == b else f"{fmt(a)}..{fmt(b)}"


def ingest_factors(path) -> pd.DataFrame:
    """Read ``factors.csv``; months must be unique and contiguous."""
    raw = _read(path, FACTORS_COLUMNS)
    issues: list[str] = []
    cols = {"month": _months(raw, "month", issues)}
    for c in FACTORS_COLUMNS[1:]:
        cols[c] = _numeric(raw, c, issues)
    df = pd.DataFrame(cols, index=raw.index)
    _duplicates(df, ["month"], issues, "month")
    _check(path, issues)
    df = df.sort_values("month", kind="mergesort").reset_index(drop=True)
    if len(df):
        full = pd.period_range(df["month"].iloc[0], df["month"].iloc[-1], freq="M")
        for run in _gap_ranges(df["month"], full):
            issues.append(f"gap in factor months: {_fmt_run(run)} missing")
    _check(path, issues)
    return df


def ingest_market_daily(path, trading_days=None) -> pd.DataFrame:
    """Read ``market_daily.csv`` (date,mkt_ret).

    ``trading_days`` is the calendar the series must cover, normally the
    distinct dates of the stock-bar file.  Without it, Monday-Friday
    business days between the first and last date are expected.
    """
    raw = _read(path, MARKET_DAILY_COLUMNS)
    issues: list[str] = []
    df = pd.DataFrame(
        {"date": _dates(raw, "date", issues), "mkt_ret": _numeric(raw, "mkt_ret", issues)},
        index=raw.index,
    )
    for line in df.index[df["mkt_ret"] <= -1]:
        issues.append(f"line {line}: mkt_ret {df.at[line, 'mkt_ret']} is not above -1")
    _duplicates(df, ["date"], issues, "date")
    _check(path, issues)
    df = df.sort_values("date", kind="mergesort").reset_index(drop=True)
    if len(df):
        if trading_days is None:
            expected = pd.bdate_range(df["date"].iloc[0], df["date"].iloc[-1])
        else:
            expected = pd.DatetimeIndex(sorted(set(pd.to_datetime(trading_days))))
        fmt = lambda d: d.strftime("%Y-%m-%d")  # noqa: E731
        for run in _gap_ranges(df["date"], expected):
            issues.append(f"gap in market days: {_fmt_run(run, fmt)} missing")
    _check(path, issues)
    return df


def apply_sample_filter(funds: pd.DataFrame, min_months: int = 36) -> pd.DataFrame:
    """Keep funds with at least ``min_months`` monthly observations.

    Funds that stop reporting before the sample ends are kept when they
    meet the threshold, so the sample stays free of survivorship bias.
    Months need not be contiguous.
    """
    if min_months < 1:
        raise ValueError("min_months must be >= 1")
    counts = funds.groupby("fund_id")["month"].transform("nunique")
    return funds[counts >= min_months].reset_index(drop=True)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    """Write ``text`` via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv_text(df: pd.DataFrame) -> str:
    """Render a frame the way the ingest functions expect to read it.

    Periods become ``YYYY-MM``, timestamps ``YYYY-MM-DD``; floats keep
    round-trip precision.
    """
    out = df.copy()
    for c in out.columns:
        s = out[c]
        if isinstance(s.dtype, pd.PeriodDtype):
            out[c] = s.dt.strftime("%Y-%m")
        elif pd.api.types.is_datetime64_any_dtype(s):
            out[c] = s.dt.strftime("%Y-%m-%d")
        elif pd.api.types.is_float_dtype(s):
            out[c] = [("" if np.isnan(v) else repr(float(v))) for v in s.to_numpy()]
    return out.to_csv(index=False, lineterminator="\n")


def write_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    atomic_write_text(path, to_csv_text(df))
    return path
