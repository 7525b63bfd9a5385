"""Command-line front end: ``fundliq <subcommand> [flags]``.

Subcommands: ingest, liquidity, flows, regress {eq4,eq5,eq6,eq7,table4},
sort, simulate, report.  Settings come from an optional JSON config
(``--config``) and flags override it.  Exit codes: 0 success, 1 invalid
input or configuration, 2 estimation failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import pandas as pd

from . import data as dm
from .econometrics import WINSOR_PRESETS, EstimationError
from .flows import fund_flows
from .liquidity import stock_month_liquidity
from .study import (
    PanelDataset,
    StudyConfig,
    build_panel,
    compute_tables,
    fits_table,
    fit_diagnostics,
    fund_month_inputs,
    run_eq4,
    run_eq5,
    run_eq6,
    run_eq7,
    write_tables,
)
from .synthetic import UniverseConfig, generate_universe, write_universe

INPUT_FILES = {
    "stock_bars": "stock_bars.csv",
    "holdings": "holdings.csv",
    "fund_series": "fund_series.csv",
    "factors": "factors.csv",
    "market_daily": "market_daily.csv",
}

NEEDS = {
    "ingest": tuple(INPUT_FILES),
    "liquidity": ("stock_bars", "market_daily", "holdings"),
    "flows": ("fund_series", "holdings"),
    "regress": tuple(INPUT_FILES),
    "sort": tuple(INPUT_FILES),
    "report": tuple(INPUT_FILES),
    "simulate": (),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: str = "."
    paths: dict = field(default_factory=dict)  # per-input overrides of data/<name>.csv
    out: str = "out"
    start: str | None = None
    end: str | None = None
    min_months: int = 36
    winsor: str = "5-95"
    measure: str = "amihud"
    activeness_window: int = 12
    nw_lags: int | str = "auto"
    alpha_timing: str = "out_of_sample"
    workers: int = 1
    seed: int = 0
    universe: dict = field(default_factory=dict)  # UniverseConfig overrides for simulate

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        raw = {}
        if path:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            try:
                raw = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON ({exc})") from None
            known = {f.name for f in fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise ConfigError(f"{p}: unknown keys {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)

    def input_path(self, name: str) -> Path:
        return Path(self.paths.get(name, Path(self.data) / INPUT_FILES[name]))

    def validate(self, command: str) -> None:
        if self.winsor not in WINSOR_PRESETS and self.winsor != "none":
            raise ConfigError(f"winsor must be one of {sorted(WINSOR_PRESETS)} or 'none'")
        if self.measure not in ("amihud", "ps"):
            raise ConfigError("measure must be 'amihud' or 'ps'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.min_months < 1:
            raise ConfigError("min_months must be >= 1")
        for label, v in (("start", self.start), ("end", self.end)):
            if v is not None and not re.fullmatch(r"\d{4}-(0[1-9]|1[0-2])", str(v)):
                raise ConfigError(f"{label} must be YYYY-MM, got {v!r}")
        if self.start and self.end and pd.Period(self.start, freq="M") > pd.Period(self.end, freq="M"):
            raise ConfigError(f"start {self.start} is after end {self.end}")
        for name in NEEDS[command]:
            p = self.input_path(name)
            if not p.is_file():
                raise FileNotFoundError(f"input file not found: {p}")

    def study(self) -> StudyConfig:
        return StudyConfig(
            winsor=None if self.winsor == "none" else WINSOR_PRESETS[self.winsor],
            measure=self.measure,
            activeness_window=self.activeness_window,
            alpha_timing=self.alpha_timing,
            start=self.start,
            end=self.end,
            min_months=self.min_months,
            nw_lags=self.nw_lags,
        )

    def digest(self) -> str:
        d = asdict(self)
        # where outputs go and how many threads run do not change results
        for k in ("out", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit(path, digest: str, note: str = "") -> None:
    print(f"wrote {path} sha256={digest[:16]}{' ' + note if note else ''}")


def _load_inputs(cfg: RunConfig, names) -> dict:
    readers = {
        "stock_bars": dm.ingest_stock_bars,
        "holdings": dm.ingest_holdings,
        "fund_series": dm.ingest_fund_series,
        "factors": dm.ingest_factors,
    }
    out = {}
    for name in names:
        if name == "market_daily":
            continue
        out[name] = readers[name](cfg.input_path(name))
    if "market_daily" in names:
        days = None
        if "stock_bars" in out:
            days = pd.DatetimeIndex(sorted(out["stock_bars"]["date"].unique()))
        out["market_daily"] = dm.ingest_market_daily(cfg.input_path("market_daily"), trading_days=days)
    return out


def _panel(cfg: RunConfig) -> PanelDataset:
    raw = _load_inputs(cfg, INPUT_FILES)
    funds = dm.apply_sample_filter(raw["fund_series"], cfg.min_months)
    sl = stock_month_liquidity(raw["stock_bars"], raw["market_daily"], workers=cfg.workers)
    fm = fund_month_inputs(raw["holdings"], sl)
    prov = {"inputs": {name: _sha(cfg.input_path(name)) for name in INPUT_FILES}}
    panel = build_panel(funds, raw["factors"], fm, cfg.study(), provenance=prov)
    panel.provenance["config_digest"] = cfg.digest()
    return panel


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    raw = _load_inputs(cfg, INPUT_FILES)
    report = {name: {"path": str(cfg.input_path(name)), "rows": int(len(df)), "sha256": _sha(cfg.input_path(name))}
              for name, df in raw.items()}
    fs = raw["fund_series"]
    kept = dm.apply_sample_filter(fs, cfg.min_months)
    report["sample_filter"] = {
        "min_months": cfg.min_months,
        "funds_in": int(fs["fund_id"].nunique()),
        "funds_kept": int(kept["fund_id"].nunique()),
    }
    report["config_digest"] = cfg.digest()
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    path = Path(cfg.out) / "ingest_report.json"
    dm.atomic_write_text(path, text)
    for name in INPUT_FILES:
        print(f"ok {name} rows={report[name]['rows']}")
    _emit(path, hashlib.sha256(text.encode()).hexdigest())
    return 0


def cmd_liquidity(cfg: RunConfig) -> int:
    raw = _load_inputs(cfg, NEEDS["liquidity"])
    sl = stock_month_liquidity(raw["stock_bars"], raw["market_daily"], workers=cfg.workers)
    fm = fund_month_inputs(raw["holdings"], sl)
    sl = sl[[c for c in ("stock_id", "month", "illiq_amihud", "gamma", "n_days") if c in sl.columns]]
    fm = fm[[c for c in ("fund_id", "month", "illiq_amihud", "illiq_ps", "coverage") if c in fm.columns]]
    out = Path(cfg.out)
    for name, frame in (("stock_month_liquidity.csv", sl), ("fund_month_illiq.csv", fm)):
        p = dm.write_csv(frame, out / name)
        _emit(p, _sha(p), f"rows={len(frame)}")
    return 0


def cmd_flows(cfg: RunConfig) -> int:
    raw = _load_inputs(cfg, NEEDS["flows"])
    cfg_s = cfg.study()
    fm = fund_month_inputs(raw["holdings"], pd.DataFrame(columns=["stock_id", "month", "illiq_amihud", "gamma"]))
    panel = build_panel(raw["fund_series"], _empty_factors(), fm, StudyConfig(**{**asdict(cfg_s), "winsor": None, "compute_alphas": False}))
    cols = ["fund_id", "month", "flow", "flow_q0", "flow_q1", "cash_pct", "dcash_level_6m", "dcash_prop_6m"]
    export = panel.rows[cols].rename(columns={"flow": "flow_1m"})
    p = dm.write_csv(export, Path(cfg.out) / "fund_flows.csv")
    _emit(p, _sha(p), f"rows={len(panel.rows)}")
    return 0


def _empty_factors() -> pd.DataFrame:
    return pd.DataFrame({c: pd.Series(dtype=float) for c in dm.FACTORS_COLUMNS}).astype({"month": "period[M]"})


def cmd_regress(cfg: RunConfig, spec: str) -> int:
    panel = _panel(cfg)
    study = cfg.study()
    if spec == "table4":
        tables = compute_tables(panel, ("table4",), workers=cfg.workers, config=study)
    else:
        run = {"eq4": lambda r: run_eq4(r, study.cash_flow_lags), "eq5": lambda r: run_eq5(r, study.cash_flow_lags),
               "eq6": lambda r: run_eq6(r, study.illiq_flow_lags), "eq7": run_eq7}[spec]
        fit = run(panel.rows)
        meta = {
            "table": f"regress_{spec}",
            "config_digest": panel.provenance["config_digest"],
            "inputs": panel.provenance["inputs"],
            "panel_rows": int(len(panel.rows)),
            "fits": {spec: fit_diagnostics(fit)},
        }
        tables = {f"regress_{spec}": (fits_table({spec: fit}), meta)}
    for path, digest in write_tables(tables, cfg.out):
        _emit(path, digest)
    return 0


def cmd_sort(cfg: RunConfig) -> int:
    panel = _panel(cfg)
    for path, digest in write_tables(compute_tables(panel, ("table3",), workers=cfg.workers, config=cfg.study()), cfg.out):
        _emit(path, digest)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    panel = _panel(cfg)
    for path, digest in write_tables(compute_tables(panel, workers=cfg.workers, config=cfg.study()), cfg.out):
        _emit(path, digest)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    ucfg = UniverseConfig.from_dict({**cfg.universe, "seed": cfg.seed})
    for path, digest in write_universe(generate_universe(ucfg), cfg.out):
        _emit(path, digest)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON run configuration")
    p.add_argument("--data", default=S, help="directory holding the input CSVs")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--workers", type=int, default=S, help="worker threads (results do not depend on it)")
    p.add_argument("--seed", type=int, default=S, help="seed for simulate")
    p.add_argument("--measure", choices=("amihud", "ps"), default=S)
    p.add_argument("--winsor", choices=(*WINSOR_PRESETS, "none"), default=S)
    p.add_argument("--start", default=S, help="first sample month, YYYY-MM")
    p.add_argument("--end", default=S, help="last sample month, YYYY-MM")
    p.add_argument("--min-months", dest="min_months", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fundliq", description=__doc__.splitlines()[0])
    _common(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("ingest", "validate the input files"),
        ("liquidity", "stock- and fund-level illiquidity"),
        ("flows", "flows and cash changes"),
        ("sort", "quintile sorts on liquidity activeness (table3)"),
        ("simulate", "write a synthetic universe"),
        ("report", "all tables"),
    ):
        _common(sub.add_parser(name, help=helptext))
    reg = sub.add_parser("regress", help="one regression specification")
    reg.add_argument("spec", choices=("eq4", "eq5", "eq6", "eq7", "table4"))
    _common(reg)
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    spec = args.pop("spec", None)
    config_path = args.pop("config", None)
    try:
        cfg = RunConfig.load(config_path, args)
        cfg.validate(command)
        if command == "regress":
            return cmd_regress(cfg, spec)
        return {
            "ingest": cmd_ingest,
            "liquidity": cmd_liquidity,
            "flows": cmd_flows,
            "sort": cmd_sort,
            "simulate": cmd_simulate,
            "report": cmd_report,
        }[command](cfg)
    except (dm.DataValidationError, FileNotFoundError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
