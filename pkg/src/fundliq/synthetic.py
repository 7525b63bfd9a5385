"""Synthetic fund universes with planted parameters, plus brute-force oracles.

Randomness: every entity draws from its own numpy ``PCG64`` stream (128-bit
state), created as ``SeedSequence(seed, spawn_key=(kind, index))``.  Kind 0
is the market (factors, month effects, daily index), kind 1 a fund, kind 2
a stock.  Adding funds or stocks leaves existing entities' draws unchanged.

Planted models (all exact, so OLS on the generated panel recovers them up
to sampling noise):

* fund illiquidity ``L_t = mu_i + sum_k phi_k f_{t-k} + s_i e_t`` (k = 0..2),
  so the three-month change loads on flows with (phi0, phi1, phi2, -phi0);
* cash, selected by ``cash_model``:

  - ``"lags"``: (C_t - C_{t-6}) / A_{t-6} = sum_k b_k f_{t-k} + a_i + m_t + e
  - ``"proportion"``: c_t - c_{t-6} = sum_k b_k f_{t-k} + a_i + m_t + e
  - ``"interaction"``: (C_t - C_{t-6}) / A_{t-6} on quarterly flows, their
    products with standardised L_{t-6}, and L_{t-6} itself

  where C is the cash amount, c = C / A the cash share and A is TNA;
* gross return ``rf + beta'F + alpha_i + premium * act_t + u``, with act_t the
  trailing 12-month SD of L, and expense ratio ``base_i + kappa * act_t``.

Cash cannot go negative: cash is affine in the fund constant a_i, which is
raised just enough to keep every six-month chain non-negative.  Fund fixed
effects absorb a_i, so the planted slopes are untouched.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
import pandas as pd

from .data import CASH_CODES, atomic_write_text, to_csv_text
from .econometrics import RegressionFit, cluster_cov, fe_regress, newey_west_cov, white_cov

MARKET, FUND, STOCK = 0, 1, 2
CASH_MODELS = ("lags", "proportion", "interaction")
FACTOR_NAMES = ("mkt_excess", "smb", "hml", "wml")
ILLIQ_LAGS = 3  # L responds to flows at lags 0..2


@dataclass(frozen=True)
class UniverseConfig:
    """Parameters of a synthetic universe.  Fractions per month unless noted."""

    seed: int = 0
    n_funds: int = 200
    n_months: int = 60
    n_stocks: int = 120
    start: str = "2011-01"

    # cash
    cash_model: str = "lags"
    flow_to_cash_betas: tuple = (0.32, 0.24, 0.29, 0.15, 0.01, -0.19)
    flow_to_cash_prop_betas: tuple = (0.13, 0.01, 0.03, 0.00, -0.03, -0.09)
    # flow_q0, flow_q0*z, flow_q1, flow_q1*z, z
    interaction_betas: tuple = (0.16, 0.13, 0.05, -0.04, 0.01)
    cash_mean: float = 0.0311
    cash_dispersion: float = 0.015
    cash_noise: float = 0.0015
    month_effect_sd: float = 0.002

    # flows
    flow_mean: float = 0.007
    flow_sd: float = 0.01
    # investors offset the idiosyncratic return, so TNA (and size) carries no
    # month-t return shock; flows stay exogenous to every planted model
    flow_offsets_idio: bool = True

    # illiquidity (Amihud units per INR crore)
    illiq_median: float = 0.0079
    illiq_log_sd: float = 0.8
    illiq_noise_ratio: tuple = (0.12, 0.38)  # s_i / mu_i drawn uniform in this range
    dilliq_phi: tuple = (-0.02, -0.008, -0.002)
    illiq_noise_clip: float = 2.5
    illiq_floor: float = 0.002  # lower bound on a fund's mean illiquidity draw
    illiq_min: float = 0.0005  # mu_i is lifted so L never falls below this

    # returns and fees
    activeness_premium: float = 0.9
    expense_activeness: float = 30.0  # % p.a. per unit of activeness
    expense_base: float = 2.05
    expense_illiq_slope: float = 25.0  # % p.a. per unit of mean illiquidity
    expense_sd: float = 0.25
    expense_noise: float = 0.02
    alpha_mean: float = 0.0007
    alpha_sd: float = 0.0002
    idio_sd: float = 0.005
    beta_mean: tuple = (0.95, 0.1, 0.0, 0.0)  # mkt, smb, hml, wml loadings
    beta_sd: float = 0.02
    rf: float = 0.005
    turnover_median: float = 56.0

    # stocks
    basket_size: int = 5
    stock_illiq_range: tuple = (5e-5, 0.3)

    def __post_init__(self):
        if self.cash_model not in CASH_MODELS:
            raise ValueError(f"cash_model must be one of {CASH_MODELS}")
        if min(self.n_funds, self.n_stocks) < 1 or self.n_months < 13:
            raise ValueError("need at least one fund and stock and 13 months")
        if len(self.flow_to_cash_betas) != 6 or len(self.flow_to_cash_prop_betas) != 6:
            raise ValueError("cash responses need six flow lags")
        if len(self.interaction_betas) != 5 or len(self.dilliq_phi) != ILLIQ_LAGS:
            raise ValueError("bad interaction or dilliq parameter length")
        for name in ("cash_dispersion", "cash_noise", "month_effect_sd", "flow_sd", "illiq_log_sd",
                     "expense_sd", "expense_noise", "alpha_sd", "idio_sd", "beta_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        lo, hi = self.illiq_noise_ratio
        if not 0 <= lo <= hi or hi * self.illiq_noise_clip >= 1:
            raise ValueError("illiq_noise_ratio * illiq_noise_clip must stay below one")
        if self.n_stocks < 2 * self.basket_size:
            raise ValueError("n_stocks must allow a liquid and an illiquid basket")

    @property
    def flow_to_cash_beta(self) -> float:
        return self.flow_to_cash_betas[0]

    def planted(self) -> dict:
        """Ground-truth coefficients, keyed like the pipeline's regressors."""
        lags = ["flow"] + [f"flow_lag{k}" for k in range(1, 6)]
        out = {}
        if self.cash_model == "lags":
            out["eq4"] = dict(zip(lags, self.flow_to_cash_betas))
        elif self.cash_model == "proportion":
            out["eq5"] = dict(zip(lags, self.flow_to_cash_prop_betas))
        else:
            names = ["flow_q0", "flow_q0_x_illiq", "flow_q1", "flow_q1_x_illiq", "illiq_z"]
            out["eq7"] = dict(zip(names, self.interaction_betas))
        p0, p1, p2 = self.dilliq_phi
        out["eq6"] = dict(zip(lags[:4], (p0, p1, p2, -p0)))
        out["table4"] = {
            "ret_gross": self.activeness_premium,
            "ret_net": self.activeness_premium - self.expense_activeness / 1200.0,
        }
        return out

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "UniverseConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown universe config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    @classmethod
    def from_json(cls, text: str) -> "UniverseConfig":
        return cls.from_dict(json.loads(text))

    def replace(self, **kw) -> "UniverseConfig":
        return UniverseConfig.from_dict({**self.to_dict(), **kw})


def rng_for(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(kind, index))))


def trailing_sd_matrix(L: np.ndarray, window: int = 12, min_obs: int = 10) -> np.ndarray:
    """Row-wise SD of L over columns [t-window, t-1]; NaN with < min_obs values."""
    n, T = L.shape
    out = np.full((n, T), np.nan)
    for t in range(min_obs, T):
        w = L[:, max(0, t - window):t]
        out[:, t] = w.std(axis=1, ddof=1)
    return out


@dataclass
class FundPanel:
    """Fund-level synthetic data, ready for :func:`fundliq.study.build_panel`."""

    config: UniverseConfig
    fund_series: pd.DataFrame
    factors: pd.DataFrame
    fund_month: pd.DataFrame
    arrays: dict = field(repr=False, default_factory=dict)
    manifest: dict = field(default_factory=dict)


def _cash_chain(y0: np.ndarray, ratio: np.ndarray | None, start: np.ndarray, a_target: np.ndarray, floor: float = 0.0):
    """Solve c_t = (c_{t-6} + y0_t + a_i) * ratio_t forward from the starts c_0..c_5.

    ``ratio`` is A_{t-6} / A_t (level model) or None (share model); arrays are
    (n_funds, T).  ``a_i`` is the fund constant: ``a_target`` unless a larger
    value is needed to keep every c_t >= floor.  c is affine in a_i, so the
    smallest sufficient constant has a closed form.  Returns (c, a, n_raised).
    """
    n, T = y0.shape

    def run(y, s):
        c = np.empty((n, T))
        c[:, :6] = s
        for t in range(6, T):
            if ratio is None:
                c[:, t] = c[:, t - 6] + y[:, t]
            else:
                c[:, t] = (c[:, t - 6] + y[:, t]) * ratio[:, t]
        return c

    base = run(y0, start)
    unit = run(np.ones((n, T)), np.zeros((n, 6)))  # response to a unit constant
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(unit[:, 6:] > 0, (floor - base[:, 6:]) / unit[:, 6:], -np.inf).max(axis=1)
    a = np.maximum(a_target, need)
    raised = int((a > a_target).sum())
    c = run(y0 + a[:, None], start)
    c = np.maximum(c, 0.0)  # only rounding-level negatives can remain
    return c, a, raised


def generate_fund_panel(config: UniverseConfig = UniverseConfig()) -> FundPanel:
    """Fund-level universe: fund series, factors and fund-month cash/illiquidity.

    This is the fast path used for Monte Carlo work; :func:`generate_universe`
    builds the same funds and realises them as daily stock bars and holdings.
    """
    cfg = config
    n, T = cfg.n_funds, cfg.n_months
    pre = 6  # pre-sample flow draws feeding lags of the first months
    months = pd.period_range(cfg.start, periods=T, freq="M")

    mrng = rng_for(cfg.seed, MARKET)
    F = np.column_stack([
        mrng.normal(0.008, 0.05, T),
        mrng.normal(0.002, 0.03, T),
        mrng.normal(0.002, 0.03, T),
        mrng.normal(0.008, 0.04, T),
    ])
    rf = np.full(T, cfg.rf)
    m_eff = mrng.normal(0.0, 1.0, T) * cfg.month_effect_sd

    flows = np.empty((n, T + pre))
    eps_L = np.empty((n, T))
    e_cash = np.empty((n, T))
    idio = np.empty((n, T))
    exp_noise = np.empty((n, T))
    turnover = np.empty((n, T))
    mu = np.empty(n)
    ratio = np.empty(n)
    betas = np.empty((n, 4))
    alpha = np.empty(n)
    tna0 = np.empty(n)
    age0 = np.empty(n, dtype=int)
    exp_base = np.empty(n)
    cash_target = np.empty(n)
    cash_start = np.empty((n, 6))
    cash_sig = math.sqrt(math.log1p((cfg.cash_dispersion / cfg.cash_mean) ** 2)) if cfg.cash_mean > 0 else 0.0
    for i in range(n):
        r = rng_for(cfg.seed, FUND, i)
        flows[i] = cfg.flow_mean + cfg.flow_sd * r.standard_normal(T + pre)
        eps_L[i] = np.clip(r.standard_normal(T), -cfg.illiq_noise_clip, cfg.illiq_noise_clip)
        e_cash[i] = r.standard_normal(T) * cfg.cash_noise
        idio[i] = r.standard_normal(T) * cfg.idio_sd
        exp_noise[i] = r.standard_normal(T) * cfg.expense_noise
        turnover[i] = cfg.turnover_median * np.exp(0.6 * r.standard_normal(T))
        mu[i] = max(cfg.illiq_median * math.exp(cfg.illiq_log_sd * r.standard_normal()), cfg.illiq_floor)
        ratio[i] = r.uniform(*cfg.illiq_noise_ratio)
        betas[i] = r.normal(cfg.beta_mean, cfg.beta_sd)
        alpha[i] = r.normal(cfg.alpha_mean, cfg.alpha_sd)
        tna0[i] = 67e9 * math.exp(1.3 * r.standard_normal())
        age0[i] = int(r.integers(12, 240))
        exp_base[i] = cfg.expense_base + r.normal(0.0, cfg.expense_sd)
        cash_target[i] = cfg.cash_mean * math.exp(cash_sig * r.standard_normal() - 0.5 * cash_sig**2)
        cash_start[i] = cash_target[i] * (1.0 + 0.1 * r.standard_normal(6))

    if cfg.flow_offsets_idio:
        flows[:, pre:] -= idio
    f = flows[:, pre:]  # f[:, t] is the flow of month t (month 0 is never observed)
    s_i = ratio * mu

    # illiquidity
    phi = np.asarray(cfg.dilliq_phi)
    L = mu[:, None] + s_i[:, None] * eps_L
    for k in range(ILLIQ_LAGS):
        L = L + phi[k] * flows[:, pre - k: pre - k + T]
    # mu_i cancels from changes and SDs, so lifting it keeps every model exact
    lift = np.maximum(0.0, cfg.illiq_min - L.min(axis=1))
    mu = mu + lift
    L = L + lift[:, None]
    act = trailing_sd_matrix(L)
    act_fill = np.where(np.isnan(act), s_i[:, None], act)

    # fees and returns
    expense = np.clip(exp_base[:, None] + cfg.expense_illiq_slope * mu[:, None], 0.5, None) + cfg.expense_activeness * act_fill + exp_noise
    expense = np.clip(expense, 0.0, None)
    gross = rf[None, :] + betas @ F.T + alpha[:, None] + cfg.activeness_premium * act_fill + idio
    net = gross - expense / 1200.0
    nav = np.empty((n, T))
    tna = np.empty((n, T))
    nav[:, 0] = 10.0
    tna[:, 0] = tna0
    for t in range(1, T):
        nav[:, t] = nav[:, t - 1] * (1.0 + net[:, t])
        tna[:, t] = tna[:, t - 1] * (1.0 + net[:, t]) + f[:, t] * tna[:, t - 1]
    if (tna <= 0).any():
        raise ValueError("generated TNA went non-positive; lower flow_sd")

    # cash
    def lagged(x, k):
        out = np.full_like(x, np.nan)
        out[:, k:] = x[:, :-k] if k else x
        return out

    ratio6 = np.ones((n, T))
    ratio6[:, 6:] = tna[:, :-6] / tna[:, 6:]
    z_stats = None
    if cfg.cash_model in ("lags", "proportion"):
        b = cfg.flow_to_cash_betas if cfg.cash_model == "lags" else cfg.flow_to_cash_prop_betas
        signal = sum(b[k] * flows[:, pre - k: pre - k + T] for k in range(6))
    else:
        growth3 = np.ones((n, T))
        q0 = np.full((n, T), np.nan)
        for t in range(3, T):
            growth3[:, t] = (1 + net[:, t]) * (1 + net[:, t - 1]) * (1 + net[:, t - 2])
            q0[:, t] = (tna[:, t] - tna[:, t - 3] * growth3[:, t]) / tna[:, t - 3]
        q1 = lagged(q0, 3)
        Llag = lagged(L, 6)
        sample = Llag[:, 6:]
        z_mu, z_sd = sample.mean(), sample.std(ddof=1)
        z_stats = (float(z_mu), float(z_sd))
        z = (Llag - z_mu) / z_sd
        b0, b1, b2, b3, bz = cfg.interaction_betas
        signal = b0 * q0 + b1 * q0 * z + b2 * q1 + b3 * q1 * z + bz * z
        signal = np.nan_to_num(signal)  # months < 6 are chain starts, never used
    base = signal + m_eff[None, :] + e_cash
    if cfg.cash_model == "proportion":
        drift = 0.0
    else:
        # keep each fund's cash share near its target despite TNA growth
        drift = cash_target[:, None] * (1.0 / ratio6[:, 6:].mean(axis=1, keepdims=True) - 1.0)
    a_target = (drift - base[:, 6:].mean(axis=1, keepdims=True))[:, 0]
    cash, a_i, raised = _cash_chain(base, None if cfg.cash_model == "proportion" else ratio6, cash_start, a_target)
    if (cash >= 0.5).any():
        raise ValueError("generated cash share exceeds 50% of TNA; lower flow_sd or cash_noise")

    fund_ids = np.array([f"F{i:04d}" for i in range(n)])
    fid = np.repeat(fund_ids, T)
    mon = pd.PeriodIndex(np.tile(months, n), freq="M")
    fund_series = pd.DataFrame({
        "fund_id": fid,
        "month": mon,
        "nav": nav.ravel(),
        "tna": tna.ravel(),
        "expense_ratio": expense.ravel(),
        "turnover": turnover.ravel(),
        "age_months": (age0[:, None] + np.arange(T)[None, :]).ravel().astype(float),
    })
    factors = pd.DataFrame({"month": months, **{k: F[:, j] for j, k in enumerate(FACTOR_NAMES)}, "rf": rf})
    fund_month = pd.DataFrame({
        "fund_id": fid,
        "month": mon,
        "cash_pct": 100.0 * cash.ravel(),
        "illiq_amihud": L.ravel(),
        "illiq_ps": np.nan,
    })
    arrays = {"L": L, "cash": cash, "flows": f, "tna": tna, "nav": nav, "net": net, "gross": gross,
              "activeness": act, "expense": expense, "mu": mu, "s": s_i, "betas": betas, "F": F}
    manifest = {
        "seed": cfg.seed,
        "prng": "numpy PCG64 (128-bit state), SeedSequence(seed, spawn_key=(kind, index))",
        "cash_model": cfg.cash_model,
        "planted": cfg.planted(),
        "cash_constants_raised": raised,
        "interaction_z": z_stats,
        "n_funds": n,
        "n_months": T,
    }
    return FundPanel(cfg, fund_series, factors, fund_month, arrays, manifest)


@dataclass
class Universe:
    """Raw synthetic inputs in the flat-file layouts, plus the fund-level truth."""

    config: UniverseConfig
    stock_bars: pd.DataFrame
    holdings: pd.DataFrame
    fund_series: pd.DataFrame
    factors: pd.DataFrame
    market_daily: pd.DataFrame
    manifest: dict
    funds: FundPanel = field(repr=False, default=None)


def generate_universe(config: UniverseConfig = UniverseConfig()) -> Universe:
    """Full universe: daily stock bars, holdings snapshots, fund series, factors.

    Every fund holds an equal-weighted liquid basket and an illiquid basket
    of ``basket_size`` stocks; the split between them is set each month so
    the value-weighted Amihud score of the equity book equals the planted L.
    Stock Amihud is constant per stock: daily volume is |r| / (l_s * u_d)
    with u normalised to mean one within each stock-month.  Volumes are in
    INR crore.
    """
    cfg = config
    fp = generate_fund_panel(cfg)
    n, T = cfg.n_funds, cfg.n_months
    months = pd.period_range(cfg.start, periods=T, freq="M")
    days = pd.bdate_range(months[0].start_time, months[-1].end_time.normalize())
    day_month = days.to_period("M")
    D = len(days)

    mrng = rng_for(cfg.seed, MARKET, 1)
    mkt = mrng.normal(0.0004, 0.01, D)

    lo, hi = cfg.stock_illiq_range
    ell = np.empty(cfg.n_stocks)
    bars = []
    month_codes = np.searchsorted(months.asi8, day_month.asi8)
    stock_ids = np.array([f"S{j:04d}" for j in range(cfg.n_stocks)])
    for j in range(cfg.n_stocks):
        r = rng_for(cfg.seed, STOCK, j)
        ell[j] = math.exp(r.uniform(math.log(lo), math.log(hi)))
        beta = r.normal(1.0, 0.3)
        sd = r.uniform(0.012, 0.03)
        ret = beta * mkt + sd * r.standard_normal(D)
        ret = np.where(ret == 0.0, 1e-6, np.clip(ret, -0.5, None))
        u = np.exp(0.5 * r.standard_normal(D))
        u = u / (np.bincount(month_codes, weights=u) / np.bincount(month_codes))[month_codes]
        bars.append(pd.DataFrame({"stock_id": stock_ids[j], "date": days, "ret": ret, "dvol": np.abs(ret) / (ell[j] * u)}))
    stock_bars = pd.concat(bars, ignore_index=True)
    market_daily = pd.DataFrame({"date": days, "mkt_ret": mkt})

    # stocks' realised monthly Amihud, for exact basket averages
    codes = np.tile(month_codes, cfg.n_stocks)
    sid_idx = np.repeat(np.arange(cfg.n_stocks), D)
    ratio_sd = stock_bars["ret"].abs().to_numpy() / stock_bars["dvol"].to_numpy()
    key = sid_idx * T + codes
    realised = (np.bincount(key, weights=ratio_sd, minlength=cfg.n_stocks * T)
                / np.bincount(key, minlength=cfg.n_stocks * T)).reshape(cfg.n_stocks, T)

    order = np.argsort(ell, kind="stable")
    liquid_pool = order[ell[order] <= 0.4 * cfg.illiq_min]
    if len(liquid_pool) < cfg.basket_size:
        liquid_pool = order[: cfg.basket_size]
    L = fp.arrays["L"]
    cash = fp.arrays["cash"]
    k = cfg.basket_size
    clamped = 0
    rows_f, rows_m, rows_s, rows_w = [], [], [], []
    fund_ids = np.array([f"F{i:04d}" for i in range(n)])
    for i in range(n):
        r = rng_for(cfg.seed, FUND, 10_000_000 + i)
        liq = np.sort(r.choice(liquid_pool, k, replace=False))
        above = order[ell[order] >= 1.25 * L[i].max()]
        ill = np.sort(r.choice(above, k, replace=False)) if len(above) >= k else np.sort(order[-k:])
        shares = r.dirichlet([6.0, 1.0, 1.0, 1.0, 0.5])
        lo_b = realised[liq].mean(axis=0)
        hi_b = realised[ill].mean(axis=0)
        target = L[i]
        pi = (target - lo_b) / (hi_b - lo_b)
        bad = (pi < 0) | (pi > 1)
        clamped += int(bad.sum())
        pi = np.clip(pi, 0.0, 1.0)
        eq = 1.0 - cash[i]
        w_liq = eq * (1.0 - pi) / k
        w_ill = eq * pi / k
        for t in range(T):
            rows_f.append(np.repeat(fund_ids[i], 2 * k + 5))
            rows_m.append(np.repeat(t, 2 * k + 5))
            rows_s.append(np.concatenate([stock_ids[liq], stock_ids[ill], CASH_CODES]))
            rows_w.append(np.concatenate([np.full(k, w_liq[t]), np.full(k, w_ill[t]), cash[i, t] * shares]))
    holdings = pd.DataFrame({
        "fund_id": np.concatenate(rows_f),
        "month": months[np.concatenate(rows_m)],
        "stock_id": np.concatenate(rows_s),
        "weight": np.concatenate(rows_w),
    })
    manifest = dict(fp.manifest)
    manifest.update({
        "n_stocks": cfg.n_stocks,
        "n_trading_days": D,
        "illiq_targets_clamped": clamped,
        "dvol_unit": "INR crore",
    })
    return Universe(cfg, stock_bars, holdings, fp.fund_series, fp.factors, market_daily, manifest, fp)


UNIVERSE_FILES = {
    "stock_bars": "stock_bars.csv",
    "holdings": "holdings.csv",
    "fund_series": "fund_series.csv",
    "factors": "factors.csv",
    "market_daily": "market_daily.csv",
}


def write_universe(universe: Universe, outdir) -> list[tuple[str, str]]:
    """Write the five input CSVs, ``manifest.json`` and ``universe_config.json``.

    Returns (path, sha256) pairs in write order.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    digests = {}
    for attr, fname in UNIVERSE_FILES.items():
        text = to_csv_text(getattr(universe, attr))
        atomic_write_text(outdir / fname, text)
        digests[fname] = hashlib.sha256(text.encode()).hexdigest()
        written.append((str(outdir / fname), digests[fname]))
    manifest = {**universe.manifest, "files": digests, "config": universe.config.to_dict()}
    for fname, text in (
        ("manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n"),
        ("universe_config.json", universe.config.to_json()),
    ):
        atomic_write_text(outdir / fname, text)
        written.append((str(outdir / fname), hashlib.sha256(text.encode()).hexdigest()))
    return written


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

ORACLE_MAX_ROWS = 5000


def dummy_fe_ols_oracle(
    panel: pd.DataFrame,
    y_col: str,
    x_cols: Sequence[str],
    fe_dims: Sequence[str] = ("fund_id", "month"),
    cluster_dim: str | None = "month",
    max_rows: int = ORACLE_MAX_ROWS,
) -> RegressionFit:
    """Fixed effects by explicit one-hot columns and a dense least-squares solve.

    Independent of :func:`fundliq.econometrics.fe_regress`: no demeaning,
    just an intercept, one dummy per level beyond the first in each
    dimension, and ``numpy.linalg.lstsq``.  Guarded to ``max_rows``.
    """
    x_cols = list(x_cols)
    d = panel.loc[panel[[y_col, *x_cols]].notna().all(axis=1)]
    if len(d) > max_rows:
        raise MemoryError(f"oracle limited to {max_rows} rows, got {len(d)}")
    blocks = [np.ones((len(d), 1))]
    for dim in fe_dims:
        dummies = pd.get_dummies(d[dim].astype(str), drop_first=True, dtype=float)
        blocks.append(dummies.to_numpy())
    Z = np.hstack(blocks)
    X = d[x_cols].to_numpy(float)
    W = np.hstack([X, Z])
    y = d[y_col].to_numpy(float)
    coef, _, rank, _ = np.linalg.lstsq(W, y, rcond=None)
    k = len(x_cols)
    resid = y - W @ coef
    # slopes' covariance from the partialled design, for comparability
    Zc, *_ = np.linalg.lstsq(Z, X, rcond=None)
    Xt = X - Z @ Zc
    if cluster_dim is not None:
        cov, G = cluster_cov(Xt, resid, d[cluster_dim].to_numpy(), n_slopes=k)
        cov_type = "clustered"
    else:
        cov = white_cov(Xt, resid)
        G, cov_type = None, "HC0"
    return RegressionFit(
        names=x_cols, coef=coef[:k], cov=cov, cov_type=cov_type, n_obs=len(d), residuals=resid,
        design=Xt, df_resid=len(d) - int(rank), n_clusters=G, absorbed_dims=list(fe_dims),
    )


def random_panel(
    rng: np.random.Generator, n_funds: int = 10, n_months: int = 12, k: int = 2, drop: float = 0.0, loading: float = 0.5
) -> pd.DataFrame:
    """Random two-way panel with fund and month effects; ``drop`` deletes that share of rows.

    ``loading`` sets how strongly the regressors co-move with the effects;
    large values slow down alternating projections on unbalanced panels.
    """
    fund = np.repeat([f"F{i:03d}" for i in range(n_funds)], n_months)
    month = np.tile(pd.period_range("2015-01", periods=n_months, freq="M"), n_funds)
    a = rng.normal(size=n_funds).repeat(n_months)
    m = np.tile(rng.normal(size=n_months), n_funds)
    X = rng.normal(size=(n_funds * n_months, k)) + loading * (a[:, None] + m[:, None])
    y = X @ rng.normal(size=k) + a + m + rng.normal(size=len(a))
    d = pd.DataFrame({"fund_id": fund, "month": month, "y": y, **{f"x{j}": X[:, j] for j in range(k)}})
    if drop > 0:
        d = d.loc[rng.random(len(d)) >= drop].reset_index(drop=True)
    return d


class CheckResult(NamedTuple):
    name: str
    passed: bool
    max_error: float
    detail: str = ""


def _check_amihud_homogeneity(rng, **_):
    from .liquidity import amihud_stock_month

    days = pd.bdate_range("2015-01-01", "2015-01-31")
    bars = pd.DataFrame({"stock_id": "S", "date": days, "ret": rng.normal(0, 0.02, len(days)),
                         "dvol": rng.uniform(1, 10, len(days))})
    base = amihud_stock_month(bars).illiq_amihud
    err = 0.0
    for k in (2.0, 0.5, 4.0):
        scaled = amihud_stock_month(bars.assign(dvol=bars["dvol"] * k)).illiq_amihud
        err = max(err, abs(scaled - base / k))
    return err == 0.0, err, "Illiq(k*dvol) == Illiq/k for powers of two"


def _check_flow_identity(rng, **_):
    from .flows import monthly_flow

    tna = rng.uniform(1e6, 1e11, 500)
    r = rng.normal(0.01, 0.05, 500)
    err = float(np.abs(monthly_flow(tna * (1 + r), tna, r)).max())
    return err == 0.0, err, "no flow when TNA grows by the return alone"


def _check_nw_white(rng, **_):
    X = np.column_stack([np.ones(80), rng.normal(size=(80, 2))])
    u = rng.normal(size=80)
    err = float(np.abs(newey_west_cov(X, u, 0) - white_cov(X, u)).max())
    return err <= 1e-12, err, "Newey-West with zero lags equals White"


def _check_winsor_idempotent(rng, **_):
    from .econometrics import winsorize

    v = rng.standard_t(2, 300)
    once = winsorize(v)
    err = float(np.abs(winsorize(once) - once).max())
    return err == 0.0, err, "winsorising twice changes nothing"


def _check_rolling_alpha(rng, **_):
    from .econometrics import rolling_alpha_matrix

    F = rng.normal(0, 0.04, (80, 4))
    y = F @ np.array([1.0, 0.3, -0.2, 0.1])
    a = rolling_alpha_matrix(y[:, None], F, 36)
    err = float(np.nanmax(np.abs(a)))
    return err <= 1e-10, err, "exact factor replication has zero alpha"


def _check_within_dummy(rng, within_tol: float = 1e-10, **_):
    err = 0.0
    for drop in (0.0, 0.5):
        d = random_panel(rng, 12, 15, 2, drop=drop, loading=3.0)
        a = fe_regress(d, "y", ["x0", "x1"], tol=within_tol).coef
        b = dummy_fe_ols_oracle(d, "y", ["x0", "x1"]).coef
        err = max(err, float(np.abs(a - b).max()))
    return err <= 1e-8, err, "within-transform slopes match the dummy-variable oracle"


def _check_sort_partition(rng, **_):
    from .study import assign_quintiles

    worst = 0
    for n in (10, 11, 37, 64):
        q = assign_quintiles(rng.normal(size=n), np.array([f"F{i:03d}" for i in range(n)]))
        counts = np.bincount(q, minlength=6)[1:]
        worst = max(worst, int(counts.max() - counts.min()), int(abs(counts.sum() - n)))
    return worst <= 1, float(worst), "quintile sizes differ by at most one"


def _check_activeness_alternating(rng, **_):
    from .study import liquidity_activeness

    a, b = 0.004, 0.001
    s = pd.Series([a, b] * 7, index=pd.period_range("2015-01", periods=14, freq="M"))
    got = liquidity_activeness(s).iloc[12]
    want = abs(a - b) / 2 * math.sqrt(12 / 11)
    err = abs(got - want)
    return err <= 1e-15, err, "alternating illiquidity has closed-form SD"


CHECKS: dict[str, Callable] = {
    "amihud_homogeneity": _check_amihud_homogeneity,
    "flow_identity": _check_flow_identity,
    "nw_lag0_white": _check_nw_white,
    "winsorize_idempotent": _check_winsor_idempotent,
    "rolling_alpha_replication": _check_rolling_alpha,
    "within_vs_dummy_oracle": _check_within_dummy,
    "sort_partition": _check_sort_partition,
    "activeness_alternating": _check_activeness_alternating,
}


def closed_form_checks(checks: Sequence[str] | None = None, *, seed: int = 12345, within_tol: float = 1e-10) -> list[CheckResult]:
    """Run analytically known cases and report pass/fail; nothing is raised.

    ``checks`` selects a subset by name (an empty selection gives an empty
    report).  ``within_tol`` is passed to the fixed-effects check, so a
    loosened tolerance shows up as a failure.
    """
    names = list(CHECKS) if checks is None else list(checks)
    out = []
    for name in names:
        rng = np.random.default_rng([seed, list(CHECKS).index(name) if name in CHECKS else 0])
        fn = CHECKS.get(name)
        if fn is None:
            out.append(CheckResult(name, False, math.nan, "unknown check"))
            continue
        try:
            ok, err, detail = fn(rng, within_tol=within_tol)
            out.append(CheckResult(name, bool(ok), float(err), detail))
        except Exception as exc:  # reported, not raised
            out.append(CheckResult(name, False, math.nan, f"{type(exc).__name__}: {exc}"))
    return out
