import json

import numpy as np
import pandas as pd
import pytest

from fundliq.liquidity import stock_month_liquidity
from fundliq.study import fund_month_inputs, run_eq4, run_eq5, run_eq6, run_eq7, summary_stats
from fundliq.synthetic import (
    CHECKS,
    UniverseConfig,
    closed_form_checks,
    dummy_fe_ols_oracle,
    generate_fund_panel,
    generate_universe,
    random_panel,
    write_universe,
)

from conftest import panel_from

NULL = dict(
    flow_to_cash_betas=(0.0,) * 6,
    flow_to_cash_prop_betas=(0.0,) * 6,
    interaction_betas=(0.0,) * 5,
    dilliq_phi=(0.0, 0.0, 0.0),
    activeness_premium=0.0,
    expense_activeness=0.0,
    cash_noise=0.0,
    month_effect_sd=0.0,
    idio_sd=0.0,
    alpha_sd=0.0,
    beta_sd=0.0,
    expense_noise=0.0,
)


# --- config -----------------------------------------------------------------

@pytest.mark.parametrize(
    "bad",
    [
        {"cash_model": "nope"},
        {"flow_sd": -0.1},
        {"n_months": 6},
        {"flow_to_cash_betas": (0.3,)},
        {"illiq_noise_ratio": (0.1, 0.5)},
        {"n_stocks": 6},
    ],
)
def test_config_rejects_infeasible(bad):
    with pytest.raises(ValueError):
        UniverseConfig(**bad)


def test_config_json_round_trip():
    cfg = UniverseConfig(seed=5, cash_model="interaction", dilliq_phi=(-0.01, 0.0, 0.0))
    assert UniverseConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        UniverseConfig.from_dict({"seed": 1, "colour": "red"})


def test_planted_truth():
    p = UniverseConfig().planted()
    assert p["eq4"]["flow"] == 0.32
    assert p["eq6"]["flow"] < 0 < p["eq6"]["flow_lag3"]
    assert p["table4"]["ret_net"] == pytest.approx(0.9 - 30 / 1200)
    q = UniverseConfig(cash_model="interaction").planted()["eq7"]
    assert (q["flow_q0"], q["flow_q0_x_illiq"]) == (0.16, 0.13)
    assert UniverseConfig(cash_model="proportion").planted()["eq5"]["flow"] == 0.13


# --- generator --------------------------------------------------------------

def test_same_seed_same_files(tmp_path):
    cfg = UniverseConfig(seed=2, n_funds=12, n_months=24, n_stocks=40)
    a = write_universe(generate_universe(cfg), tmp_path / "a")
    b = write_universe(generate_universe(cfg), tmp_path / "b")
    assert [h for _, h in a] == [h for _, h in b]
    c = write_universe(generate_universe(cfg.replace(seed=3)), tmp_path / "c")
    assert a[0][1] != c[0][1]
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["prng"] and manifest["planted"]["eq4"]["flow"] == 0.32
    assert manifest["files"]["holdings.csv"] == a[1][1]


def test_adding_a_fund_keeps_existing_draws():
    a = generate_fund_panel(UniverseConfig(seed=3, n_funds=10))
    b = generate_fund_panel(UniverseConfig(seed=3, n_funds=11))
    for key in ("L", "cash", "flows", "tna", "nav", "net", "expense", "activeness"):
        np.testing.assert_array_equal(a.arrays[key], b.arrays[key][:10])


def test_universe_realises_planted_illiquidity():
    u = generate_universe(UniverseConfig(seed=1, n_funds=15, n_months=24, n_stocks=60))
    assert u.manifest["illiq_targets_clamped"] == 0
    sl = stock_month_liquidity(u.stock_bars)
    fm = fund_month_inputs(u.holdings, sl).sort_values(["fund_id", "month"])
    got = fm["illiq_amihud"].to_numpy().reshape(15, 24)
    np.testing.assert_allclose(got, u.funds.arrays["L"], rtol=1e-9)
    np.testing.assert_allclose(fm["cash_pct"].to_numpy().reshape(15, 24), 100 * u.funds.arrays["cash"], rtol=1e-9)
    sums = u.holdings.groupby(["fund_id", "month"])["weight"].sum()
    assert np.allclose(sums, 1.0)


def test_fund_series_is_consistent():
    fp = generate_fund_panel(UniverseConfig(seed=8, n_funds=5, n_months=30))
    fs = fp.fund_series
    assert (fs["tna"] > 0).all() and (fs["nav"] > 0).all() and (fs["expense_ratio"] >= 0).all()
    assert (fs.groupby("fund_id")["age_months"].diff().dropna() == 1).all()


@pytest.mark.parametrize("model, own", [("lags", run_eq4), ("proportion", run_eq5)])
def test_null_universe_zero_coefficients(model, own):
    cfg = UniverseConfig(seed=1, n_funds=40, n_months=48, cash_model=model, illiq_noise_ratio=(0.0, 0.0), **NULL)
    _, p = panel_from(cfg)
    assert np.abs(own(p).coef).max() < 1e-12
    assert np.abs(run_eq6(p).coef).max() < 1e-12


def test_null_interaction_universe():
    cfg = UniverseConfig(seed=1, n_funds=40, n_months=48, cash_model="interaction", **NULL)
    _, p = panel_from(cfg)
    assert np.abs(run_eq7(p).coef).max() < 1e-12


def test_default_calibration_shape():
    _, p = panel_from(UniverseConfig(seed=0))
    t = summary_stats(p)
    assert 2.0 < t.loc["Cash (%)", "mean"] < 4.5
    assert 0.4 < t.loc["Flows (%)", "mean"] < 1.0
    assert 0.6 < t.loc["Illiq(Amihud) x 100", "mean"] < 1.4


# --- oracle -----------------------------------------------------------------

def test_oracle_memory_guard(rng):
    d = random_panel(rng, 20, 12)
    with pytest.raises(MemoryError):
        dummy_fe_ols_oracle(d, "y", ["x0"], max_rows=100)


def test_oracle_single_fund_is_one_way(rng):
    from fundliq.econometrics import fe_regress

    d = random_panel(rng, 1, 40, k=2)
    d["q"] = d["month"].dt.quarter
    a = dummy_fe_ols_oracle(d, "y", ["x0", "x1"], ("fund_id", "q"))
    b = fe_regress(d, "y", ["x0", "x1"], ("q",))
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-10)


# --- closed-form battery ----------------------------------------------------

def test_closed_form_checks_pass():
    res = closed_form_checks()
    assert [r.name for r in res] == list(CHECKS)
    assert all(r.passed for r in res), [r for r in res if not r.passed]


@pytest.mark.parametrize("seed", range(5))
def test_loose_within_tolerance_is_caught(seed):
    (r,) = closed_form_checks(["within_vs_dummy_oracle"], seed=seed, within_tol=1.0)
    assert not r.passed and r.max_error > 1e-6


def test_empty_battery():
    assert closed_form_checks([]) == []
    (r,) = closed_form_checks(["no_such_check"])
    assert not r.passed and "unknown" in r.detail
