"""Exit criteria: oracle equivalence, planted recovery, sorts, unit properties, determinism.

Each test prints one PASS/FAIL line (also collected in the terminal summary).
The Monte Carlo loops share one session fixture, so the whole file runs in a
few minutes on one core.
"""
import time
import warnings

import numpy as np
import pandas as pd
import pytest

from fundliq.cli import main as cli_main
from fundliq.econometrics import fe_regress, within_transform
from fundliq.study import (
    StudyConfig,
    build_panel,
    quintile_sort,
    run_activeness_performance,
    run_eq4,
    run_eq6,
    run_eq7,
    summary_stats,
)
from fundliq.synthetic import UniverseConfig, closed_form_checks, dummy_fe_ols_oracle, generate_fund_panel, random_panel

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance

N_SEEDS = 200
# planted recovery is judged on the raw planted variables
RAW = StudyConfig(winsor=None, compute_alphas=False)
NULL_EFFECTS = dict(
    flow_to_cash_betas=(0.0,) * 6,
    interaction_betas=(0.0,) * 5,
    dilliq_phi=(0.0,) * 3,
    activeness_premium=0.0,
    expense_activeness=0.0,
)


def report(label: str, ok: bool, detail: str, status: str | None = None) -> None:
    line = f"{status or ('PASS' if ok else 'FAIL')}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def panel(cfg: UniverseConfig):
    fp = generate_fund_panel(cfg)
    return build_panel(fp.fund_series, fp.factors, fp.fund_month, RAW)


def covers(fit, j: int, value: float) -> bool:
    lo, hi = fit.conf_int()[j]
    return bool(lo <= value <= hi)


@pytest.fixture(scope="module")
def monte_carlo():
    """Planted and null panels for 200 seeds at 200 funds x 60 months."""
    t0 = time.perf_counter()
    out = {k: [] for k in ("eq4", "eq7_b0", "eq7_b1", "eq7_sum", "eq6", "t4_gross", "t4_net",
                           "null_eq4", "null_eq4_all", "null_eq6", "null_eq7", "null_t4")}
    for seed in range(N_SEEDS):
        base = UniverseConfig(seed=seed)
        truth = base.planted()
        p = panel(base)
        out["eq4"].append(covers(run_eq4(p), 0, truth["eq4"]["flow"]))
        c6 = run_eq6(p).coef
        out["eq6"].append(bool(c6[0] < 0 and c6[3] > 0))
        t4 = run_activeness_performance(p, metrics=("ret_gross", "ret_net"), controls=("size", "turnover"))
        out["t4_gross"].append(covers(t4["ret_gross"], 0, truth["table4"]["ret_gross"]))
        out["t4_net"].append(covers(t4["ret_net"], 0, truth["table4"]["ret_net"]))

        inter = base.replace(cash_model="interaction")
        f7 = run_eq7(panel(inter))
        b = inter.planted()["eq7"]
        out["eq7_b0"].append(covers(f7, 0, b["flow_q0"]))
        out["eq7_b1"].append(covers(f7, 1, b["flow_q0_x_illiq"]))
        out["eq7_sum"].append(f7.coef[0] + f7.coef[1])

        null = panel(base.replace(**NULL_EFFECTS))
        t = run_eq4(null).tstat
        out["null_eq4"].append(np.abs(t) > 1.96)
        out["null_eq4_all"].append(bool(np.all(np.abs(t) <= 2.5)))
        out["null_eq6"].append(np.abs(run_eq6(null).tstat) > 1.96)
        out["null_t4"].append(abs(run_activeness_performance(null, metrics=("ret_gross",))["ret_gross"].tstat[0]) > 1.96)
        out["null_eq7"].append(np.abs(run_eq7(panel(inter.replace(**NULL_EFFECTS))).tstat) > 1.96)
    out["seconds"] = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------

def test_c1_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    n_unbalanced = 0
    for i in range(50):
        nf = int(rng.integers(2, 51))
        nm = int(rng.integers(3, 25))
        drop = 0.0 if i % 2 == 0 else float(rng.uniform(0.05, 0.4))
        k = int(rng.integers(1, 4))
        d = random_panel(rng, nf, nm, k, drop=drop, loading=float(rng.uniform(0.0, 3.0)))
        n_unbalanced += len(d) < nf * nm
        x = [f"x{j}" for j in range(k)]
        a = fe_regress(d, "y", x).coef
        b = dummy_fe_ols_oracle(d, "y", x).coef
        worst = max(worst, float(np.abs(a - b).max()))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-8 and secs < 60
    report("C1 oracle equivalence", ok, f"max |slope diff| = {worst:.2e} over 50 panels ({n_unbalanced} unbalanced), {secs:.1f}s")
    assert ok


def test_c2_eq4_recovery(monte_carlo):
    cov = float(np.mean(monte_carlo["eq4"]))
    ok = cov >= 0.90 and monte_carlo["seconds"] < 600
    report("C2 Eq4 recovery", ok, f"95% CI covers 0.32 in {cov:.1%} of {N_SEEDS} seeds (MC loop {monte_carlo['seconds']:.0f}s)")
    assert ok


def test_c3_eq7_recovery(monte_carlo):
    c0 = float(np.mean(monte_carlo["eq7_b0"]))
    c1 = float(np.mean(monte_carlo["eq7_b1"]))
    joint = float(np.mean(np.array(monte_carlo["eq7_b0"]) & np.array(monte_carlo["eq7_b1"])))
    med = float(np.median(monte_carlo["eq7_sum"]))
    ok = c0 >= 0.90 and c1 >= 0.90 and abs(med - 0.29) <= 0.05
    report("C3 Eq7 recovery", ok,
           f"coverage b0 {c0:.1%}, b1 {c1:.1%} (both at once {joint:.1%}, informational); median b0+b1 = {med:.3f}")
    assert ok


def test_c4_eq6_signs(monte_carlo):
    share = float(np.mean(monte_carlo["eq6"]))
    ok = share >= 0.85
    report("C4 Eq6 sign pattern", ok, f"lag0 < 0 and lag3 > 0 in {share:.1%} of {N_SEEDS} seeds")
    assert ok


def test_c5_sorts():
    # 120 months: see the decisions ledger for why the sort criterion uses a longer panel
    t0 = time.perf_counter()
    hits, null_rej, tmin = 0, 0, np.inf
    for seed in range(N_SEEDS):
        for prem in (0.9, 0.0):
            p = panel(UniverseConfig(seed=seed, n_months=120, activeness_premium=prem))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                st = quintile_sort(p, metrics=("ret_gross",))
            t = st.nw_t["ret_gross"]
            if prem:
                m = st.means["ret_gross"].to_numpy()
                hits += bool(np.all(np.diff(m) > 0) and t > 2)
                tmin = min(tmin, t)
            else:
                null_rej += abs(t) > 1.96
    power, size = hits / N_SEEDS, null_rej / N_SEEDS
    ok = power >= 0.85 and size <= 0.10
    report("C5 quintile sorts", ok,
           f"monotone with NW t > 2 in {power:.1%} (min t {tmin:.1f}); null |t| > 1.96 in {size:.1%}; "
           f"200 funds x 120 months, {time.perf_counter() - t0:.0f}s")
    assert ok


def test_c6_unit_properties():
    names = ["amihud_homogeneity", "flow_identity", "nw_lag0_white", "winsorize_idempotent", "rolling_alpha_replication"]
    res = closed_form_checks(names)
    rng = np.random.default_rng(6)
    drift = 0.0
    for i in range(50):
        d = random_panel(rng, int(rng.integers(2, 51)), int(rng.integers(3, 25)), 2,
                         drop=0.0 if i % 2 == 0 else 0.3, loading=float(rng.uniform(0.0, 3.0)))
        X = d[["y", "x0", "x1"]].to_numpy()
        groups = [d["fund_id"].to_numpy(), d["month"].to_numpy()]
        # exact two-way projection from the dummy design
        D = np.hstack([pd.get_dummies(g).to_numpy(float) for g in groups])
        exact = X - D @ np.linalg.lstsq(D, X, rcond=None)[0]
        drift = max(drift, float(np.abs(within_transform(X, groups).values - exact).max()))
    ok = all(r.passed for r in res) and drift <= 1e-10
    detail = "; ".join(f"{r.name} err={r.max_error:.1e}" for r in res) + f"; within vs exact projection={drift:.1e}"
    report("C6 unit properties", ok, detail)
    assert ok


def test_c7_cli_determinism(tmp_path, capsys):
    data = tmp_path / "data"
    assert cli_main(["simulate", "--out", str(data), "--seed", "0"]) == 0
    capsys.readouterr()
    digests = {}
    for w in (1, 8):
        assert cli_main(["report", "--data", str(data), "--out", str(tmp_path / f"w{w}"), "--workers", str(w)]) == 0
        digests[w] = sorted(line.split("sha256=")[1] for line in capsys.readouterr().out.splitlines())
    ok = digests[1] == digests[8] and len(digests[1]) == 10
    report("C7 determinism", ok, f"{len(digests[1])} report files, digests identical across --workers 1 and 8: {digests[1] == digests[8]}")
    assert ok


def test_c8_calibration_diagnostic():
    t = summary_stats(build_panel(*_default_inputs(), StudyConfig()))
    targets = {"Cash (%)": 3.11, "Flows (%)": 0.70, "Illiq(Amihud) x 100": 1.01}
    parts, inside = [], True
    for label, want in targets.items():
        got = float(t.loc[label, "mean"])
        rel = got / want - 1
        inside &= abs(rel) <= 0.20
        parts.append(f"{label} {got:.2f} vs {want} ({rel:+.0%})")
    report("C8 calibration (diagnostic, not gated)", inside, "; ".join(parts), status="INFO")


def _default_inputs():
    fp = generate_fund_panel(UniverseConfig())
    return fp.fund_series, fp.factors, fp.fund_month


# ---------------------------------------------------------------------------
# supporting invariants from the same Monte Carlo run

def test_table4_coverage(monte_carlo):
    g = float(np.mean(monte_carlo["t4_gross"]))
    n = float(np.mean(monte_carlo["t4_net"]))
    ok = g >= 0.90 and n >= 0.90
    report("Table 4 recovery (invariant)", ok, f"activeness CI covers planted gross {g:.1%}, net {n:.1%}")
    assert ok


def test_null_false_positive_rates(monte_carlo):
    rates = {
        "eq4": np.mean(monte_carlo["null_eq4"], axis=0),
        "eq6": np.mean(monte_carlo["null_eq6"], axis=0),
        "eq7": np.mean(monte_carlo["null_eq7"], axis=0),
        "table4": np.atleast_1d(np.mean(monte_carlo["null_t4"])),
    }
    worst = max(float(r.max()) for r in rates.values())
    ok = worst <= 0.10
    detail = "; ".join(f"{k} max {v.max():.1%}" for k, v in rates.items())
    report("Null universe |t| > 1.96 per coefficient (invariant)", ok, detail)
    clean = float(np.mean(monte_carlo["null_eq4_all"]))
    report("Null Eq4: no |t| > 2.5 among six lags (example, not gated)", clean >= 0.90,
           f"{clean:.1%} of seeds (target 90%)", status="INFO")
    assert ok
