"""Fund liquidity management: illiquidity measures, flows, cash and performance tests."""
from .data import (
    DataValidationError,
    HoldingsSnapshot,
    apply_sample_filter,
    ingest_factors,
    ingest_fund_series,
    ingest_holdings,
    ingest_market_daily,
    ingest_stock_bars,
    iter_snapshots,
)
from .econometrics import (
    EstimationError,
    NonConvergenceError,
    RankDeficientError,
    RegressionFit,
    cluster_cov,
    fe_regress,
    newey_west_cov,
    nw_mean_test,
    ols,
    rolling_alpha,
    standardize,
    white_cov,
    winsorize,
    within_transform,
)
from .flows import cash_changes, cash_pct, horizon_flow, monthly_flow
from .liquidity import (
    StockMonthLiquidity,
    amihud_stock_month,
    delta_illiq,
    fund_illiquidity,
    fund_month_illiquidity,
    ps_gamma_stock_month,
    stock_month_liquidity,
)
from .study import (
    FundMonthRecord,
    PanelDataset,
    SortTable,
    StudyConfig,
    build_panel,
    gross_return,
    liquidity_activeness,
    quintile_sort,
    run_activeness_performance,
    run_eq4,
    run_eq5,
    run_eq6,
    run_eq7,
    summary_stats,
)
from .synthetic import (
    UniverseConfig,
    closed_form_checks,
    dummy_fe_ols_oracle,
    generate_fund_panel,
    generate_universe,
)

__version__ = "0.1.0"
