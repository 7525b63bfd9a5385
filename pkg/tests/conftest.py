from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fundliq.study import StudyConfig, build_panel
from fundliq.synthetic import UniverseConfig, generate_fund_panel, generate_universe, write_universe

# Plain fund panels (no stock layer) for fast regression tests.
RAW = StudyConfig(winsor=None, compute_alphas=False)


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def months(start: str, n: int) -> pd.PeriodIndex:
    return pd.period_range(start, periods=n, freq="M")


def panel_from(config: UniverseConfig, study: StudyConfig = RAW):
    fp = generate_fund_panel(config)
    return fp, build_panel(fp.fund_series, fp.factors, fp.fund_month, study)


@pytest.fixture(scope="session")
def small_panel():
    """A 60-fund, 48-month planted panel with the default cash model."""
    return panel_from(UniverseConfig(seed=7, n_funds=60, n_months=48))


@pytest.fixture(scope="session")
def small_universe_dir(tmp_path_factory):
    """A small synthetic universe written to disk as the five input CSVs."""
    out = tmp_path_factory.mktemp("universe")
    cfg = UniverseConfig(seed=11, n_funds=30, n_months=48, n_stocks=60)
    write_universe(generate_universe(cfg), out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
