"""Estimation core: OLS, fixed-effect absorption, robust covariances, rolling alphas.

All estimators are pure functions of their inputs.  Sums that feed a
covariance run in a fixed order, so results do not depend on threading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats

CovType = Literal["classical", "HC0", "clustered", "HAC"]

WITHIN_TOL = 1e-10
WITHIN_MAX_ITER = 500
RANK_TOL = 1e-10


class EstimationError(RuntimeError):
    """An estimator could not produce a fit."""


class RankDeficientError(EstimationError):
    def __init__(self, columns: Sequence[str], reason: str = "rank-deficient design"):
        self.columns = list(columns)
        super().__init__(f"{reason}: {', '.join(self.columns)}")


class NonConvergenceError(EstimationError):
    pass


@dataclass
class RegressionFit:
    """Coefficients, covariance and diagnostics of a linear fit.

    ``design`` is the (possibly demeaned) regressor matrix actually used, so
    alternative covariances can be computed after the fact.
    """

    names: list[str]
    coef: np.ndarray
    cov: np.ndarray
    cov_type: CovType
    n_obs: int
    residuals: np.ndarray
    design: np.ndarray
    r2: float = math.nan
    r2_adj: float = math.nan
    r2_within: float = math.nan
    df_resid: int = 0
    n_clusters: int | None = None
    absorbed_dims: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)

    @property
    def n_params(self) -> int:
        return len(self.coef)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    def _ref_dist(self):
        if self.cov_type == "clustered" and self.n_clusters:
            return stats.t(self.n_clusters - 1)
        if self.cov_type == "classical":
            return stats.t(max(self.df_resid, 1))
        return stats.norm()

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * self._ref_dist().sf(np.abs(self.tstat))

    def conf_int(self, alpha: float = 0.05) -> np.ndarray:
        """(k, 2) interval bounds.  Clustered fits use t with G-1 dof."""
        q = self._ref_dist().ppf(1.0 - alpha / 2.0)
        return np.column_stack([self.coef - q * self.se, self.coef + q * self.se])

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def summary(self) -> pd.DataFrame:
        ci = self.conf_int()
        return pd.DataFrame(
            {"coef": self.coef, "se": self.se, "t": self.tstat, "p": self.pvalues, "ci_low": ci[:, 0], "ci_high": ci[:, 1]},
            index=pd.Index(self.names, name="term"),
        )


# ---------------------------------------------------------------------------
# OLS and covariances
# ---------------------------------------------------------------------------

def _names(X, names) -> list[str]:
    if names is not None:
        return list(names)
    if isinstance(X, pd.DataFrame):
        return [str(c) for c in X.columns]
    shape = np.shape(X)
    return [f"x{j}" for j in range(shape[1] if len(shape) > 1 else 1)]


def _dependent_columns(X: np.ndarray, names: list[str]) -> list[str]:
    """Columns that are linear combinations of earlier ones (pivoted QR on scaled X)."""
    norms = np.sqrt((X**2).sum(axis=0))
    zero = norms == 0
    Xs = X / np.where(zero, 1.0, norms)
    _, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int((d > RANK_TOL * max(d[0], 1e-300)).sum()) if len(d) else 0
    bad = sorted(set(piv[rank:].tolist()) | set(np.flatnonzero(zero).tolist()))
    return [names[j] for j in bad]


def _bread(X: np.ndarray) -> np.ndarray:
    return np.linalg.inv(X.T @ X)


def white_cov(X: np.ndarray, resid: np.ndarray, bread: np.ndarray | None = None) -> np.ndarray:
    """HC0 sandwich: (X'X)^-1 (sum x_i x_i' u_i^2) (X'X)^-1."""
    B = _bread(X) if bread is None else bread
    s = X * resid[:, None]
    return B @ (s.T @ s) @ B


def cluster_cov(X: np.ndarray, resid: np.ndarray, groups, n_slopes: int | None = None, bread=None) -> tuple[np.ndarray, int]:
    """CR1 cluster-robust covariance and the number of clusters.

    (G/(G-1)) ((N-1)/(N-K)) (X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1, with
    K = ``n_slopes`` (defaults to the number of columns of X).
    """
    codes, uniq = pd.factorize(np.asarray(groups), sort=True)
    G = len(uniq)
    if G < 2:
        raise EstimationError("clustered covariance needs at least 2 clusters")
    n, k = X.shape
    K = k if n_slopes is None else n_slopes
    B = _bread(X) if bread is None else bread
    scores = np.zeros((G, k))
    np.add.at(scores, codes, X * resid[:, None])
    meat = scores.T @ scores
    factor = (G / (G - 1.0)) * ((n - 1.0) / (n - K))
    return factor * (B @ meat @ B), G


def auto_lags(n: int) -> int:
    """Newey-West rule floor(4 (T/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def newey_west_cov(X, resid=None, lags: int | str = "auto") -> np.ndarray:
    """Bartlett-kernel HAC covariance; ``lags=0`` is exactly :func:`white_cov`.

    Accepts either ``(X, resid)`` or a :class:`RegressionFit` as ``X``.
    Rows must be in time order.
    """
    if isinstance(X, RegressionFit):
        X, resid = X.design, X.residuals
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    resid = np.asarray(resid, dtype=float)
    n = len(resid)
    L = auto_lags(n) if lags == "auto" else int(lags)
    if L < 0 or L >= n:
        raise ValueError(f"lags must satisfy 0 <= lags < n_obs ({n}), got {L}")
    s = X * resid[:, None]
    S = s.T @ s
    for lag in range(1, L + 1):
        w = 1.0 - lag / (L + 1.0)
        gamma = s[lag:].T @ s[:-lag]
        S += w * (gamma + gamma.T)
    B = _bread(X)
    return B @ S @ B


def ols(X, y, names: Sequence[str] | None = None, cov_type: CovType = "classical", *, groups=None, lags="auto") -> RegressionFit:
    """Least squares of ``y`` on the columns of ``X`` (no intercept added).

    Raises :class:`RankDeficientError` naming the dependent columns.
    ``cov_type`` picks the covariance: classical, HC0, clustered (needs
    ``groups``) or HAC (Bartlett, ``lags``).
    """
    names = _names(X, names)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n != len(y):
        raise ValueError(f"X has {n} rows but y has {len(y)}")
    if n <= k:
        raise EstimationError(f"need more observations ({n}) than regressors ({k})")
    bad = _dependent_columns(X, names)
    if bad:
        raise RankDeficientError(bad)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    B = _bread(X)
    n_clusters = None
    if cov_type == "classical":
        cov = B * (resid @ resid) / (n - k)
    elif cov_type == "HC0":
        cov = white_cov(X, resid, B)
    elif cov_type == "clustered":
        if groups is None:
            raise ValueError("clustered covariance needs groups")
        cov, n_clusters = cluster_cov(X, resid, groups, bread=B)
    elif cov_type == "HAC":
        cov = newey_west_cov(X, resid, lags)
    else:
        raise ValueError(f"unknown cov_type {cov_type!r}")
    tss = ((y - y.mean()) ** 2).sum()
    ssr = resid @ resid
    r2 = 1.0 - ssr / tss if tss > 0 else math.nan
    has_const = bool(np.any(np.all(X == X[0], axis=0) & (X[0] != 0)))
    dfm = k - 1 if has_const else k
    r2_adj = 1.0 - (1.0 - r2) * (n - 1) / (n - dfm - 1) if tss > 0 else math.nan
    return RegressionFit(
        names=names, coef=coef, cov=cov, cov_type=cov_type, n_obs=n, residuals=resid, design=X,
        r2=r2, r2_adj=r2_adj, df_resid=n - k, n_clusters=n_clusters,
    )


# ---------------------------------------------------------------------------
# fixed effects
# ---------------------------------------------------------------------------

class WithinResult(NamedTuple):
    values: np.ndarray
    absorbed: np.ndarray  # bool per column: nothing left after demeaning
    n_iter: int


def within_transform(values, groups: Sequence, tol: float = WITHIN_TOL, max_iter: int = WITHIN_MAX_ITER) -> WithinResult:
    """Sweep out group means for each fixed-effect dimension.

    ``values`` is (n,) or (n, k); ``groups`` is a sequence of length-n label
    arrays, one per dimension.  With one dimension a single pass is exact.
    With several, sweeps alternate until the estimated distance to the fixed
    point (last change over one minus the contraction rate) is below ``tol``,
    or below the column's float64 resolution when that is coarser, and
    :class:`NonConvergenceError` is raised after ``max_iter`` sweeps.
    """
    x = np.array(values, dtype=float, copy=True)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n, k = x.shape
    coded = []
    for g in groups:
        codes, uniq = pd.factorize(np.asarray(g), sort=True)
        if (codes < 0).any():
            raise ValueError("fixed-effect labels must not be missing")
        if len(codes) != n:
            raise ValueError("group labels and values differ in length")
        counts = np.bincount(codes, minlength=len(uniq)).astype(float)
        coded.append((codes, len(uniq), counts))
    # absolute tolerance, floored at what float64 can resolve for the column
    col_tol = np.maximum(tol, 64 * np.finfo(float).eps * np.abs(x).max(axis=0)) if n else np.full(k, tol)
    orig_norm = np.sqrt((x**2).sum(axis=0))

    def sweep(arr: np.ndarray) -> None:
        for codes, m, counts in coded:
            for j in range(k):
                means = np.bincount(codes, weights=arr[:, j], minlength=m) / counts
                arr[:, j] -= means[codes]

    n_iter = 0
    if len(coded) == 1:
        sweep(x)
        n_iter = 1
    elif coded:
        prev = None
        while True:
            before = x.copy()
            sweep(x)
            n_iter += 1
            change = np.abs(x - before).max(axis=0)
            # alternating projections shrink geometrically; bound the remaining tail
            remaining = change
            if prev is not None:
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(prev > 0, change / prev, 0.0)
                remaining = np.where(r < 1, change / (1 - np.minimum(r, 0.999)), np.inf)
            if np.all(change < col_tol) and np.all(remaining < col_tol):
                break
            prev = change
            if n_iter >= max_iter:
                raise NonConvergenceError(f"within transform did not converge in {max_iter} sweeps")
    resid_norm = np.sqrt((x**2).sum(axis=0))
    absorbed = resid_norm <= 1e-8 * np.maximum(orig_norm, 1e-300)
    x[:, absorbed] = 0.0
    return WithinResult(x[:, 0] if squeeze else x, absorbed, n_iter)


def _n_fe_params(groups: list[np.ndarray]) -> int:
    if not groups:
        return 0
    total = sum(len(pd.unique(g)) for g in groups)
    return total - (len(groups) - 1)


def fe_regress(
    panel: pd.DataFrame,
    y_col: str,
    x_cols: Sequence[str],
    fe_dims: Sequence[str] = ("fund_id", "month"),
    cluster_dim: str | None = "month",
    *,
    drop_absorbed: bool = False,
    tol: float = WITHIN_TOL,
) -> RegressionFit:
    """Fixed-effects OLS with cluster-robust (CR1) standard errors.

    Rows missing ``y_col`` or any ``x_cols`` are dropped.  Fixed effects on
    ``fe_dims`` are absorbed by :func:`within_transform`.  A regressor left
    with no variation is an error naming it, unless ``drop_absorbed`` is set,
    in which case it is removed and listed in ``fit.dropped``.
    """
    x_cols = list(x_cols)
    used = [y_col, *x_cols]
    data = panel.loc[panel[used].notna().all(axis=1)]
    n = len(data)
    if n == 0:
        raise EstimationError(f"no complete observations for {y_col}")
    groups = [data[d].to_numpy() for d in fe_dims]
    arr = data[used].to_numpy(dtype=float)
    res = within_transform(arr, groups, tol=tol)
    yw, Xw = res.values[:, 0], res.values[:, 1:]
    absorbed = [c for c, a in zip(x_cols, res.absorbed[1:]) if a]
    dropped: list[str] = []
    if absorbed:
        if not drop_absorbed:
            raise RankDeficientError(absorbed, "collinear with fixed effects")
        keep = [j for j, c in enumerate(x_cols) if c not in absorbed]
        Xw = Xw[:, keep]
        dropped = absorbed
        x_cols = [x_cols[j] for j in keep]
    if not x_cols:
        raise EstimationError("no regressors left after absorbing fixed effects")
    k = len(x_cols)
    bad = _dependent_columns(Xw, x_cols)
    if bad:
        raise RankDeficientError(bad, "collinear after absorbing fixed effects")
    n_fe = _n_fe_params(groups)
    if n <= k + n_fe:
        raise EstimationError(f"{n} observations cannot identify {k} slopes and {n_fe} fixed effects")

    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    B = _bread(Xw)
    if cluster_dim is None:
        cov = B * (resid @ resid) / (n - k - n_fe)
        cov_type: CovType = "classical"
        G = None
    else:
        cov, G = cluster_cov(Xw, resid, data[cluster_dim].to_numpy(), n_slopes=k, bread=B)
        cov_type = "clustered"

    y = data[y_col].to_numpy(dtype=float)
    tss = ((y - y.mean()) ** 2).sum()
    ssr = resid @ resid
    tss_w = yw @ yw
    r2 = 1.0 - ssr / tss if tss > 0 else math.nan
    dfm = k + n_fe - 1
    r2_adj = 1.0 - (1.0 - r2) * (n - 1) / (n - dfm - 1) if tss > 0 and n - dfm - 1 > 0 else math.nan
    return RegressionFit(
        names=x_cols, coef=coef, cov=cov, cov_type=cov_type, n_obs=n, residuals=resid, design=Xw,
        r2=r2, r2_adj=r2_adj, r2_within=1.0 - ssr / tss_w if tss_w > 0 else math.nan,
        df_resid=n - k - n_fe, n_clusters=G, absorbed_dims=list(fe_dims), dropped=dropped,
    )


# ---------------------------------------------------------------------------
# time-series tests
# ---------------------------------------------------------------------------

class MeanTest(NamedTuple):
    mean: float
    se: float
    t: float
    lags: int
    n: int
    degenerate: bool


def nw_mean_test(series, lags: int | str = "auto") -> MeanTest:
    """Mean of a series with its Newey-West t-statistic (auto lag by default).

    A series with zero variance gives an infinite t (sign of the mean) and
    ``degenerate=True``.
    """
    x = np.asarray(series, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) == 0:
        raise ValueError("series is entirely missing")
    if len(x) < 8:
        raise ValueError(f"need at least 8 observations, got {len(x)}")
    n = len(x)
    L = auto_lags(n) if lags == "auto" else int(lags)
    mean = float(x.mean())
    resid = x - mean
    if np.all(resid == 0) or np.max(np.abs(resid)) <= 1e-15 * max(abs(mean), 1e-300):
        t = math.copysign(math.inf, mean) if mean != 0 else math.nan
        return MeanTest(mean, 0.0, t, L, n, True)
    var = newey_west_cov(np.ones((n, 1)), resid, L)[0, 0]
    se = math.sqrt(max(var, 0.0))
    return MeanTest(mean, se, mean / se, L, n, False)


FACTOR_SETS = {
    "capm": ("mkt_excess",),
    "ff3": ("mkt_excess", "smb", "hml"),
    "ff4": ("mkt_excess", "smb", "hml", "wml"),
}


def rolling_alpha(
    excess_ret: pd.Series,
    factors: pd.DataFrame,
    window: int = 36,
    model: str = "ff4",
    timing: Literal["out_of_sample", "intercept"] = "out_of_sample",
) -> pd.Series:
    """Monthly alphas from rolling factor regressions.

    ``excess_ret`` and ``factors`` are indexed by monthly Period.  With the
    default timing, betas come from months [t-window, t-1] and
    alpha_t = excess_t - beta' f_t.  With ``timing="intercept"`` alpha_t is
    the intercept of the regression over [t-window+1, t].  Windows with any
    missing month give NaN.
    """
    cols = list(FACTOR_SETS[model])
    idx = excess_ret.index
    full = pd.period_range(min(idx.min(), factors.index.min()), max(idx.max(), factors.index.max()), freq="M")
    y = excess_ret.reindex(full).to_numpy(float)
    F = factors[cols].reindex(full).to_numpy(float)
    Y = y[:, None] if y.ndim == 1 else y
    alpha = rolling_alpha_matrix(Y, F, window, timing)[:, 0]
    return pd.Series(alpha, index=full).reindex(idx)


def rolling_alpha_matrix(Y: np.ndarray, F: np.ndarray, window: int, timing: str = "out_of_sample") -> np.ndarray:
    """Array version of :func:`rolling_alpha` for several return columns sharing one factor matrix."""
    T, k = F.shape
    out = np.full(Y.shape, np.nan)
    if T < window + (timing == "out_of_sample"):
        return out
    X = np.column_stack([np.ones(T), F])
    ok_rows = np.isfinite(X).all(axis=1)
    Xw = np.lib.stride_tricks.sliding_window_view(X, (window, k + 1))[:, 0]  # (T-window+1, window, k+1)
    okw = np.lib.stride_tricks.sliding_window_view(ok_rows, window).all(axis=1)
    for col in range(Y.shape[1]):
        y = Y[:, col]
        yw = np.lib.stride_tricks.sliding_window_view(y, window)
        valid = okw & np.isfinite(yw).all(axis=1)
        if not valid.any():
            continue
        Xv = np.nan_to_num(Xw[valid])
        yv = np.nan_to_num(yw[valid])
        scale = np.sqrt((Xv**2).mean(axis=1))
        scale[scale == 0] = 1.0
        Q, R = np.linalg.qr(Xv / scale[:, None, :])
        d = np.abs(np.diagonal(R, axis1=1, axis2=2))
        if np.any(d.min(axis=1) <= 1e-10 * d.max(axis=1)):
            raise EstimationError("singular factor matrix inside a rolling window")
        qty = np.einsum("wnk,wn->wk", Q, yv)
        beta = np.linalg.solve(R, qty[..., None])[..., 0] / scale
        starts = np.flatnonzero(valid)
        if timing == "intercept":
            out[starts + window - 1, col] = beta[:, 0]
        else:
            t = starts + window
            inside = t < T
            tt = t[inside]
            b = beta[inside]
            out[tt, col] = y[tt] - np.einsum("wk,wk->w", X[tt, 1:], b[:, 1:])
    return out


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------

WINSOR_PRESETS = {"5-95": (5.0, 95.0), "2.5-97.5": (2.5, 97.5)}


def nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value (1-based)."""
    n = len(sorted_vals)
    rank = math.ceil(round(pct / 100.0 * n, 9))
    return float(sorted_vals[min(max(rank, 1), n) - 1])


def winsorize(values, lower_pct: float = 5.0, upper_pct: float = 95.0):
    """Clip to nearest-rank percentiles of the non-missing values.

    Missing values stay missing.  Returns the same container type it gets
    (Series keeps its index).
    """
    arr = np.asarray(values, dtype=float)
    finite = arr[~np.isnan(arr)]
    if finite.size == 0:
        raise ValueError("winsorize needs at least one non-missing value")
    s = np.sort(finite)
    lo, hi = nearest_rank(s, lower_pct), nearest_rank(s, upper_pct)
    out = np.clip(arr, lo, hi)
    if isinstance(values, pd.Series):
        return pd.Series(out, index=values.index, name=values.name)
    return out


def standardize(values):
    """Z-scores with the sample (n-1) standard deviation; NaNs pass through."""
    arr = np.asarray(values, dtype=float)
    finite = arr[~np.isnan(arr)]
    if finite.size < 2:
        raise ValueError("standardize needs at least two non-missing values")
    mu = finite.mean()
    sd = finite.std(ddof=1)
    if not sd > 0:
        raise ValueError("standardize: zero variance")
    out = (arr - mu) / sd
    if isinstance(values, pd.Series):
        return pd.Series(out, index=values.index, name=values.name)
    return out

