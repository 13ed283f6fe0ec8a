"""Event-study abnormal returns, fixed-effects panel regressions with
clustered covariance, effect-size arithmetic, and the decile long-short
backtest.

The panel estimator absorbs firm effects by within-demeaning (equivalent to
the dummy-variable estimator for the slopes), builds drop-first dummies for
the time effects, and reports degrees-of-freedom-corrected cluster-robust
standard errors.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd
from scipy import stats

from .corpus import DailyQuote, FactorRow

logger = logging.getLogger(__name__)

FACTOR_NAMES = ("mktrf", "smb", "hml", "umd")


class SingularDesignError(ValueError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; collinear columns: {columns}")


def _solve_ols(X: np.ndarray, y: np.ndarray, names: list[str]) -> np.ndarray:
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        collinear = []
        running = 0
        for j in range(X.shape[1]):
            new_rank = np.linalg.matrix_rank(X[:, : j + 1])
            if new_rank == running:
                collinear.append(names[j])
            running = new_rank
        raise SingularDesignError(collinear)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


# ---------------------------------------------------------------------------
# event study
# ---------------------------------------------------------------------------


@dataclass
class FactorFit:
    alpha: float
    betas: np.ndarray  # (mktrf, smb, hml, umd)
    est_start: date
    est_end: date
    n_obs: int


def carhart_fit(
    quotes: list[DailyQuote],
    factors: list[FactorRow],
    est_window: tuple[date, date],
    min_obs: int = 30,
) -> FactorFit:
    """OLS of the firm's excess return on the four factors over the window."""
    start, end = est_window
    fmap = {f.date: f for f in factors}
    rows = [
        (q.ret - fmap[q.date].rf, fmap[q.date])
        for q in quotes
        if start <= q.date <= end and q.date in fmap
    ]
    if len(rows) < min_obs:
        raise ValueError(
            f"only {len(rows)} observations in estimation window; need >= {min_obs}"
        )
    y = np.array([r for r, _ in rows])
    F = np.array([[f.mktrf, f.smb, f.hml, f.umd] for _, f in rows])
    X = np.column_stack([np.ones(len(y)), F])
    beta = _solve_ols(X, y, ["const", *FACTOR_NAMES])
    return FactorFit(
        alpha=float(beta[0]), betas=beta[1:], est_start=start, est_end=end, n_obs=len(y)
    )


def bhar(
    quotes: list[DailyQuote],
    factors: list[FactorRow],
    fit: FactorFit,
    event_window: tuple[date, date],
) -> float | None:
    """Buy-and-hold abnormal return in percent over the event window.

    Expected returns come from the fitted factor model; a missing quote or
    factor day makes the value absent.
    """
    start, end = event_window
    fmap = {f.date: f for f in factors}
    qmap = {q.date: q for q in quotes}
    window_dates = sorted(d for d in fmap if start <= d <= end)
    if not window_dates:
        return None
    realized = 1.0
    expected = 1.0
    for d in window_dates:
        if d not in qmap:
            return None
        f = fmap[d]
        er = f.rf + fit.alpha + float(
            fit.betas @ np.array([f.mktrf, f.smb, f.hml, f.umd])
        )
        realized *= 1.0 + qmap[d].ret
        expected *= 1.0 + er
    return 100.0 * (realized - expected)


# ---------------------------------------------------------------------------
# panel regression
# ---------------------------------------------------------------------------


@dataclass
class RegressionSpec:
    dependent: str
    emotions: tuple[str, ...] = ()
    controls: tuple[str, ...] = ()
    fixed_effects: tuple[str, ...] = ()  # subset of {"firm", "year", "month", "dow"}
    interactions: tuple[tuple[str, str], ...] = ()
    cluster: str = "firm"  # "firm" | "industry_quarter" | "none"

    def __post_init__(self) -> None:
        regressors = set(self.emotions) | set(self.controls)
        if self.dependent in regressors:
            raise ValueError("dependent variable also appears as a regressor")
        if self.cluster not in ("firm", "industry_quarter", "none"):
            raise ValueError(f"unknown cluster spec {self.cluster!r}")


@dataclass
class FitResult:
    coef: dict[str, float]
    se: dict[str, float]
    tstat: dict[str, float]
    pvalue: dict[str, float]
    adj_r2: float
    n_obs: int
    n_dropped: int = 0
    n_clusters: int | None = None
    within_sd: float | None = None
    term_order: list[str] = field(default_factory=list)

    def stars(self, name: str) -> str:
        p = self.pvalue[name]
        return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.10 else ""

    def table(self) -> pd.DataFrame:
        rows = [
            {
                "regressor": name,
                "coef": self.coef[name],
                "se": self.se[name],
                "t": self.tstat[name],
                "p": self.pvalue[name],
                "stars": self.stars(name),
            }
            for name in self.term_order
        ]
        return pd.DataFrame(rows)


_FE_COLUMNS = {"firm": "firm_id", "year": "year", "month": "month", "dow": "dow"}
_CLUSTER_COLUMNS = {"firm": "firm_id", "industry_quarter": "industry_quarter"}


def _cluster_covariance(
    X: np.ndarray, u: np.ndarray, groups: np.ndarray | None
) -> tuple[np.ndarray, int | None]:
    """Sandwich covariance; per-observation clusters give the HC1 estimator."""
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)
    if groups is None:
        meat = (X * (u**2)[:, None]).T @ X
        correction = n / (n - k)
        cov = correction * bread @ meat @ bread
        return cov, None
    meat = np.zeros((k, k))
    unique = pd.unique(groups)
    for g in unique:
        Xg = X[groups == g]
        ug = u[groups == g]
        s = Xg.T @ ug
        meat += np.outer(s, s)
    G = len(unique)
    correction = (G / (G - 1)) * ((n - 1) / (n - k))
    cov = correction * bread @ meat @ bread
    return cov, G


def fe_regress(panel: pd.DataFrame, spec: RegressionSpec) -> FitResult:
    """Fixed-effects OLS with cluster-robust inference.

    Firm effects are absorbed by within-demeaning of the dependent variable
    and every regressor; year/month/day-of-week effects enter as drop-first
    dummy columns. Winsorization of the inputs happens upstream.
    """
    for fe in spec.fixed_effects:
        if fe not in _FE_COLUMNS:
            raise ValueError(f"unknown fixed effect {fe!r}")
        if _FE_COLUMNS[fe] not in panel.columns:
            raise ValueError(f"panel lacks fixed-effect column {_FE_COLUMNS[fe]!r}")

    base_terms = list(spec.emotions) + list(spec.controls)
    inter_names = [f"{a}_x_{b}" for a, b in spec.interactions]
    needed = {spec.dependent, *base_terms}
    for a, b in spec.interactions:
        needed |= {a, b}
    missing_cols = sorted(needed - set(panel.columns))
    if missing_cols:
        raise ValueError(f"panel lacks columns {missing_cols}")

    used = panel.dropna(subset=sorted(needed)).copy()
    n_dropped = len(panel) - len(used)
    for a, b in spec.interactions:
        used[f"{a}_x_{b}"] = used[a] * used[b]

    dummy_frames = []
    for fe in spec.fixed_effects:
        if fe == "firm":
            continue
        col = _FE_COLUMNS[fe]
        values = sorted(used[col].unique())
        for v in values[1:]:
            dummy_frames.append(pd.Series((used[col] == v).astype(float), name=f"{fe}={v}"))
    terms = base_terms + inter_names + [s.name for s in dummy_frames]
    X_df = pd.concat([used[base_terms + inter_names]] + dummy_frames, axis=1)

    y = used[spec.dependent].to_numpy(dtype=float)
    X = X_df.to_numpy(dtype=float)

    within_sd = None
    firm_fe = "firm" in spec.fixed_effects
    if firm_fe:
        firm = used["firm_id"].to_numpy()
        sizes = pd.Series(firm).value_counts()
        singletons = int((sizes == 1).sum())
        if singletons:
            warnings.warn(
                f"{singletons} singleton firm groups are demeaned to zero",
                RuntimeWarning,
            )
        y_frame = pd.DataFrame({"y": y, "firm": firm})
        y = (y_frame["y"] - y_frame.groupby("firm")["y"].transform("mean")).to_numpy()
        within_sd = float(np.std(y, ddof=1))
        X_frame = pd.DataFrame(X, columns=terms)
        X_frame["firm"] = firm
        X = (
            X_frame[terms] - X_frame.groupby("firm")[terms].transform("mean")
        ).to_numpy(dtype=float)
    else:
        X = np.column_stack([np.ones(len(y)), X])
        terms = ["const"] + terms

    if len(y) <= X.shape[1]:
        raise ValueError(f"{len(y)} observations cannot identify {X.shape[1]} parameters")

    beta = _solve_ols(X, y, terms)
    u = y - X @ beta

    if spec.cluster == "none":
        groups = None
    else:
        col = _CLUSTER_COLUMNS[spec.cluster]
        if col not in used.columns:
            raise ValueError(f"panel lacks cluster column {col!r}")
        groups = used[col].to_numpy()
    cov, n_clusters = _cluster_covariance(X, u, groups)
    se = np.sqrt(np.diag(cov))
    tvals = beta / se
    df = (n_clusters - 1) if n_clusters is not None else len(y) - X.shape[1]
    pvals = 2.0 * stats.t.sf(np.abs(tvals), df)

    sst = float(((y - y.mean()) ** 2).sum())
    ssr = float((u**2).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    n, k = X.shape
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - k)

    return FitResult(
        coef={t: float(b) for t, b in zip(terms, beta)},
        se={t: float(s) for t, s in zip(terms, se)},
        tstat={t: float(v) for t, v in zip(terms, tvals)},
        pvalue={t: float(p) for t, p in zip(terms, pvals)},
        adj_r2=float(adj_r2),
        n_obs=n,
        n_dropped=n_dropped,
        n_clusters=n_clusters,
        within_sd=within_sd,
        term_order=terms,
    )


def standardized_effect(coef: float, sd_regressor: float, sd_dep: float | None = None) -> float:
    """Effect of a one-sd regressor move, optionally in dependent-sd units."""
    if sd_regressor <= 0 or (sd_dep is not None and sd_dep <= 0):
        raise ValueError("standard deviations must be positive")
    effect = coef * sd_regressor
    return effect / sd_dep if sd_dep is not None else effect


def annualize_three_day(effect_percent: float, horizon_days: int = 3) -> float:
    """Compound a per-window percent effect over 252 trading days."""
    if effect_percent <= -100.0:
        raise ValueError("effect must exceed -100 percent")
    return (1.0 + effect_percent / 100.0) ** (252.0 / horizon_days) - 1.0


def top_decile_indicator(values: pd.Series, top_fraction: float = 0.10) -> pd.Series:
    """1 for observations at or above the (1 - top_fraction) quantile."""
    threshold = values.quantile(1.0 - top_fraction)
    return (values >= threshold).astype(float)


# ---------------------------------------------------------------------------
# trading strategy
# ---------------------------------------------------------------------------


def portfolio_backtest(
    panel: pd.DataFrame,
    quotes: list[DailyQuote],
    deciles: int = 10,
    hold: int = 3,
    sentiment_col: str = "sentiment_pre",
    happy_col: str = "happy_pre",
) -> pd.DataFrame:
    """Zero-cost strategy: long the top sentiment decile, short the top
    happy decile around each announcement, held for `hold` trading days with
    daily equal-weight rebalancing.

    Long-leg daily return is (bid_t - ask_{t-1}) / ask_{t-1}; short-leg is
    -(ask_t - bid_{t-1}) / bid_{t-1}. Idle days return zero.
    """
    required = {sentiment_col, happy_col, "firm_id", "day0"}
    missing = sorted(required - set(panel.columns))
    if missing:
        raise ValueError(f"panel lacks columns {missing}")
    rows = panel.dropna(subset=[sentiment_col, happy_col]).copy()

    by_firm: dict[str, list[DailyQuote]] = {}
    for q in quotes:
        by_firm.setdefault(q.firm_id, []).append(q)
    firm_dates: dict[str, list[date]] = {}
    firm_quotes: dict[str, dict[date, DailyQuote]] = {}
    for firm_id, qs in by_firm.items():
        qs.sort(key=lambda q: q.date)
        firm_dates[firm_id] = [q.date for q in qs]
        firm_quotes[firm_id] = {q.date: q for q in qs}

    def _decile(series: pd.Series) -> pd.Series:
        order = series.rank(method="first")
        return np.ceil(order * deciles / len(series)).astype(int)

    rows["sent_decile"] = _decile(rows[sentiment_col])
    rows["happy_decile"] = _decile(rows[happy_col])

    all_dates = sorted({q.date for q in quotes})
    day_legs: dict[date, dict[str, list[float]]] = {
        d: {"long": [], "short": []} for d in all_dates
    }

    for _, row in rows.iterrows():
        legs = []
        if row["sent_decile"] == deciles:
            legs.append("long")
        if row["happy_decile"] == deciles:
            legs.append("short")
        if not legs:
            continue
        firm = row["firm_id"]
        d0 = row["day0"]
        dates = firm_dates.get(firm, [])
        if d0 not in firm_quotes.get(firm, {}):
            logger.warning("no quote for %s on %s; position skipped", firm, d0)
            continue
        i0 = dates.index(d0)
        for k in range(hold):
            idx = i0 - 1 + k
            if idx < 1 or idx >= len(dates):
                logger.warning("window day %d for %s off the calendar; skipped", k, firm)
                continue
            cur = firm_quotes[firm][dates[idx]]
            prev = firm_quotes[firm][dates[idx - 1]]
            if None in (cur.bid, cur.ask, prev.bid, prev.ask):
                logger.warning("missing bid/ask for %s on %s; skipped", firm, dates[idx])
                continue
            for leg in legs:
                if leg == "long":
                    day_legs[dates[idx]]["long"].append((cur.bid - prev.ask) / prev.ask)
                else:
                    day_legs[dates[idx]]["short"].append(-(cur.ask - prev.bid) / prev.bid)

    records = []
    cumulative = 1.0
    for d in all_dates:
        long_leg = day_legs[d]["long"]
        short_leg = day_legs[d]["short"]
        ret = 0.0
        if long_leg:
            ret += float(np.mean(long_leg))
        if short_leg:
            ret += float(np.mean(short_leg))
        cumulative *= 1.0 + ret
        records.append({"date": d, "ret": ret, "cumulative": cumulative - 1.0})
    return pd.DataFrame(records)


def alpha_regression(portfolio: pd.DataFrame, factors: list[FactorRow]) -> FitResult:
    """Regress daily strategy returns on the four factors with robust SEs."""
    fmap = {f.date: f for f in factors}
    missing = [d for d in portfolio["date"] if d not in fmap]
    if missing:
        raise ValueError(
            f"{len(missing)} portfolio dates missing from factors, first: {missing[0]}"
        )
    if len(portfolio) < 30:
        raise ValueError("need at least 30 overlapping observations")
    y = portfolio["ret"].to_numpy(dtype=float)
    F = np.array(
        [[fmap[d].mktrf, fmap[d].smb, fmap[d].hml, fmap[d].umd] for d in portfolio["date"]]
    )
    X = np.column_stack([np.ones(len(y)), F])
    terms = ["alpha", *FACTOR_NAMES]
    beta = _solve_ols(X, y, terms)
    u = y - X @ beta
    cov, _ = _cluster_covariance(X, u, None)
    se = np.sqrt(np.diag(cov))
    tvals = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(tvals), len(y) - X.shape[1])
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((u**2).sum()) / sst if sst > 0 else 0.0
    n, k = X.shape
    return FitResult(
        coef={t: float(b) for t, b in zip(terms, beta)},
        se={t: float(s) for t, s in zip(terms, se)},
        tstat={t: float(v) for t, v in zip(terms, tvals)},
        pvalue={t: float(p) for t, p in zip(terms, pvals)},
        adj_r2=1.0 - (1.0 - r2) * (n - 1) / (n - k),
        n_obs=n,
        term_order=terms,
    )
