"""Event-window construction and per-announcement aggregation into panel rows.

Announcements map to an event day 0 on the trading calendar (next trading
day for after-close announcements). Message-level emotion vectors and
sentiment scores are averaged per announcement window with follower, like,
or equal weights; market-data columns (abnormal returns, volatility) come
from a separately built event-study table keyed by announcement.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from . import EMOTION_CLASSES
from .corpus import (
    Announcement,
    DailyQuote,
    FactorRow,
    RawMessage,
    UserProfile,
    classify_information_channel,
)
from .econ import bhar, carhart_fit
from .weaklabel import SentimentScore

logger = logging.getLogger(__name__)


@dataclass
class EventWindow:
    announcement_key: str
    day0: date
    offsets: tuple[int, int]
    dates: list[date]


@dataclass
class AggregateConfig:
    pre_window: tuple[int, int] = (-10, -2)
    event_window: tuple[int, int] = (-1, 1)
    exret_windows: dict[str, tuple[int, int]] = field(
        default_factory=lambda: {
            "exret_m1_p1": (-1, 1),
            "exret_p2_p4": (2, 4),
            "exret_m10_m2": (-10, -2),
        }
    )
    weight_scheme: str = "follower"  # follower | like | equal
    min_users: int = 2
    est_length: int = 60
    est_gap: int = 5  # trading days between estimation end and day -10
    carhart_min_obs: int = 30
    vol_length: int = 126
    vol_gap: int = 10


def resolve_day0(ann: Announcement, calendar: list[date]) -> date:
    """Event day 0: the announcement's trading date for before-open news,
    the next trading date otherwise."""
    d = ann.announce_time.date()
    if not calendar or d < calendar[0] or d > calendar[-1]:
        raise ValueError(f"announcement date {d} outside the trading calendar")
    if ann.timing == "before_open":
        idx = bisect_left(calendar, d)
    else:
        idx = bisect_right(calendar, d)
    if idx >= len(calendar):
        raise ValueError(f"no trading date on or after {d}")
    return calendar[idx]


def resolve_window(
    ann: Announcement, calendar: list[date], offsets: tuple[int, int]
) -> EventWindow | None:
    """Trading dates covering [day0+a, day0+b]; None when off the calendar."""
    a, b = offsets
    if a > b:
        raise ValueError("window offsets must satisfy a <= b")
    day0 = resolve_day0(ann, calendar)
    i0 = calendar.index(day0)
    lo, hi = i0 + a, i0 + b
    if lo < 0 or hi >= len(calendar):
        return None
    return EventWindow(
        announcement_key=ann.key, day0=day0, offsets=offsets, dates=calendar[lo : hi + 1]
    )


def follower_weight(followers: float) -> float:
    """1 + ln(1 + follower count)."""
    if followers < 0:
        raise ValueError("follower count must be >= 0")
    return 1.0 + math.log(1.0 + followers)


def message_weight(msg: RawMessage, user: UserProfile | None, scheme: str) -> float:
    if scheme == "follower":
        return follower_weight(user.follower_count if user else 0)
    if scheme == "like":
        return 1.0 + math.log(1.0 + msg.like_count)
    if scheme == "equal":
        return 1.0
    raise ValueError(f"unknown weighting scheme {scheme!r}")


def aggregate_emotions(vectors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Componentwise weighted mean of per-message emotion vectors."""
    vectors = np.asarray(vectors, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if vectors.ndim != 2 or len(vectors) == 0:
        raise ValueError("need at least one emotion vector")
    if len(weights) != len(vectors):
        raise ValueError("weights and vectors differ in length")
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    return (vectors * weights[:, None]).sum(axis=0) / total


def aggregate_sentiment(scores: list[SentimentScore], weights: np.ndarray) -> float:
    """Net positive-minus-negative evidence, scaled by one plus the summed
    classified-class probabilities. Neutral messages are excluded."""
    weights = np.asarray(weights, dtype=float)
    if len(scores) != len(weights):
        raise ValueError("scores and weights differ in length")
    numerator = 0.0
    denom = 1.0
    for score, w in zip(scores, weights):
        if score.label == "positive":
            numerator += score.p_positive * w
            denom += score.p_positive
        elif score.label == "negative":
            q = 1.0 - score.p_positive
            numerator -= q * w
            denom += q
    return numerator / denom


def winsorize(series, lower: float = 0.01, upper: float = 0.99) -> np.ndarray:
    """Clamp at nearest-rank quantiles x_(ceil(p*n)); NaNs pass through."""
    if not 0.0 <= lower < upper <= 1.0:
        raise ValueError("need 0 <= lower < upper <= 1")
    arr = np.asarray(series, dtype=float)
    finite = arr[~np.isnan(arr)]
    if finite.size == 0:
        raise ValueError("cannot winsorize an empty series")
    ranked = np.sort(finite)
    n = len(ranked)

    def _nearest_rank(p: float) -> float:
        k = max(1, math.ceil(p * n))
        return float(ranked[k - 1])

    lo = _nearest_rank(lower)
    hi = _nearest_rank(upper)
    return np.clip(arr, lo, hi)


def volatility(returns) -> float | None:
    """Sample standard deviation (n-1 denominator) of daily returns."""
    arr = np.asarray(returns, dtype=float)
    if arr.size < 2:
        return None
    return float(np.std(arr, ddof=1))


# ---------------------------------------------------------------------------
# event-study table and panel assembly
# ---------------------------------------------------------------------------


def event_study(
    announcements: list[Announcement],
    quotes: list[DailyQuote],
    factors: list[FactorRow],
    config: AggregateConfig | None = None,
) -> pd.DataFrame:
    """Per-announcement factor fits, window abnormal returns, and volatility."""
    config = config or AggregateConfig()
    calendar = [f.date for f in factors]
    quotes_by_firm: dict[str, list[DailyQuote]] = {}
    for q in quotes:
        quotes_by_firm.setdefault(q.firm_id, []).append(q)
    for qs in quotes_by_firm.values():
        qs.sort(key=lambda q: q.date)

    records = []
    for ann in announcements:
        day0 = resolve_day0(ann, calendar)
        i0 = calendar.index(day0)
        firm_quotes = quotes_by_firm.get(ann.firm_id, [])
        record: dict[str, object] = {
            "ann_key": ann.key,
            "firm_id": ann.firm_id,
            "day0": day0,
            "n_est_obs": 0,
            "alpha": np.nan,
            "volatility": np.nan,
        }
        for name in config.exret_windows:
            record[name] = np.nan

        est_end_idx = i0 - 10 - config.est_gap
        est_start_idx = est_end_idx - config.est_length + 1
        if est_start_idx >= 0:
            est_window = (calendar[est_start_idx], calendar[est_end_idx])
            try:
                fit = carhart_fit(
                    firm_quotes, factors, est_window, min_obs=config.carhart_min_obs
                )
            except ValueError as exc:
                logger.info("factor fit skipped for %s: %s", ann.key, exc)
                fit = None
            if fit is not None:
                record["alpha"] = fit.alpha
                record["n_est_obs"] = fit.n_obs
                for bname, beta in zip(("mktrf", "smb", "hml", "umd"), fit.betas):
                    record[f"beta_{bname}"] = float(beta)
                for name, offsets in config.exret_windows.items():
                    window = resolve_window(ann, calendar, offsets)
                    if window is None:
                        continue
                    value = bhar(
                        firm_quotes, factors, fit, (window.dates[0], window.dates[-1])
                    )
                    record[name] = np.nan if value is None else value

        vol_end_idx = i0 - config.vol_gap
        vol_start_idx = vol_end_idx - config.vol_length + 1
        if vol_start_idx >= 0:
            lo, hi = calendar[vol_start_idx], calendar[vol_end_idx]
            rets = [q.ret for q in firm_quotes if lo <= q.date <= hi]
            vol = volatility(rets)
            record["volatility"] = np.nan if vol is None else vol
        records.append(record)
    return pd.DataFrame(records)


def assemble_panel(
    messages: list[RawMessage],
    users: list[UserProfile],
    announcements: list[Announcement],
    factors: list[FactorRow],
    emotion_vectors: dict[str, np.ndarray],
    sentiments: dict[str, SentimentScore],
    event_table: pd.DataFrame,
    config: AggregateConfig | None = None,
    message_filter=None,
) -> pd.DataFrame:
    """One panel row per announcement passing the distinct-user minimum.

    Variant panels (chat type, information channel, user attributes) are the
    same call with a message predicate.
    """
    config = config or AggregateConfig()
    calendar = [f.date for f in factors]
    users_by_id = {u.user_id: u for u in users}
    msgs_by_firm: dict[str, list[RawMessage]] = {}
    for m in messages:
        msgs_by_firm.setdefault(m.tickers[0], []).append(m)
    for ms in msgs_by_firm.values():
        ms.sort(key=lambda m: (m.timestamp, m.message_id))

    missing_vectors = [
        m.message_id for m in messages if m.message_id not in emotion_vectors
    ]
    if missing_vectors:
        raise KeyError(
            f"{len(missing_vectors)} messages lack emotion vectors, "
            f"first: {missing_vectors[0]}"
        )

    event_by_key = event_table.set_index("ann_key")
    unmatched = [a.key for a in announcements if a.key not in event_by_key.index]
    if unmatched:
        raise KeyError(
            f"{len(unmatched)} announcements missing from the event table, "
            f"first: {unmatched[0]}"
        )

    rows = []
    for ann in announcements:
        window = resolve_window(ann, calendar, config.pre_window)
        if window is None:
            continue
        day0 = window.day0

        def _window_messages(w: EventWindow) -> list[RawMessage]:
            lo, hi = w.dates[0], w.dates[-1]
            picked = []
            for m in msgs_by_firm.get(ann.firm_id, []):
                d = m.timestamp.date()
                if d < lo or d > hi:
                    continue
                user = users_by_id.get(m.user_id)
                if message_filter is not None and not message_filter(m, user):
                    continue
                picked.append(m)
            return picked

        pre_msgs = _window_messages(window)
        n_users = len({m.user_id for m in pre_msgs})
        if n_users < config.min_users:
            continue

        def _aggregate(msgs: list[RawMessage]) -> tuple[np.ndarray | None, float | None]:
            if not msgs:
                return None, None
            weights = np.array(
                [
                    message_weight(m, users_by_id.get(m.user_id), config.weight_scheme)
                    for m in msgs
                ]
            )
            vectors = np.array([emotion_vectors[m.message_id] for m in msgs])
            emo = aggregate_emotions(vectors, weights)
            sent = aggregate_sentiment(
                [sentiments[m.message_id] for m in msgs], weights
            )
            return emo, sent

        pre_emo, pre_sent = _aggregate(pre_msgs)
        evt_window = resolve_window(ann, calendar, config.event_window)
        evt_msgs = _window_messages(evt_window) if evt_window is not None else []
        evt_emo, evt_sent = _aggregate(evt_msgs)

        row: dict[str, object] = {
            "firm_id": ann.firm_id,
            "ann_key": ann.key,
            "day0": day0,
            "year": day0.year,
            "month": day0.month,
            "dow": day0.weekday(),
            "quarter_id": ann.quarter_id,
            "industry_ff48": ann.industry_ff48,
            "industry_quarter": f"{ann.industry_ff48}:{ann.quarter_id}",
            "n_messages": len(pre_msgs),
            "n_users": n_users,
            "sue": ann.sue,
            "sue_lag": ann.sue_lag,
            "loss": ann.loss,
            "analysts": ann.analysts,
            "inst": ann.inst,
            "size": ann.size,
            "mb": ann.mb,
            "q4": ann.q4,
        }
        for i, cls in enumerate(EMOTION_CLASSES):
            row[f"{cls}_pre"] = float(pre_emo[i]) if pre_emo is not None else np.nan
            row[f"{cls}_evt"] = float(evt_emo[i]) if evt_emo is not None else np.nan
        row["sentiment_pre"] = pre_sent if pre_sent is not None else np.nan
        row["sentiment_evt"] = evt_sent if evt_sent is not None else np.nan

        event_row = event_by_key.loc[ann.key]
        row["volatility"] = event_row["volatility"]
        for name in config.exret_windows:
            row[name] = event_row[name]
        rows.append(row)

    frame = pd.DataFrame(rows)
    if not frame.empty:
        frame = frame.sort_values(["firm_id", "day0"]).reset_index(drop=True)
    return frame


def message_count_profile(
    messages: list[RawMessage],
    announcements: list[Announcement],
    factors: list[FactorRow],
    max_offset: int = 15,
) -> pd.DataFrame:
    """Message counts by trading-day offset from day 0, for external plotting."""
    calendar = [f.date for f in factors]
    index = {d: i for i, d in enumerate(calendar)}
    counts = {k: 0 for k in range(-max_offset, max_offset + 1)}
    ann_by_firm: dict[str, list[int]] = {}
    for ann in announcements:
        ann_by_firm.setdefault(ann.firm_id, []).append(index[resolve_day0(ann, calendar)])
    for m in messages:
        d = m.timestamp.date()
        if d not in index:
            continue
        i = index[d]
        for i0 in ann_by_firm.get(m.tickers[0], []):
            offset = i - i0
            if -max_offset <= offset <= max_offset:
                counts[offset] += 1
    return pd.DataFrame(
        {"offset": list(counts.keys()), "n_messages": list(counts.values())}
    )


# named user-attribute predicates from the heterogeneity analyses
USER_SUBSETS = {
    "technical": lambda m, u: u is not None and u.approach in ("technical", "momentum"),
    "fundamental_users": lambda m, u: u is not None and u.approach in ("fundamental", "value"),
    "long_term": lambda m, u: u is not None and u.holding_period == "long_term",
    "short_term": lambda m, u: u is not None and u.holding_period == "day",
    "professional": lambda m, u: u is not None and u.experience == "professional",
    "intermediate": lambda m, u: u is not None and u.experience == "intermediate",
    "novice": lambda m, u: u is not None and u.experience == "novice",
    "institution": lambda m, u: u is not None and u.account_type == "institution",
    "trader": lambda m, u: u is not None and u.account_type == "trader",
}


def channel_filter(channel: str):
    return lambda m, u: classify_information_channel(m) == channel


def chat_type_filter(chat_types: dict[str, str], wanted: set[str]):
    return lambda m, u: chat_types.get(m.message_id) in wanted


def popularity_filter(users: list[UserProfile], top: bool, fraction: float = 0.05):
    counts = sorted(u.follower_count for u in users)
    if not counts:
        raise ValueError("no users")
    k = max(1, math.ceil((1.0 - fraction) * len(counts)))
    threshold = counts[k - 1]
    if top:
        return lambda m, u: u is not None and u.follower_count >= threshold
    return lambda m, u: u is not None and u.follower_count < threshold
