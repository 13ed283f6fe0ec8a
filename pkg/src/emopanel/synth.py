"""Deterministic synthetic corpus and market-data generator.

Messages are drawn from the shipped emotion dictionaries so their true
class is known; daily returns follow a four-factor model with configurable
betas and idiosyncratic noise; announcement-window returns are perturbed by
a planted coefficient times the follower-weighted happy share, giving the
regressions a known ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from . import EMOTION_CLASSES
from .corpus import Announcement, DailyQuote, FactorRow, RawMessage, UserProfile
from .textnorm import load_tables
from .weaklabel import load_dictionaries

TRADING_DAYS_PER_QUARTER = 63

# Filler vocabularies are disjoint from every labeling dictionary. Neutral
# fillers never co-occur with tagged polar messages, so the sentiment model
# carries no evidence about them.
NEUTRAL_FILLER = (
    "the market opened for today watching this name at close level line price "
    "same patterns filed a release and financial exhibit just looking here "
    "still waiting news week month again even new first two how our work well"
).split()
EMO_FILLER = (
    "stock day now it is up down we are on to go going big really very much "
    "more so out in buy sell hold them they i my was had been see look time"
).split()


@dataclass
class SynthConfig:
    planted_happy_exret: float = -0.5   # percent EXRET[-1,1] per unit happy share
    planted_happy_sue: float = 0.0      # SUE shift per unit happy share
    betas: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    idio_sigma: float = 0.008
    firm_effect_sigma: float = 0.25     # percent; time-invariant event-day bump
    rf_daily: float = 0.0001
    factor_sigma: tuple[float, float, float, float] = (0.01, 0.005, 0.005, 0.004)
    spread: float = 0.002
    messages_per_window: int = 22
    sue_mean: float = 1.0
    sue_sigma: float = 2.0
    emotion_mix: tuple[float, ...] = (0.42, 0.25, 0.06, 0.05, 0.05, 0.08, 0.09)
    mix_concentration: float = 9.0
    start_year: int = 2015
    lead_days: int = 90                 # trading days of history before quarter 1
    include_junk: bool = True           # sprinkle messages the filters must drop
    automated_copies: int = 0           # identical posts by one bot user


@dataclass
class SynthTruth:
    message_class: dict[str, str] = field(default_factory=dict)
    happy_pre: dict[str, float] = field(default_factory=dict)
    mix: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class SynthData:
    messages: list[RawMessage]
    users: list[UserProfile]
    announcements: list[Announcement]
    quotes: list[DailyQuote]
    factors: list[FactorRow]
    truth: SynthTruth


def _trading_calendar(start: date, n_days: int) -> list[date]:
    days = []
    d = start
    while len(days) < n_days:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def _class_entries() -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Word entries and emoji-character decorations per emotion class."""
    dicts, _ = load_dictionaries()
    tables = load_tables()
    emoji_tokens = set(tables.emoticons.values()) | set(tables.emoji.values())
    words: dict[str, list[str]] = {}
    for cls, entries in dicts.by_class.items():
        if cls == "neutral":
            continue
        words[cls] = sorted(
            " ".join(p) for p in entries if not (len(p) == 1 and p[0] in emoji_tokens)
        )
    token_class = {
        p[0]: cls
        for cls, entries in dicts.by_class.items()
        for p in entries
        if len(p) == 1
    }
    emoji_chars: dict[str, list[str]] = {cls: [] for cls in words}
    for char, name in tables.emoji.items():
        cls = token_class.get(name)
        if cls in emoji_chars:
            emoji_chars[cls].append(char)
    for cls in emoji_chars:
        emoji_chars[cls] = sorted(set(emoji_chars[cls]))
    return words, emoji_chars


def _message_text(
    rng: np.random.Generator,
    cls: str,
    words: dict[str, list[str]],
    emoji_chars: dict[str, list[str]],
) -> str:
    if cls == "neutral":
        k = int(rng.integers(4, 9))
        toks = [NEUTRAL_FILLER[i] for i in rng.integers(0, len(NEUTRAL_FILLER), k)]
        return " ".join(toks)
    entry = words[cls][int(rng.integers(0, len(words[cls])))]
    fillers = [EMO_FILLER[i] for i in rng.integers(0, len(EMO_FILLER), int(rng.integers(2, 6)))]
    parts = fillers[: len(fillers) // 2] + [entry] + fillers[len(fillers) // 2 :]
    if emoji_chars[cls] and rng.random() < 0.25:
        parts.append(emoji_chars[cls][int(rng.integers(0, len(emoji_chars[cls])))])
    if rng.random() < 0.15:
        parts.append(f"${int(rng.integers(2, 500))}")
    return " ".join(parts)


_TAG_BY_CLASS = {
    "neutral": "unclassified",
    "happy": "bullish",
    "sad": "bearish",
    "anger": "bearish",
    "disgust": "bearish",
    "surprise": "unclassified",
    "fear": "bearish",
}


def synth_generate(
    seed: int,
    n_firms: int,
    n_quarters: int,
    n_users: int,
    planted: SynthConfig | None = None,
) -> SynthData:
    """Build the full synthetic dataset; identical seeds give identical output."""
    if min(n_firms, n_quarters, n_users) < 1:
        raise ValueError("sizes must be >= 1")
    cfg = planted or SynthConfig()
    rng = np.random.default_rng(seed)
    words, emoji_chars = _class_entries()

    n_days = cfg.lead_days + TRADING_DAYS_PER_QUARTER * n_quarters + 10
    calendar = _trading_calendar(date(cfg.start_year - 1, 7, 1), n_days)
    date_index = {d: i for i, d in enumerate(calendar)}

    factor_matrix = np.column_stack(
        [rng.normal(0.0, s, size=n_days) for s in cfg.factor_sigma]
    )
    factors = [
        FactorRow(
            date=calendar[t],
            mktrf=float(factor_matrix[t, 0]),
            smb=float(factor_matrix[t, 1]),
            hml=float(factor_matrix[t, 2]),
            umd=float(factor_matrix[t, 3]),
            rf=cfg.rf_daily,
        )
        for t in range(n_days)
    ]

    users = []
    for i in range(n_users):
        followers = int(min(rng.lognormal(3.0, 1.5), 1_000_000))
        users.append(
            UserProfile(
                user_id=f"u{i:05d}",
                follower_count=followers,
                experience=str(rng.choice(
                    ["novice", "intermediate", "professional", "unknown"],
                    p=[0.3, 0.3, 0.2, 0.2],
                )),
                approach=str(rng.choice(
                    ["technical", "fundamental", "momentum", "value", "growth", "macro", "unknown"],
                    p=[0.25, 0.2, 0.1, 0.1, 0.1, 0.05, 0.2],
                )),
                holding_period=str(rng.choice(
                    ["day", "swing", "position", "long_term", "unknown"],
                    p=[0.25, 0.25, 0.15, 0.15, 0.2],
                )),
                account_type=str(rng.choice(
                    ["institution", "trader", "unknown"], p=[0.1, 0.7, 0.2]
                )),
            )
        )
    followers_by_user = {u.user_id: u.follower_count for u in users}

    firms = [f"FIRM{i:03d}" for i in range(n_firms)]
    firm_effects = rng.normal(0.0, cfg.firm_effect_sigma, size=n_firms)
    industries = rng.integers(1, 49, size=n_firms)

    betas = np.asarray(cfg.betas, dtype=float)
    base_returns = (
        cfg.rf_daily
        + factor_matrix @ betas
        + rng.normal(0.0, cfg.idio_sigma, size=(n_firms, n_days))
    )

    messages: list[RawMessage] = []
    announcements: list[Announcement] = []
    truth = SynthTruth()
    msg_counter = 0
    prev_sue = {f: None for f in firms}

    for q in range(n_quarters):
        for fi, firm in enumerate(firms):
            ann_idx = cfg.lead_days + q * TRADING_DAYS_PER_QUARTER + 55
            ann_date = calendar[ann_idx]
            timing = "before_open" if rng.random() < 0.5 else "after_close"
            day0_idx = ann_idx if timing == "before_open" else ann_idx + 1
            ann_time = datetime.combine(
                ann_date,
                time(8, 0) if timing == "before_open" else time(17, 30),
                tzinfo=timezone.utc,
            )

            mix = rng.dirichlet(np.asarray(cfg.emotion_mix) * cfg.mix_concentration)
            ann_key = f"{firm}:{ann_date.isoformat()}"
            truth.mix[ann_key] = mix

            window_msgs: list[tuple[str, str]] = []  # (user_id, class)
            w_happy = 0.0
            w_total = 0.0
            for window_offsets, count in (
                ((-10, -2), max(3, int(rng.poisson(cfg.messages_per_window)))),
                ((-1, 1), max(2, int(rng.poisson(cfg.messages_per_window / 2)))),
            ):
                user_ids = rng.integers(0, n_users, size=count)
                user_ids[1] = (user_ids[0] + 1) % n_users  # force >= 2 distinct users
                day_offsets = rng.integers(window_offsets[0], window_offsets[1] + 1, size=count)
                classes = rng.choice(len(EMOTION_CLASSES), size=count, p=mix)
                for j in range(count):
                    cls = EMOTION_CLASSES[classes[j]]
                    user_id = f"u{user_ids[j]:05d}"
                    msg_day = calendar[day0_idx + int(day_offsets[j])]
                    msg_id = f"m{msg_counter:07d}"
                    msg_counter += 1
                    messages.append(
                        RawMessage(
                            message_id=msg_id,
                            user_id=user_id,
                            tickers=[firm],
                            text=_message_text(rng, cls, words, emoji_chars),
                            timestamp=datetime.combine(
                                msg_day,
                                time(int(rng.integers(9, 16)), int(rng.integers(0, 60))),
                                tzinfo=timezone.utc,
                            ),
                            like_count=int(rng.poisson(2)),
                            is_retweet=bool(rng.random() < 0.2),
                            has_hyperlink=bool(rng.random() < 0.15),
                            author_sentiment_tag=_TAG_BY_CLASS[cls],
                        )
                    )
                    truth.message_class[msg_id] = cls
                    if window_offsets == (-10, -2):
                        window_msgs.append((user_id, cls))
                        w = 1.0 + math.log(1.0 + followers_by_user[user_id])
                        w_total += w
                        if cls == "happy":
                            w_happy += w

            happy_share = w_happy / w_total if w_total else 0.0
            truth.happy_pre[ann_key] = happy_share

            sue = (
                cfg.sue_mean
                + cfg.sue_sigma * rng.normal()
                + cfg.planted_happy_sue * happy_share
            )
            sue_lag = prev_sue[firm]
            if sue_lag is None:
                sue_lag = cfg.sue_mean + cfg.sue_sigma * rng.normal()
            prev_sue[firm] = sue

            announcements.append(
                Announcement(
                    firm_id=firm,
                    announce_time=ann_time,
                    timing=timing,
                    sue=sue,
                    sue_lag=sue_lag,
                    loss=int(rng.random() < 0.3),
                    analysts=float(np.log1p(rng.poisson(8))),
                    inst=float(rng.uniform(0.0, 1.0)),
                    size=float(rng.normal(7.7, 1.8)),
                    mb=float(abs(rng.normal(4.0, 3.0))),
                    q4=int(q % 4 == 3),
                    industry_ff48=int(industries[fi]),
                    quarter_id=f"{ann_date.year}Q{(ann_date.month - 1) // 3 + 1}",
                )
            )

            # plant the event-day effect: three equal daily increments whose
            # compounded sum approximates the target percent EXRET
            bump_pct = cfg.planted_happy_exret * happy_share + firm_effects[fi]
            daily_bump = bump_pct / 100.0 / 3.0
            for offset in (-1, 0, 1):
                base_returns[fi, day0_idx + offset] += daily_bump

    if cfg.include_junk:
        junk_specs = [
            (["FIRM000", "OTCX"], "two tickers mentioned here"),
            (["OTCX"], "only an unlisted ticker"),
            (["FIRM000", firms[-1]], "pair trade chatter"),
        ]
        for j, (tickers, text) in enumerate(junk_specs):
            messages.append(
                RawMessage(
                    message_id=f"junk{j:03d}",
                    user_id="u00000",
                    tickers=tickers,
                    text=text,
                    timestamp=datetime.combine(
                        calendar[cfg.lead_days + 5], time(12, 0), tzinfo=timezone.utc
                    ),
                    author_sentiment_tag="unclassified",
                )
            )
            truth.message_class[f"junk{j:03d}"] = "neutral"

    if cfg.automated_copies > 0:
        bot_day = calendar[cfg.lead_days + 3]
        for j in range(cfg.automated_copies):
            messages.append(
                RawMessage(
                    message_id=f"bot{j:05d}",
                    user_id="u00000",
                    tickers=[firms[0]],
                    text="automated ticker update posted on schedule",
                    timestamp=datetime.combine(
                        bot_day, time(6, (j * 7) % 60), tzinfo=timezone.utc
                    ),
                    author_sentiment_tag="unclassified",
                )
            )
            truth.message_class[f"bot{j:05d}"] = "neutral"

    quotes: list[DailyQuote] = []
    for fi, firm in enumerate(firms):
        price = 100.0
        for t in range(n_days):
            r = float(base_returns[fi, t])
            price *= 1.0 + r
            quotes.append(
                DailyQuote(
                    firm_id=firm,
                    date=calendar[t],
                    ret=r,
                    bid=price * (1.0 - cfg.spread / 2.0),
                    ask=price * (1.0 + cfg.spread / 2.0),
                )
            )

    messages.sort(key=lambda m: (m.timestamp, m.message_id))
    return SynthData(
        messages=messages,
        users=users,
        announcements=announcements,
        quotes=quotes,
        factors=factors,
        truth=truth,
    )
