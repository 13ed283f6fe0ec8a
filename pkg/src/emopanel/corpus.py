"""Data model and ingestion for messages, users, and market data.

Messages and user profiles travel as JSONL; quotes, factors, and
announcements as CSV with ISO-8601 dates. Sample filtering applies the
exchange/single-ticker/automation/match/min-user restrictions in order and
reports stage-by-stage retention counts.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

logger = logging.getLogger(__name__)

SENTIMENT_TAGS = {"bullish", "bearish", "unclassified"}
EXPERIENCE_LEVELS = {"novice", "intermediate", "professional", "unknown"}
APPROACHES = {"technical", "fundamental", "momentum", "value", "growth", "macro", "unknown"}
HOLDING_PERIODS = {"day", "swing", "position", "long_term", "unknown"}
ACCOUNT_TYPES = {"institution", "trader", "unknown"}
TIMINGS = {"before_open", "after_close"}

AUTOMATED_THRESHOLD = 1000


class CorpusError(ValueError):
    """Raised for malformed or inconsistent input records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass
class RawMessage:
    message_id: str
    user_id: str
    tickers: list[str]
    text: str
    timestamp: datetime
    like_count: int = 0
    is_retweet: bool = False
    has_hyperlink: bool = False
    author_sentiment_tag: str = "unclassified"

    def __post_init__(self) -> None:
        if not self.tickers:
            raise CorpusError(f"message {self.message_id}: tickers must be non-empty")
        if self.like_count < 0:
            raise CorpusError(f"message {self.message_id}: like_count must be >= 0")
        if isinstance(self.timestamp, str):
            self.timestamp = _parse_timestamp(self.timestamp)
        elif self.timestamp.tzinfo is None:
            self.timestamp = self.timestamp.replace(tzinfo=timezone.utc)
        else:
            self.timestamp = self.timestamp.astimezone(timezone.utc)
        if self.author_sentiment_tag not in SENTIMENT_TAGS:
            raise CorpusError(
                f"message {self.message_id}: bad sentiment tag {self.author_sentiment_tag!r}"
            )


@dataclass
class UserProfile:
    user_id: str
    follower_count: int = 0
    experience: str = "unknown"
    approach: str = "unknown"
    holding_period: str = "unknown"
    account_type: str = "unknown"

    def __post_init__(self) -> None:
        if self.follower_count < 0:
            raise CorpusError(f"user {self.user_id}: follower_count must be >= 0")
        for attr, allowed in (
            ("experience", EXPERIENCE_LEVELS),
            ("approach", APPROACHES),
            ("holding_period", HOLDING_PERIODS),
            ("account_type", ACCOUNT_TYPES),
        ):
            if getattr(self, attr) not in allowed:
                raise CorpusError(f"user {self.user_id}: bad {attr} {getattr(self, attr)!r}")


@dataclass
class Announcement:
    firm_id: str
    announce_time: datetime
    timing: str
    sue: float
    sue_lag: float
    loss: int
    analysts: float
    inst: float
    size: float
    mb: float
    q4: int
    industry_ff48: int
    quarter_id: str

    def __post_init__(self) -> None:
        if isinstance(self.announce_time, str):
            self.announce_time = _parse_timestamp(self.announce_time)
        if self.timing not in TIMINGS:
            raise CorpusError(f"announcement {self.firm_id}: bad timing {self.timing!r}")
        if not 0.0 <= self.inst <= 1.0:
            raise CorpusError(f"announcement {self.firm_id}: inst outside [0, 1]")
        if not 1 <= self.industry_ff48 <= 48:
            raise CorpusError(f"announcement {self.firm_id}: industry_ff48 outside 1..48")

    @property
    def key(self) -> str:
        return f"{self.firm_id}:{self.announce_time.date().isoformat()}"


@dataclass
class DailyQuote:
    firm_id: str
    date: date
    ret: float
    bid: float | None = None
    ask: float | None = None

    def __post_init__(self) -> None:
        if isinstance(self.date, str):
            self.date = date.fromisoformat(self.date)
        if self.ret <= -1:
            raise CorpusError(f"quote {self.firm_id}/{self.date}: ret must exceed -1")
        if self.bid is not None and self.ask is not None:
            if not self.ask >= self.bid > 0:
                raise CorpusError(f"quote {self.firm_id}/{self.date}: need ask >= bid > 0")


@dataclass
class FactorRow:
    date: date
    mktrf: float
    smb: float
    hml: float
    umd: float
    rf: float

    def __post_init__(self) -> None:
        if isinstance(self.date, str):
            self.date = date.fromisoformat(self.date)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

_MESSAGE_FIELDS = {
    "message_id", "user_id", "tickers", "text", "timestamp",
    "like_count", "is_retweet", "has_hyperlink", "author_sentiment_tag",
}
_REQUIRED_MESSAGE_FIELDS = {"message_id", "user_id", "tickers", "text", "timestamp"}


def load_corpus(
    messages_path: Path, users_path: Path
) -> tuple[list[RawMessage], list[UserProfile]]:
    """Parse the JSONL corpus; malformed lines raise with their line number.

    User-id coverage of messages is reported via logging but not enforced.
    """
    messages: list[RawMessage] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(_iter_lines(messages_path), start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        missing = _REQUIRED_MESSAGE_FIELDS - record.keys()
        if missing:
            raise CorpusError(f"missing fields {sorted(missing)}", line=lineno)
        unknown = record.keys() - _MESSAGE_FIELDS
        if unknown:
            raise CorpusError(f"unknown fields {sorted(unknown)}", line=lineno)
        try:
            msg = RawMessage(**record)
        except (CorpusError, TypeError, ValueError) as exc:
            raise CorpusError(str(exc), line=lineno) from exc
        if msg.message_id in seen_ids:
            raise CorpusError(f"duplicate message_id {msg.message_id!r}", line=lineno)
        seen_ids.add(msg.message_id)
        messages.append(msg)

    users: list[UserProfile] = []
    seen_users: set[str] = set()
    for lineno, line in enumerate(_iter_lines(users_path), start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        try:
            user = UserProfile(**record)
        except (CorpusError, TypeError, ValueError) as exc:
            raise CorpusError(str(exc), line=lineno) from exc
        if user.user_id in seen_users:
            raise CorpusError(f"duplicate user_id {user.user_id!r}", line=lineno)
        seen_users.add(user.user_id)
        users.append(user)

    known = {u.user_id for u in users}
    orphans = sum(1 for m in messages if m.user_id not in known)
    if orphans:
        logger.warning("%d of %d messages reference unknown user ids", orphans, len(messages))
    return messages, users


def _iter_lines(path: Path) -> Iterable[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield line


def load_quotes(path: Path) -> list[DailyQuote]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                DailyQuote(
                    firm_id=rec["firm_id"],
                    date=rec["date"],
                    ret=float(rec["ret"]),
                    bid=float(rec["bid"]) if rec.get("bid") else None,
                    ask=float(rec["ask"]) if rec.get("ask") else None,
                )
            )
    return rows


def load_factors(path: Path) -> list[FactorRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                FactorRow(
                    date=rec["date"],
                    mktrf=float(rec["mktrf"]),
                    smb=float(rec["smb"]),
                    hml=float(rec["hml"]),
                    umd=float(rec["umd"]),
                    rf=float(rec["rf"]),
                )
            )
    dates = [r.date for r in rows]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise CorpusError("factor dates must be strictly increasing")
    return rows


def load_announcements(path: Path) -> list[Announcement]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                Announcement(
                    firm_id=rec["firm_id"],
                    announce_time=rec["announce_time"],
                    timing=rec["timing"],
                    sue=float(rec["sue"]),
                    sue_lag=float(rec["sue_lag"]),
                    loss=int(rec["loss"]),
                    analysts=float(rec["analysts"]),
                    inst=float(rec["inst"]),
                    size=float(rec["size"]),
                    mb=float(rec["mb"]),
                    q4=int(rec["q4"]),
                    industry_ff48=int(rec["industry_ff48"]),
                    quarter_id=rec["quarter_id"],
                )
            )
    return rows


def write_messages(path: Path, messages: list[RawMessage]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in messages:
            fh.write(
                json.dumps(
                    {
                        "message_id": m.message_id,
                        "user_id": m.user_id,
                        "tickers": m.tickers,
                        "text": m.text,
                        "timestamp": m.timestamp.isoformat(),
                        "like_count": m.like_count,
                        "is_retweet": m.is_retweet,
                        "has_hyperlink": m.has_hyperlink,
                        "author_sentiment_tag": m.author_sentiment_tag,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_users(path: Path, users: list[UserProfile]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in users:
            fh.write(
                json.dumps(
                    {
                        "user_id": u.user_id,
                        "follower_count": u.follower_count,
                        "experience": u.experience,
                        "approach": u.approach,
                        "holding_period": u.holding_period,
                        "account_type": u.account_type,
                    }
                )
                + "\n"
            )


def write_quotes(path: Path, quotes: list[DailyQuote]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["firm_id", "date", "ret", "bid", "ask"])
        for q in quotes:
            writer.writerow(
                [q.firm_id, q.date.isoformat(), repr(q.ret),
                 "" if q.bid is None else repr(q.bid),
                 "" if q.ask is None else repr(q.ask)]
            )


def write_factors(path: Path, factors: list[FactorRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "mktrf", "smb", "hml", "umd", "rf"])
        for f in factors:
            writer.writerow(
                [f.date.isoformat(), repr(f.mktrf), repr(f.smb), repr(f.hml),
                 repr(f.umd), repr(f.rf)]
            )


def write_announcements(path: Path, announcements: list[Announcement]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["firm_id", "announce_time", "timing", "sue", "sue_lag", "loss",
             "analysts", "inst", "size", "mb", "q4", "industry_ff48", "quarter_id"]
        )
        for a in announcements:
            writer.writerow(
                [a.firm_id, a.announce_time.isoformat(), a.timing, repr(a.sue),
                 repr(a.sue_lag), a.loss, repr(a.analysts), repr(a.inst),
                 repr(a.size), repr(a.mb), a.q4, a.industry_ff48, a.quarter_id]
            )


# ---------------------------------------------------------------------------
# sample restrictions
# ---------------------------------------------------------------------------

LISTED_EXCHANGES = {"NASDAQ", "NYSE"}


def _default_normalizer(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass
class FilterResult:
    messages: list[RawMessage]
    stages: list[tuple[str, int]] = field(default_factory=list)


def filter_sample(
    messages: list[RawMessage],
    users: list[UserProfile],
    listing: dict[str, str],
    matched: set[str],
    window_user_min: int = 2,
    automated_threshold: int = AUTOMATED_THRESHOLD,
    normalizer: Callable[[str], str] | None = None,
    window_key: Callable[[RawMessage], object] | None = None,
) -> FilterResult:
    """Apply the sample restrictions in their documented order.

    Stages: NASDAQ/NYSE listing, single ticker, automation screen (identical
    normalized text from one user more than `automated_threshold` times
    across the corpus), IBES/CRSP match, and the per-group distinct-user
    minimum. `window_key` controls the grouping for that last stage and
    defaults to the message's ticker.
    """
    if window_user_min < 1:
        raise ValueError("window_user_min must be >= 1")
    normalizer = normalizer or _default_normalizer
    window_key = window_key or (lambda m: m.tickers[0])
    stages: list[tuple[str, int]] = [("Input", len(messages))]

    kept = [
        m for m in messages
        if any(listing.get(t) in LISTED_EXCHANGES for t in m.tickers)
    ]
    stages.append(("NASDAQ/NYSE Ticker", len(kept)))

    kept = [m for m in kept if len(m.tickers) == 1]
    stages.append(("Single Ticker", len(kept)))

    # the automation screen counts over the whole input corpus, not the
    # surviving subset
    post_counts: Counter[tuple[str, str]] = Counter()
    for m in messages:
        post_counts[(m.user_id, normalizer(m.text))] += 1
    kept = [
        m for m in kept
        if post_counts[(m.user_id, normalizer(m.text))] <= automated_threshold
    ]
    stages.append(("Not Automated", len(kept)))

    kept = [m for m in kept if m.tickers[0] in matched]
    stages.append(("IBES/CRSP Ticker", len(kept)))

    group_users: dict[object, set[str]] = defaultdict(set)
    for m in kept:
        group_users[window_key(m)].add(m.user_id)
    kept = [m for m in kept if len(group_users[window_key(m)]) >= window_user_min]
    stages.append(("Min Users per Group", len(kept)))

    return FilterResult(messages=kept, stages=stages)


def classify_information_channel(msg: RawMessage) -> str:
    """'original' when neither a retweet nor carrying a hyperlink."""
    return "original" if not msg.is_retweet and not msg.has_hyperlink else "dissemination"
