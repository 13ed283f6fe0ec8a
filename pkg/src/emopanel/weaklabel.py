"""Dictionary-driven weak supervision with a Naive Bayes sentiment gate.

Emotion labels come from per-class word/phrase dictionaries; a candidate
label is only emitted when the message's sentiment polarity agrees with the
emotion's valence (surprise is exempt). Messages with no dictionary hit and
neutral sentiment become neutral; everything else abstains.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import EMOTION_CLASSES

POSITIVE_THRESHOLD = 0.51
NEGATIVE_THRESHOLD = 0.49

POSITIVE_EMOTIONS = frozenset({"happy"})
NEGATIVE_EMOTIONS = frozenset({"sad", "anger", "disgust", "fear"})
GATE_EXEMPT = frozenset({"surprise"})

ABSTAIN = "abstain"

Phrase = tuple[str, ...]


def _parse_entries(lines: list[str]) -> frozenset[Phrase]:
    entries = set()
    for line in lines:
        line = line.strip().lower()
        if line:
            entries.add(tuple(line.split()))
    return frozenset(entries)


@dataclass(frozen=True)
class EmotionDictionaries:
    """Word/phrase sets for the six non-neutral emotions (neutral stays empty)."""

    by_class: dict[str, frozenset[Phrase]]

    def __post_init__(self) -> None:
        for cls in EMOTION_CLASSES:
            if cls not in self.by_class:
                raise ValueError(f"missing dictionary for class {cls!r}")
        if self.by_class["neutral"]:
            raise ValueError("the neutral dictionary must be empty")
        seen: dict[Phrase, str] = {}
        for cls, entries in self.by_class.items():
            if cls != "neutral" and not entries:
                raise ValueError(f"dictionary for {cls!r} is empty")
            for phrase in entries:
                if phrase in seen:
                    raise ValueError(
                        f"entry {' '.join(phrase)!r} appears in both "
                        f"{seen[phrase]!r} and {cls!r}"
                    )
                seen[phrase] = cls

    @property
    def all_single_tokens(self) -> frozenset[str]:
        return frozenset(p[0] for e in self.by_class.values() for p in e if len(p) == 1)


@dataclass(frozen=True)
class InfoDictionaries:
    fundamental: frozenset[Phrase]
    earnings: frozenset[Phrase]

    def __post_init__(self) -> None:
        if not self.fundamental or not self.earnings:
            raise ValueError("info dictionaries must be non-empty")
        if self.fundamental & self.earnings:
            raise ValueError("fundamental and earnings dictionaries overlap")


def load_dictionaries(root: Path | None = None) -> tuple[EmotionDictionaries, InfoDictionaries]:
    """Read <class>.txt files, defaulting to the packaged dictionaries."""
    if root is None:
        root = Path(str(resources.files("emopanel") / "data" / "dictionaries"))
    root = Path(root)

    def _read(name: str) -> frozenset[Phrase]:
        return _parse_entries((root / f"{name}.txt").read_text(encoding="utf-8").splitlines())

    by_class = {cls: _read(cls) for cls in EMOTION_CLASSES if cls != "neutral"}
    by_class["neutral"] = frozenset()
    info = InfoDictionaries(fundamental=_read("fundamental"), earnings=_read("earnings"))
    return EmotionDictionaries(by_class=by_class), info


@dataclass(frozen=True)
class SentimentScore:
    p_positive: float
    label: str = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_positive <= 1.0:
            raise ValueError("p_positive must lie in [0, 1]")
        if self.p_positive > POSITIVE_THRESHOLD:
            label = "positive"
        elif self.p_positive < NEGATIVE_THRESHOLD:
            label = "negative"
        else:
            label = "neutral"
        object.__setattr__(self, "label", label)


class NBModel:
    """Multinomial Naive Bayes over tokens for positive/negative polarity.

    Tokens never seen in training carry no evidence and are ignored at
    scoring time, mirroring feature-based NB classifiers.
    """

    def __init__(
        self,
        log_prior_pos: float,
        log_prior_neg: float,
        log_lik_pos: dict[str, float],
        log_lik_neg: dict[str, float],
        vocabulary: frozenset[str],
    ) -> None:
        self.log_prior_pos = log_prior_pos
        self.log_prior_neg = log_prior_neg
        self.log_lik_pos = log_lik_pos
        self.log_lik_neg = log_lik_neg
        self.vocabulary = vocabulary

    @property
    def prior_positive(self) -> float:
        return math.exp(self.log_prior_pos)

    def score(self, tokens: list[str], exclude: frozenset[str] = frozenset()) -> float:
        """Posterior probability that the token list is positive."""
        lp = self.log_prior_pos
        ln = self.log_prior_neg
        for tok in tokens:
            if tok in exclude or tok not in self.vocabulary:
                continue
            lp += self.log_lik_pos[tok]
            ln += self.log_lik_neg[tok]
        m = max(lp, ln)
        return math.exp(lp - m) / (math.exp(lp - m) + math.exp(ln - m))


def nb_train(
    labeled: list[tuple[list[str], str]],
    smoothing: float = 1.0,
    balanced_priors: bool = False,
) -> NBModel:
    """Fit the NB polarity model with additive smoothing.

    Priors follow class frequencies unless `balanced_priors` forces them
    to 0.5 each (useful when the neutral band must be stable under class
    imbalance).
    """
    if smoothing <= 0:
        raise ValueError("smoothing must be > 0")
    pos_counts: Counter[str] = Counter()
    neg_counts: Counter[str] = Counter()
    n_pos = n_neg = 0
    for tokens, polarity in labeled:
        if polarity == "pos":
            pos_counts.update(tokens)
            n_pos += 1
        elif polarity == "neg":
            neg_counts.update(tokens)
            n_neg += 1
        else:
            raise ValueError(f"unknown polarity {polarity!r}")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training data must contain both polarities")

    vocab = frozenset(pos_counts) | frozenset(neg_counts)
    v = len(vocab)
    tot_pos = sum(pos_counts.values())
    tot_neg = sum(neg_counts.values())
    log_lik_pos = {
        w: math.log((pos_counts[w] + smoothing) / (tot_pos + smoothing * v)) for w in vocab
    }
    log_lik_neg = {
        w: math.log((neg_counts[w] + smoothing) / (tot_neg + smoothing * v)) for w in vocab
    }
    if balanced_priors:
        lp = ln = math.log(0.5)
    else:
        lp = math.log(n_pos / (n_pos + n_neg))
        ln = math.log(n_neg / (n_pos + n_neg))
    return NBModel(lp, ln, log_lik_pos, log_lik_neg, vocab)


def sentiment_classify(
    model: NBModel, tokens: list[str], neutral_tokens: frozenset[str] = frozenset()
) -> SentimentScore:
    """Threshold the NB posterior into positive/neutral/negative.

    `neutral_tokens` (emoticon and emoji translations) are excluded from the
    evidence; a message with no usable evidence scores exactly 0.5.
    """
    evidence = [t for t in tokens if t not in neutral_tokens and t in model.vocabulary]
    if not evidence:
        return SentimentScore(p_positive=0.5)
    return SentimentScore(p_positive=model.score(evidence))


def match_classes(tokens: list[str], dicts: EmotionDictionaries) -> set[str]:
    """Emotion classes whose dictionary matches a token or contiguous phrase."""
    token_set = set(tokens)
    hits = set()
    n = len(tokens)
    for cls, entries in dicts.by_class.items():
        for phrase in entries:
            if len(phrase) == 1:
                if phrase[0] in token_set:
                    hits.add(cls)
                    break
            else:
                k = len(phrase)
                if k <= n and any(
                    tuple(tokens[i : i + k]) == phrase for i in range(n - k + 1)
                ):
                    hits.add(cls)
                    break
    return hits


def label_emotion(
    tokens: list[str], dicts: EmotionDictionaries, sentiment: SentimentScore
) -> str | None:
    """Weak emotion label for one normalized message; None means abstain."""
    hits = match_classes(tokens, dicts)
    if len(hits) == 0:
        return "neutral" if sentiment.label == "neutral" else None
    if len(hits) > 1:
        return None
    cls = next(iter(hits))
    if cls in POSITIVE_EMOTIONS and sentiment.label != "positive":
        return None
    if cls in NEGATIVE_EMOTIONS and sentiment.label != "negative":
        return None
    return cls


def label_chat_type(tokens: list[str], dicts: InfoDictionaries) -> str:
    """Coarse information-content label: earnings beats fundamental beats chat."""

    def _any_hit(entries: frozenset[Phrase]) -> bool:
        token_set = set(tokens)
        n = len(tokens)
        for phrase in entries:
            if len(phrase) == 1:
                if phrase[0] in token_set:
                    return True
            else:
                k = len(phrase)
                if k <= n and any(
                    tuple(tokens[i : i + k]) == phrase for i in range(n - k + 1)
                ):
                    return True
        return False

    if _any_hit(dicts.earnings):
        return "earnings"
    if _any_hit(dicts.fundamental):
        return "fundamental"
    return "chat"


@dataclass
class CoverageReport:
    total: int
    labeled: int
    per_class_counts: dict[str, int]
    per_class_accuracy: dict[str, float]

    @property
    def coverage(self) -> float:
        return self.labeled / self.total if self.total else 0.0


def labeling_accuracy(correct: int, incorrect: int) -> float:
    """Empirical accuracy of the labeler on gold-tagged messages."""
    if correct + incorrect == 0:
        raise ValueError("no gold observations")
    return correct / (correct + incorrect)


def build_training_set(
    corpus: list[tuple[str, list[str]]],
    dicts: EmotionDictionaries,
    nb: NBModel,
    neutral_tokens: frozenset[str] = frozenset(),
    gold: dict[str, str] | None = None,
) -> tuple[list[tuple[str, list[str], str]], CoverageReport]:
    """Label a normalized corpus of (message_id, tokens) pairs.

    Returns the non-abstaining (id, tokens, label) records plus a coverage
    report; when `gold` maps message ids to true classes, the report carries
    per-class empirical accuracy (correct / (correct + incorrect)).
    """
    dataset = []
    counts: Counter[str] = Counter()
    gold_correct: Counter[str] = Counter()
    gold_incorrect: Counter[str] = Counter()
    for message_id, tokens in corpus:
        sentiment = sentiment_classify(nb, tokens, neutral_tokens)
        label = label_emotion(tokens, dicts, sentiment)
        if label is None:
            continue
        dataset.append((message_id, tokens, label))
        counts[label] += 1
        if gold is not None and message_id in gold:
            if gold[message_id] == label:
                gold_correct[label] += 1
            else:
                gold_incorrect[label] += 1
    accuracy = {
        cls: labeling_accuracy(gold_correct[cls], gold_incorrect[cls])
        for cls in EMOTION_CLASSES
        if gold_correct[cls] + gold_incorrect[cls] > 0
    }
    report = CoverageReport(
        total=len(corpus),
        labeled=len(dataset),
        per_class_counts=dict(counts),
        per_class_accuracy=accuracy,
    )
    return dataset, report
