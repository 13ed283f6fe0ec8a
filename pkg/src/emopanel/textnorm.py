"""Deterministic message normalization, spell correction, and id encoding.

The normalizer strips platform markup (links, mentions, cashtags, retweet
markers), lowercases, translates emoticons and emoji to word tokens,
expands contractions, corrects misspellings against a frequency dictionary,
and replaces numeric content with placeholder tokens. Output is a plain
token list suitable for dictionary labeling and model encoding.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

PAD_ID = 0
NONE_ID = 1
PAD_TOKEN = "<PAD>"
NONE_TOKEN = "<NONE>"

DOLLAR_TOKEN = "isdollarvalue"
NUMBER_TOKEN = "isnumbervalue"
PERCENT_TOKEN = "ispercentage"

_URL_RE = re.compile(r"(?:https?://\S+|www\.\S+|\bpic\.\S+)", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_CASHTAG_RE = re.compile(r"\$[A-Za-z][A-Za-z.\-]*")
_LEADING_RT_RE = re.compile(r"^\s*RT\b:?\s*")
# word-ish chunks: optional $ prefix, alnum runs joined by ' . or , with an
# optional % suffix; or a bare %
_CHUNK_RE = re.compile(r"\$?[a-z0-9]+(?:['.,][a-z0-9]+)*%?|%")
_DOLLAR_NUM_RE = re.compile(r"^\$[0-9]+(?:[.,][0-9]+)*[km]?$")
_PURE_NUM_RE = re.compile(r"^[0-9]+(?:[.,][0-9]+)*$")
_NUM_PCT_RE = re.compile(r"^[0-9]+(?:[.,][0-9]+)*%$")

_MAX_SEGMENT_WORDS = 15
_MAX_REPEATS = 3
_EDIT_CUTOFF = 2


@dataclass
class NormalizationTables:
    """Lexicons backing `normalize`: translation maps and the spell dictionary."""

    emoticons: dict[str, str]
    contractions: dict[str, str]
    emoji: dict[str, str]
    spell_dict: dict[str, int]
    protected: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        # Tokens minted by translation or placeholder substitution must never
        # be re-corrected downstream.
        self.protected |= set(self.emoticons.values())
        self.protected |= set(self.emoji.values())
        self.protected |= {DOLLAR_TOKEN, NUMBER_TOKEN, PERCENT_TOKEN}


def _read_tsv(path: Path) -> list[tuple[str, str]]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("\t")
        rows.append((key, value))
    return rows


def load_tables(
    emoticons_path: Path | None = None,
    contractions_path: Path | None = None,
    emoji_path: Path | None = None,
    spell_dict_path: Path | None = None,
) -> NormalizationTables:
    """Load lexicons from TSV files, defaulting to the packaged ones."""
    data_root = resources.files("emopanel") / "data"

    def _resolve(p: Path | None, name: str) -> Path:
        return Path(p) if p is not None else Path(str(data_root / name))

    # text is lowercased before emoticon lookup, so patterns live lowercased
    emoticons = {
        k.lower(): v for k, v in _read_tsv(_resolve(emoticons_path, "emoticons.tsv"))
    }
    contractions = {
        k.lower(): v.lower()
        for k, v in _read_tsv(_resolve(contractions_path, "contractions.tsv"))
    }
    emoji = dict(_read_tsv(_resolve(emoji_path, "emoji_map.tsv")))
    spell = {
        w: int(f) for w, f in _read_tsv(_resolve(spell_dict_path, "spell_dict.tsv"))
    }
    return NormalizationTables(
        emoticons=emoticons, contractions=contractions, emoji=emoji, spell_dict=spell
    )


def damerau_levenshtein(a: str, b: str, cutoff: int | None = None) -> int:
    """Optimal-string-alignment distance; early-exits past `cutoff`."""
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if cutoff is not None and abs(la - lb) > cutoff:
        return cutoff + 1
    prev2: list[int] = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        row_min = i
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (
                i > 1
                and j > 1
                and a[i - 1] == b[j - 2]
                and a[i - 2] == b[j - 1]
            ):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
            row_min = min(row_min, cur[j])
        if cutoff is not None and row_min > cutoff:
            return cutoff + 1
        prev2, prev = prev, cur
    return prev[lb]


def _segment(token: str, dictionary: dict[str, int]) -> list[str] | None:
    """Best full segmentation of `token` into dictionary words, or None.

    Viterbi over split points maximizing total log-frequency; every part
    must be a dictionary word.
    """
    import math

    n = len(token)
    best: list[float] = [float("-inf")] * (n + 1)
    back: list[int] = [-1] * (n + 1)
    best[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - 24), end):
            part = token[start:end]
            if part in dictionary and best[start] > float("-inf"):
                score = best[start] + math.log(1 + dictionary[part]) - 8.0
                if score > best[end]:
                    best[end] = score
                    back[end] = start
    if best[n] == float("-inf"):
        return None
    parts = []
    pos = n
    while pos > 0:
        parts.append(token[back[pos]:pos])
        pos = back[pos]
    return parts[::-1]


def _segment_partial(token: str, dictionary: dict[str, int]) -> list[str] | None:
    """Greedy longest-match segmentation tolerating unknown chunks.

    Returns None when no dictionary word occurs anywhere in the token, so a
    failed token is stable under repeated correction.
    """
    n = len(token)
    parts: list[str] = []
    pos = 0
    unknown_start = 0
    found_known = False
    while pos < n:
        match = None
        for end in range(min(n, pos + 24), pos, -1):
            if token[pos:end] in dictionary:
                match = token[pos:end]
                break
        if match is None:
            pos += 1
            continue
        if pos > unknown_start:
            parts.append(token[unknown_start:pos])
        parts.append(match)
        found_known = True
        pos += len(match)
        unknown_start = pos
    if unknown_start < n:
        parts.append(token[unknown_start:])
    if not found_known:
        return None
    return parts


def _edit_correct(token: str, dictionary: dict[str, int]) -> str | None:
    """Nearest dictionary word within edit distance 2; ties by frequency.

    Tokens shorter than three characters are left alone: almost everything
    is within two edits of them.
    """
    if len(token) < 3:
        return None
    best_word = None
    best_key: tuple[int, int, str] | None = None
    for word, freq in dictionary.items():
        if abs(len(word) - len(token)) > _EDIT_CUTOFF:
            continue
        dist = damerau_levenshtein(token, word, cutoff=_EDIT_CUTOFF)
        if dist > _EDIT_CUTOFF:
            continue
        key = (dist, -freq, word)
        if best_key is None or key < best_key:
            best_key = key
            best_word = word
    return best_word


def _cap_repeats(parts: list[str], max_repeats: int) -> list[str]:
    counts: Counter[str] = Counter()
    kept = []
    for p in parts:
        counts[p] += 1
        if counts[p] <= max_repeats:
            kept.append(p)
    return kept


def correct_misspellings(token: str, dictionary: dict[str, int]) -> list[str]:
    """Correct one token against a word-frequency dictionary.

    Tier order: dictionary hit; full segmentation into dictionary words;
    nearest dictionary word within edit distance 2 (frequency breaks ties);
    best-effort segmentation truncated to 15 words with per-word repeats
    capped at 3; unchanged passthrough.
    """
    if not dictionary:
        raise ValueError("spell dictionary is empty")
    if token in dictionary:
        return [token]
    segmented = _segment(token, dictionary)
    if segmented is not None and len(segmented) > 1:
        return segmented
    corrected = _edit_correct(token, dictionary)
    if corrected is not None:
        return [corrected]
    partial = _segment_partial(token, dictionary)
    if partial is not None:
        # Unknown chunks get the full cascade once more (minus the partial
        # tier), so repeated correction reaches a fixed point.
        out: list[str] = []
        for p in partial:
            if p in dictionary:
                out.append(p)
                continue
            sub = _segment(p, dictionary)
            if sub is not None:
                out.extend(sub)
                continue
            out.append(_edit_correct(p, dictionary) or p)
        out = out[:_MAX_SEGMENT_WORDS]
        return _cap_repeats(out, _MAX_REPEATS)
    return [token]


def _translate_number_tokens(token: str) -> list[str] | None:
    if _DOLLAR_NUM_RE.match(token):
        return [DOLLAR_TOKEN]
    if _NUM_PCT_RE.match(token):
        return [NUMBER_TOKEN, PERCENT_TOKEN]
    if _PURE_NUM_RE.match(token):
        return [NUMBER_TOKEN]
    if token == "%":
        return [PERCENT_TOKEN]
    return None


def _process_chunk(chunk: str, lexicons: NormalizationTables) -> list[str]:
    if chunk in lexicons.contractions:
        return lexicons.contractions[chunk].split()
    numeric = _translate_number_tokens(chunk)
    if numeric is not None:
        return numeric
    if any(ch.isdigit() for ch in chunk):
        return [chunk]
    out: list[str] = []
    # remaining separators carry no meaning inside a plain word
    for piece in re.split(r"['.,]", chunk):
        if not piece:
            continue
        if piece in lexicons.protected:
            out.append(piece)
        else:
            out.extend(correct_misspellings(piece, lexicons.spell_dict))
    return out


def normalize(text: str, lexicons: NormalizationTables) -> list[str]:
    """Full normalization of one raw message into a token list."""
    text = _URL_RE.sub(" ", text)
    text = _LEADING_RT_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _CASHTAG_RE.sub(" ", text)
    for char, name in lexicons.emoji.items():
        if char in text:
            text = text.replace(char, f" {name} ")

    tokens: list[str] = []
    for raw in text.lower().split():
        if raw in lexicons.emoticons:
            tokens.append(lexicons.emoticons[raw])
            continue
        for chunk in _CHUNK_RE.findall(raw):
            tokens.extend(_process_chunk(chunk, lexicons))

    return [t for t in tokens if any(ch.isalnum() for ch in t)]


@dataclass
class Vocabulary:
    """Frequency-ranked token table with reserved PAD and NONE ids."""

    token_to_id: dict[str, int]
    id_to_token: list[str]
    cap: int

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, NONE_ID)

    def save(self, path: Path) -> None:
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[:2] != [PAD_TOKEN, NONE_TOKEN]:
            raise ValueError(f"{path} is not a vocabulary file (missing reserved rows)")
        return cls(
            token_to_id={tok: i for i, tok in enumerate(lines)},
            id_to_token=lines,
            cap=len(lines),
        )


def build_vocab(corpus: list[list[str]], cap: int = 60000) -> Vocabulary:
    """Assign ids to the `cap` most frequent tokens (ties break lexicographically)."""
    if cap < 2:
        raise ValueError("cap must leave room for the reserved PAD/NONE ids")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    id_to_token = [PAD_TOKEN, NONE_TOKEN] + [tok for tok, _ in ranked[: cap - 2]]
    return Vocabulary(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
        cap=cap,
    )


@dataclass
class TokenSequence:
    """Fixed-length id sequence; positions at or past `true_length` are PAD."""

    ids: list[int]
    true_length: int

    def __post_init__(self) -> None:
        if self.true_length > len(self.ids):
            raise ValueError("true_length exceeds sequence length")


def encode(tokens: list[str], vocab: Vocabulary, T: int = 30) -> TokenSequence:
    """Map tokens to ids: OOV becomes NONE, truncate to T, right-pad with PAD."""
    if T < 1:
        raise ValueError("T must be >= 1")
    kept = tokens[:T]
    ids = [vocab.lookup(t) for t in kept] + [PAD_ID] * (T - len(kept))
    return TokenSequence(ids=ids, true_length=len(kept))


def decode(seq: TokenSequence, vocab: Vocabulary) -> list[str]:
    return [vocab.id_to_token[i] for i in seq.ids[: seq.true_length]]
