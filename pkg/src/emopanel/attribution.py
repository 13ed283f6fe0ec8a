"""Shapley word-importance values for classifier predictions.

Coalitions are defined over message positions: a position outside the
coalition has its token replaced by the PAD baseline. Exact enumeration is
feasible up to 12 tokens; longer messages use a seeded permutation-sampling
estimator with memoized coalition evaluations.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .bigru import ModelParams, forward_batch
from .textnorm import PAD_ID, TokenSequence

EXACT_LIMIT = 12


@dataclass
class Attribution:
    message_id: str
    target_class: int
    values: np.ndarray  # length T; zero at and past true_length
    true_length: int


def _predict(model, ids: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    if isinstance(model, ModelParams):
        probs, _ = forward_batch(ids, lengths, model)
        return probs
    return model(ids, lengths)


def _coalition_ids(seq: TokenSequence, masks: np.ndarray, baseline_id: int) -> np.ndarray:
    """Build one id row per coalition mask over the first true_length positions."""
    n = seq.true_length
    T = len(seq.ids)
    base = np.full((len(masks), T), PAD_ID, dtype=np.int64)
    original = np.asarray(seq.ids, dtype=np.int64)
    for row, mask in enumerate(masks):
        ids = original.copy()
        for i in range(n):
            if not (mask >> i) & 1:
                ids[i] = baseline_id
        base[row] = ids
    return base


def shapley_exact(
    model,
    seq: TokenSequence,
    target_class: int,
    message_id: str = "",
    baseline_id: int = PAD_ID,
) -> Attribution:
    """Exact Shapley values by full coalition enumeration (2^n model calls)."""
    n = seq.true_length
    if n > EXACT_LIMIT:
        raise ValueError(
            f"true_length {n} exceeds the exact-enumeration limit "
            f"({EXACT_LIMIT}); use shapley_sampled"
        )
    T = len(seq.ids)
    values = np.zeros(T)
    if n == 0:
        return Attribution(message_id, target_class, values, n)

    masks = np.arange(2**n)
    ids = _coalition_ids(seq, masks, baseline_id)
    lengths = np.full(len(masks), n, dtype=np.int64)
    f = _predict(model, ids, lengths)[:, target_class]

    fact = [math.factorial(k) for k in range(n + 1)]
    denom = fact[n]
    for i in range(n):
        bit = 1 << i
        phi = 0.0
        for mask in range(2**n):
            if mask & bit:
                continue
            s = int(mask).bit_count()
            weight = fact[s] * fact[n - s - 1] / denom
            phi += weight * (f[mask | bit] - f[mask])
        values[i] = phi
    return Attribution(message_id, target_class, values, n)


def shapley_sampled(
    model,
    seq: TokenSequence,
    target_class: int,
    n_samples: int = 200,
    seed: int = 0,
    message_id: str = "",
    baseline_id: int = PAD_ID,
) -> Attribution:
    """Permutation-sampling Shapley estimate, deterministic per seed.

    Each sampled permutation contributes one marginal per position. Coalition
    evaluations are cached by bitmask, so small messages converge to the
    exact values at no extra model cost.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n = seq.true_length
    T = len(seq.ids)
    values = np.zeros(T)
    if n == 0:
        return Attribution(message_id, target_class, values, n)

    rng = np.random.default_rng(seed)
    cache: dict[int, float] = {}

    def f(mask: int) -> float:
        if mask not in cache:
            ids = _coalition_ids(seq, np.array([mask]), baseline_id)
            cache[mask] = float(
                _predict(model, ids, np.array([n]))[0, target_class]
            )
        return cache[mask]

    totals = np.zeros(n)
    for _ in range(n_samples):
        order = rng.permutation(n)
        mask = 0
        prev = f(mask)
        for i in order:
            mask |= 1 << int(i)
            cur = f(mask)
            totals[i] += cur - prev
            prev = cur
    values[:n] = totals / n_samples
    return Attribution(message_id, target_class, values, n)


def global_importance(
    model,
    sample: list[tuple[str, list[str], TokenSequence]],
    target_class: int,
    min_count: int = 50,
    n_samples: int = 200,
    seed: int = 0,
) -> list[tuple[str, float, int]]:
    """Mean absolute Shapley value per word over a corpus sample.

    Every occurrence contributes its position's |phi|; words appearing fewer
    than `min_count` times are dropped. Sorted by importance, descending.
    """
    if not sample:
        raise ValueError("sample is empty")
    sums: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for message_id, tokens, seq in sample:
        if seq.true_length <= EXACT_LIMIT:
            attr = shapley_exact(model, seq, target_class, message_id=message_id)
        else:
            attr = shapley_sampled(
                model, seq, target_class,
                n_samples=n_samples, seed=seed, message_id=message_id,
            )
        for pos in range(attr.true_length):
            word = tokens[pos]
            sums[word] += abs(float(attr.values[pos]))
            counts[word] += 1
    table = [
        (word, sums[word] / counts[word], counts[word])
        for word in sums
        if counts[word] >= min_count
    ]
    table.sort(key=lambda row: (-row[1], row[0]))
    return table
