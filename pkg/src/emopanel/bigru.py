"""Many-to-one bidirectional GRU classifier in plain numpy.

Forward pass: embedding (with inverted dropout in training), a forward and
a backward GRU over the non-PAD prefix, concatenation of the two terminal
hidden states, a linear layer, two ReLU dense layers, and a softmax head.
Backpropagation is analytic through every parameter, including the touched
embedding rows. PAD positions carry the hidden state through unchanged, so
padding never affects predictions.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .textnorm import TokenSequence

EPS_PROB = 1e-12


@dataclass
class Hyperparams:
    """Training configuration; defaults mirror the full-scale setup."""

    T: int = 30
    embed_dim: int = 200
    hidden: int = 256
    linear_dim: int = 256
    dense1: int = 256
    dense2: int = 128
    n_classes: int = 7
    batch_size: int = 4096
    lr: float = 0.01
    embed_dropout: float = 0.25
    patience: int = 1
    max_epochs: int = 50
    momentum: float = 0.0
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("T", "embed_dim", "hidden", "linear_dim", "dense1",
                     "dense2", "batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_classes not in (3, 7):
            raise ValueError("n_classes must be 3 or 7")
        if not 0.0 <= self.embed_dropout < 1.0:
            raise ValueError("embed_dropout must lie in [0, 1)")

    @classmethod
    def desk_scale(cls, **overrides) -> "Hyperparams":
        """Small sizes that train in seconds on a laptop-class machine."""
        base = dict(
            embed_dim=24, hidden=24, linear_dim=24, dense1=24, dense2=16,
            batch_size=32, max_epochs=40,
        )
        base.update(overrides)
        return cls(**base)


def _param_shapes(vocab_size: int, hp: Hyperparams) -> dict[str, tuple[int, ...]]:
    d, h = hp.embed_dim, hp.hidden
    q, q1, q2, y = hp.linear_dim, hp.dense1, hp.dense2, hp.n_classes
    shapes: dict[str, tuple[int, ...]] = {"E": (vocab_size, d)}
    for suffix in ("", "_b"):
        shapes.update({
            f"Wxz{suffix}": (d, h), f"Wxr{suffix}": (d, h), f"Wxh{suffix}": (d, h),
            f"Whz{suffix}": (h, h), f"Whr{suffix}": (h, h), f"Whh{suffix}": (h, h),
            f"bz{suffix}": (h,), f"br{suffix}": (h,), f"bh{suffix}": (h,),
        })
    shapes.update({
        "Wq": (2 * h, q), "bq": (q,),
        "Wo": (q, q1), "bo": (q1,),
        "Wd": (q1, q2), "bd": (q2,),
        "Wy": (q2, y), "by": (y,),
    })
    return shapes


class ModelParams:
    """All trainable tensors, keyed by name, always float64."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self.arrays = arrays

    @classmethod
    def init(cls, vocab_size: int, hp: Hyperparams, rng: np.random.Generator) -> "ModelParams":
        """Uniform(-0.05, 0.05) embeddings; scaled-uniform fan-in elsewhere; zero biases."""
        arrays: dict[str, np.ndarray] = {}
        for name, shape in _param_shapes(vocab_size, hp).items():
            if name == "E":
                arrays[name] = rng.uniform(-0.05, 0.05, size=shape)
            elif name.startswith("b"):
                arrays[name] = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[0])
                arrays[name] = rng.uniform(-bound, bound, size=shape)
        return cls(arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def keys(self):
        return self.arrays.keys()

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()})

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    @property
    def vocab_size(self) -> int:
        return self.arrays["E"].shape[0]

    def save(self, path, hp: Hyperparams, vocab_hash: str = "") -> None:
        meta = {"hyperparams": hp.__dict__, "vocab_hash": vocab_hash}
        payload = dict(self.arrays)
        payload["__meta__"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
        )
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> tuple["ModelParams", Hyperparams, str]:
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
        hp = Hyperparams(**meta["hyperparams"])
        return cls(arrays), hp, meta["vocab_hash"]


def vocab_digest(id_to_token: list[str]) -> str:
    joined = "\n".join(id_to_token).encode("utf-8")
    return hashlib.sha256(joined).hexdigest()


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def gru_cell(
    x_t: np.ndarray,
    h_prev: np.ndarray,
    weights: dict[str, np.ndarray],
    suffix: str = "",
) -> np.ndarray:
    """One GRU step: update and reset gates blend the previous state with a
    tanh candidate built from the reset-scaled state."""
    Wxz, Whz, bz = weights[f"Wxz{suffix}"], weights[f"Whz{suffix}"], weights[f"bz{suffix}"]
    Wxr, Whr, br = weights[f"Wxr{suffix}"], weights[f"Whr{suffix}"], weights[f"br{suffix}"]
    Wxh, Whh, bh = weights[f"Wxh{suffix}"], weights[f"Whh{suffix}"], weights[f"bh{suffix}"]
    if x_t.shape[-1] != Wxz.shape[0] or h_prev.shape[-1] != Whz.shape[0]:
        raise ValueError(
            f"shape mismatch: x {x_t.shape} vs Wxz {Wxz.shape}, "
            f"h {h_prev.shape} vs Whz {Whz.shape}"
        )
    z = _sigmoid(x_t @ Wxz + h_prev @ Whz + bz)
    r = _sigmoid(x_t @ Wxr + h_prev @ Whr + br)
    g = np.tanh(x_t @ Wxh + (r * h_prev) @ Whh + bh)
    return z * h_prev + (1.0 - z) * g


def _run_direction(
    x: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
    suffix: str,
    time_order: range,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Run one GRU direction over the masked sequence, caching per-step values."""
    B, T, _ = x.shape
    h = params[f"Whz{suffix}"].shape[0]
    states = np.zeros((T + 1, B, h))
    zs = np.zeros((T, B, h))
    rs = np.zeros((T, B, h))
    gs = np.zeros((T, B, h))
    hcur = np.zeros((B, h))
    Wxz, Whz, bz = params[f"Wxz{suffix}"], params[f"Whz{suffix}"], params[f"bz{suffix}"]
    Wxr, Whr, br = params[f"Wxr{suffix}"], params[f"Whr{suffix}"], params[f"br{suffix}"]
    Wxh, Whh, bh = params[f"Wxh{suffix}"], params[f"Whh{suffix}"], params[f"bh{suffix}"]
    for step, t in enumerate(time_order):
        states[step] = hcur
        xt = x[:, t]
        z = _sigmoid(xt @ Wxz + hcur @ Whz + bz)
        r = _sigmoid(xt @ Wxr + hcur @ Whr + br)
        g = np.tanh(xt @ Wxh + (r * hcur) @ Whh + bh)
        hn = z * hcur + (1.0 - z) * g
        m = mask[:, t][:, None]
        hcur = m * hn + (1.0 - m) * hcur
        zs[step], rs[step], gs[step] = z, r, g
    states[len(time_order)] = hcur
    return hcur, {"states": states, "z": zs, "r": rs, "g": gs}


def forward_batch(
    ids: np.ndarray,
    lengths: np.ndarray,
    params: ModelParams,
    train_mode: bool = False,
    dropout: float = 0.0,
    dropout_mask: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Batched forward pass; returns class probabilities and the backprop cache."""
    ids = np.asarray(ids, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    B, T = ids.shape
    mask = (np.arange(T)[None, :] < lengths[:, None]).astype(float)

    emb = params["E"][ids]
    if train_mode and dropout > 0.0:
        if dropout_mask is None:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng or explicit mask")
            keep = (rng.random((B, T)) >= dropout).astype(float)
        else:
            keep = np.asarray(dropout_mask, dtype=float)
        drop = keep / (1.0 - dropout)
    else:
        drop = np.ones((B, T))
    x = emb * drop[:, :, None]

    hf, fwd_cache = _run_direction(x, mask, params, "", range(T))
    hb, bwd_cache = _run_direction(x, mask, params, "_b", range(T - 1, -1, -1))

    concat = np.concatenate([hf, hb], axis=1)
    o = concat @ params["Wq"] + params["bq"]
    d1 = np.maximum(o @ params["Wo"] + params["bo"], 0.0)
    d2 = np.maximum(d1 @ params["Wd"] + params["bd"], 0.0)
    logits = d2 @ params["Wy"] + params["by"]
    probs = softmax(logits)

    cache = {
        "ids": ids, "mask": mask, "x": x, "drop": drop,
        "fwd": fwd_cache, "bwd": bwd_cache,
        "concat": concat, "o": o, "d1": d1, "d2": d2, "probs": probs,
        "params": params,
    }
    return probs, cache


def forward(
    seq: TokenSequence,
    params: ModelParams,
    train_mode: bool = False,
    dropout: float = 0.0,
    dropout_mask: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Single-sequence convenience wrapper around `forward_batch`."""
    ids = np.asarray([seq.ids])
    lengths = np.asarray([seq.true_length])
    mask = None if dropout_mask is None else np.asarray(dropout_mask).reshape(1, -1)
    probs, cache = forward_batch(
        ids, lengths, params,
        train_mode=train_mode, dropout=dropout, dropout_mask=mask, rng=rng,
    )
    return probs[0], cache


def loss(probs: np.ndarray, target: int) -> float:
    """Categorical cross entropy for one prediction."""
    p = float(probs[target])
    if p < EPS_PROB:
        warnings.warn("probability underflow clamped in loss", RuntimeWarning)
        p = EPS_PROB
    return -np.log(p)


def batch_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    p = np.clip(probs[np.arange(len(targets)), targets], EPS_PROB, None)
    return float(-np.log(p).mean())


def _backprop_direction(
    dh_final: np.ndarray,
    x: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
    suffix: str,
    direction_cache: dict[str, np.ndarray],
    time_order: range,
    grads: dict[str, np.ndarray],
    dx: np.ndarray,
) -> None:
    """Reverse-mode pass through one GRU direction, accumulating into grads/dx."""
    Wxz, Whz = params[f"Wxz{suffix}"], params[f"Whz{suffix}"]
    Wxr, Whr = params[f"Wxr{suffix}"], params[f"Whr{suffix}"]
    Wxh, Whh = params[f"Wxh{suffix}"], params[f"Whh{suffix}"]
    states = direction_cache["states"]
    zs, rs, gs = direction_cache["z"], direction_cache["r"], direction_cache["g"]

    dh = dh_final
    steps = list(enumerate(time_order))
    for step, t in reversed(steps):
        m = mask[:, t][:, None]
        hprev = states[step]
        z, r, g = zs[step], rs[step], gs[step]
        dh_step = dh * m
        dz_pre = dh_step * (hprev - g) * z * (1.0 - z)
        dg_pre = dh_step * (1.0 - z) * (1.0 - g * g)
        drh = dg_pre @ Whh.T
        dr_pre = drh * hprev * r * (1.0 - r)
        xt = x[:, t]

        grads[f"Wxz{suffix}"] += xt.T @ dz_pre
        grads[f"Whz{suffix}"] += hprev.T @ dz_pre
        grads[f"bz{suffix}"] += dz_pre.sum(axis=0)
        grads[f"Wxr{suffix}"] += xt.T @ dr_pre
        grads[f"Whr{suffix}"] += hprev.T @ dr_pre
        grads[f"br{suffix}"] += dr_pre.sum(axis=0)
        grads[f"Wxh{suffix}"] += xt.T @ dg_pre
        grads[f"Whh{suffix}"] += (r * hprev).T @ dg_pre
        grads[f"bh{suffix}"] += dg_pre.sum(axis=0)

        dx[:, t] += dz_pre @ Wxz.T + dr_pre @ Wxr.T + dg_pre @ Wxh.T
        dh_prev = dh_step * z + dz_pre @ Whz.T + dr_pre @ Whr.T + drh * r
        dh = dh * (1.0 - m) + dh_prev


def backward(cache: dict, targets: int | np.ndarray, reduce: str = "mean") -> dict[str, np.ndarray]:
    """Exact gradient of the cross-entropy loss w.r.t. every parameter."""
    params: ModelParams = cache["params"]
    probs = cache["probs"]
    B = probs.shape[0]
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))

    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    if reduce == "mean":
        dlogits /= B

    grads = {k: np.zeros_like(params[k]) for k in params.keys()}
    d1, d2, o, concat = cache["d1"], cache["d2"], cache["o"], cache["concat"]

    grads["Wy"] = d2.T @ dlogits
    grads["by"] = dlogits.sum(axis=0)
    dd2 = (dlogits @ params["Wy"].T) * (d2 > 0)
    grads["Wd"] = d1.T @ dd2
    grads["bd"] = dd2.sum(axis=0)
    dd1 = (dd2 @ params["Wd"].T) * (d1 > 0)
    grads["Wo"] = o.T @ dd1
    grads["bo"] = dd1.sum(axis=0)
    do = dd1 @ params["Wo"].T
    grads["Wq"] = concat.T @ do
    grads["bq"] = do.sum(axis=0)
    dconcat = do @ params["Wq"].T

    h = params["Whz"].shape[0]
    x, mask = cache["x"], cache["mask"]
    T = x.shape[1]
    dx = np.zeros_like(x)
    _backprop_direction(
        dconcat[:, :h], x, mask, params, "", cache["fwd"], range(T), grads, dx
    )
    _backprop_direction(
        dconcat[:, h:], x, mask, params, "_b", cache["bwd"],
        range(T - 1, -1, -1), grads, dx,
    )

    demb = dx * cache["drop"][:, :, None]
    np.add.at(grads["E"], cache["ids"], demb)
    return grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None = None
    val_acc: float | None = None


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 3:
        ids, lengths, labels = dataset
        return (np.asarray(ids, dtype=np.int64),
                np.asarray(lengths, dtype=np.int64),
                np.asarray(labels, dtype=np.int64))
    ids = np.asarray([seq.ids for seq, _ in dataset], dtype=np.int64)
    lengths = np.asarray([seq.true_length for seq, _ in dataset], dtype=np.int64)
    labels = np.asarray([label for _, label in dataset], dtype=np.int64)
    return ids, lengths, labels


def evaluate(
    params: ModelParams, ids: np.ndarray, lengths: np.ndarray, labels: np.ndarray
) -> tuple[float, float]:
    probs, _ = forward_batch(ids, lengths, params)
    acc = float((probs.argmax(axis=1) == labels).mean())
    return batch_loss(probs, labels), acc


def train(
    dataset,
    hp: Hyperparams,
    vocab_size: int | None = None,
    params: ModelParams | None = None,
) -> tuple[ModelParams, list[EpochRecord]]:
    """Minibatch SGD with seeded shuffling and patience-based early stopping.

    Early stopping watches validation loss (a seeded `val_fraction` split
    unless that fraction is zero) and restores the best parameters.
    """
    ids, lengths, labels = _as_arrays(dataset)
    if len(ids) == 0:
        raise ValueError("dataset is empty")
    if labels.max() >= hp.n_classes:
        raise ValueError("label id exceeds n_classes")

    rng = np.random.default_rng(hp.seed)
    if params is None:
        if vocab_size is None:
            vocab_size = int(ids.max()) + 1
        params = ModelParams.init(vocab_size, hp, rng)

    n = len(ids)
    n_val = int(round(hp.val_fraction * n)) if hp.val_fraction > 0 else 0
    order = rng.permutation(n)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        train_idx, val_idx = order, order[:0]
        n_val = 0

    velocity = params.zero_grads() if hp.momentum else None
    history: list[EpochRecord] = []
    best_val = np.inf
    best_params = params.copy()
    strikes = 0

    for epoch in range(hp.max_epochs):
        perm = rng.permutation(len(train_idx))
        shuffled = train_idx[perm]
        for start in range(0, len(shuffled), hp.batch_size):
            batch = shuffled[start : start + hp.batch_size]
            probs, cache = forward_batch(
                ids[batch], lengths[batch], params,
                train_mode=True, dropout=hp.embed_dropout, rng=rng,
            )
            grads = backward(cache, labels[batch])
            for name in params.keys():
                if velocity is not None:
                    velocity[name] = hp.momentum * velocity[name] + grads[name]
                    params.arrays[name] -= hp.lr * velocity[name]
                else:
                    params.arrays[name] -= hp.lr * grads[name]

        train_loss, train_acc = evaluate(params, ids[train_idx], lengths[train_idx], labels[train_idx])
        record = EpochRecord(epoch=epoch, train_loss=train_loss, train_acc=train_acc)
        if n_val:
            val_loss, val_acc = evaluate(params, ids[val_idx], lengths[val_idx], labels[val_idx])
            record.val_loss, record.val_acc = val_loss, val_acc
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_params = params.copy()
                strikes = 0
            else:
                strikes += 1
        history.append(record)
        if n_val and strikes > hp.patience:
            params = best_params
            break

    return params, history


def kfold_cv(
    dataset, hp: Hyperparams, k: int = 5, vocab_size: int | None = None
) -> tuple[list[dict[str, float]], int]:
    """Deterministic k-fold cross validation; selects the fold with minimal
    in-sample loss."""
    ids, lengths, labels = _as_arrays(dataset)
    n = len(ids)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError("dataset smaller than k")
    rng = np.random.default_rng(hp.seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)

    results = []
    for i, held in enumerate(folds):
        train_mask = np.ones(n, dtype=bool)
        train_mask[held] = False
        sub = (ids[train_mask], lengths[train_mask], labels[train_mask])
        fold_hp = replace(hp, val_fraction=0.0)
        params, _ = train(sub, fold_hp, vocab_size=vocab_size)
        tr_loss, tr_acc = evaluate(params, ids[train_mask], lengths[train_mask], labels[train_mask])
        te_loss, te_acc = evaluate(params, ids[held], lengths[held], labels[held])
        results.append({
            "fold": i, "train_loss": tr_loss, "train_acc": tr_acc,
            "held_loss": te_loss, "held_acc": te_acc,
        })
    selected = min(range(k), key=lambda i: results[i]["train_loss"])
    return results, selected


def confusion_matrix(
    preds: np.ndarray, gold: np.ndarray, n_classes: int
) -> tuple[np.ndarray, float]:
    """Row-normalized confusion matrix: entry (i, j) is the fraction of
    gold-class-i observations predicted as j. Returns (matrix, accuracy)."""
    preds = np.asarray(preds, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if preds.shape != gold.shape:
        raise ValueError("preds and gold must have equal length")
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (gold, preds), 1.0)
    row_sums = counts.sum(axis=1, keepdims=True)
    matrix = np.divide(counts, row_sums, out=np.zeros_like(counts), where=row_sums > 0)
    accuracy = float((preds == gold).mean()) if len(gold) else 0.0
    return matrix, accuracy
