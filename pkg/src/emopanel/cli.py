"""Pipeline orchestration: stage subcommands over a shared JSON config.

Each stage reads only its declared inputs, writes only its declared outputs
under the output directory, and emits a manifest with input/output hashes,
the seed, and the package version. Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import EMOTION_CLASSES, __version__
from . import aggregate as agg
from . import bigru, corpus, econ, textnorm, toymodel, weaklabel
from .attribution import global_importance, shapley_exact, shapley_sampled
from .synth import SynthConfig, synth_generate

logger = logging.getLogger("emopanel")

STAGES = [
    "synth", "normalize", "label", "train", "infer", "attribute",
    "aggregate", "eventstudy", "regress", "portfolio", "toymodel",
]

# upstream artifacts each stage requires, with the stage that produces them
STAGE_INPUTS: dict[str, list[tuple[str, str]]] = {
    "synth": [],
    "normalize": [("messages.jsonl", "synth"), ("users.jsonl", "synth"),
                  ("announcements.csv", "synth")],
    "label": [("normalized.jsonl", "normalize"), ("messages.jsonl", "synth"),
              ("users.jsonl", "synth")],
    "train": [("normalized.jsonl", "normalize"), ("labels.jsonl", "label"),
              ("vocab.txt", "normalize")],
    "infer": [("model.npz", "train"), ("normalized.jsonl", "normalize"),
              ("vocab.txt", "normalize")],
    "attribute": [("model.npz", "train"), ("normalized.jsonl", "normalize"),
                  ("vocab.txt", "normalize")],
    "eventstudy": [("announcements.csv", "synth"), ("quotes.csv", "synth"),
                   ("factors.csv", "synth")],
    "aggregate": [("messages.jsonl", "synth"), ("users.jsonl", "synth"),
                  ("announcements.csv", "synth"), ("factors.csv", "synth"),
                  ("emotions.jsonl", "infer"), ("labels.jsonl", "label"),
                  ("eventstudy.csv", "eventstudy")],
    "regress": [("panel.csv", "aggregate")],
    "portfolio": [("panel.csv", "aggregate"), ("quotes.csv", "synth"),
                  ("factors.csv", "synth")],
    "toymodel": [],
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


DEFAULT_CONFIG: dict = {
    "out_dir": "out",
    "seed": 7,
    "lexicons": {"emoticons": None, "contractions": None, "emoji": None, "spell_dict": None},
    "dictionaries": None,
    "vocab_cap": 60000,
    "T": 30,
    "synth": {"n_firms": 12, "n_quarters": 8, "n_users": 60},
    "filter": {"window_user_min": 2, "automated_threshold": 1000},
    "nb": {"smoothing": 1.0, "balanced_priors": True},
    "train": {"desk_scale": True, "hyper": {}},
    "attribute": {"n_messages": 25, "target_class": "happy", "min_count": 2,
                  "n_samples": 200},
    "aggregate": {},
    "regress": {
        "winsorize_columns": [
            "exret_m1_p1", "exret_p2_p4", "exret_m10_m2", "sue", "sue_lag",
            "analysts", "size", "mb", "volatility", "sentiment_pre", "sentiment_evt",
        ],
        "limits": [0.01, 0.99],
        "variants": ["chat", "fundamental", "original", "dissemination"],
    },
    "portfolio": {"deciles": 10, "hold": 3},
    "toymodel": {
        "m": 1.0, "rho": 1.0, "n": 2, "sigma_i2": 0.5, "sigma_a2": 0.3,
        "sigma_12": 0.4, "sigma_22": 0.2, "s1": 0.3, "s2": -0.2,
        "eta_grid": [-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5],
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    merged = dict(base)
    for key, value in override.items():
        if key not in base:
            raise UsageError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            merged[key] = _merge(base[key], value, path=f"{path}{key}.")
        else:
            merged[key] = value
    return merged


class PipelineConfig:
    def __init__(self, raw: dict, out_override: str | None = None,
                 seed_override: int | None = None):
        self.raw = _merge(DEFAULT_CONFIG, raw)
        out = out_override or os.environ.get("EMOPANEL_OUT") or self.raw["out_dir"]
        self.out_dir = Path(out)
        self.seed = seed_override if seed_override is not None else int(self.raw["seed"])

    def __getitem__(self, key: str):
        return self.raw[key]

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def digest(self) -> str:
        payload = json.dumps(
            {"config": self.raw, "seed": self.seed}, sort_keys=True
        ).encode()
        return hashlib.sha256(payload).hexdigest()

    def tables(self) -> textnorm.NormalizationTables:
        lex = self.raw["lexicons"]
        return textnorm.load_tables(
            emoticons_path=lex["emoticons"],
            contractions_path=lex["contractions"],
            emoji_path=lex["emoji"],
            spell_dict_path=lex["spell_dict"],
        )

    def dictionaries(self):
        return weaklabel.load_dictionaries(self.raw["dictionaries"])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _check_inputs(stage: str, cfg: PipelineConfig) -> dict[str, str]:
    hashes = {}
    for name, producer in STAGE_INPUTS[stage]:
        path = cfg.path(name)
        if not path.exists():
            raise DataError(f"{path} is missing; run the '{producer}' stage first")
        hashes[name] = _sha256(path)
    return hashes


def _write_manifest(stage: str, cfg: PipelineConfig, inputs: dict[str, str],
                    outputs: list[Path]) -> None:
    manifest = {
        "stage": stage,
        "version": __version__,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "inputs": inputs,
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = cfg.path(f"manifest_{stage}.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_synth(cfg: PipelineConfig) -> list[Path]:
    opts = dict(cfg["synth"])
    n_firms = opts.pop("n_firms")
    n_quarters = opts.pop("n_quarters")
    n_users = opts.pop("n_users")
    synth_cfg = SynthConfig(**opts)
    data = synth_generate(cfg.seed, n_firms, n_quarters, n_users, synth_cfg)
    corpus.write_messages(cfg.path("messages.jsonl"), data.messages)
    corpus.write_users(cfg.path("users.jsonl"), data.users)
    corpus.write_announcements(cfg.path("announcements.csv"), data.announcements)
    corpus.write_quotes(cfg.path("quotes.csv"), data.quotes)
    corpus.write_factors(cfg.path("factors.csv"), data.factors)
    truth = {
        "message_class": data.truth.message_class,
        "happy_pre": data.truth.happy_pre,
    }
    cfg.path("synth_truth.json").write_text(json.dumps(truth, sort_keys=True) + "\n")
    return [cfg.path(n) for n in
            ("messages.jsonl", "users.jsonl", "announcements.csv",
             "quotes.csv", "factors.csv", "synth_truth.json")]


def _load_listing(cfg: PipelineConfig) -> tuple[dict[str, str], set[str]]:
    announcements = corpus.load_announcements(cfg.path("announcements.csv"))
    firms = sorted({a.firm_id for a in announcements})
    listing = {f: ("NASDAQ" if i % 2 == 0 else "NYSE") for i, f in enumerate(firms)}
    return listing, set(firms)


def stage_normalize(cfg: PipelineConfig) -> list[Path]:
    messages, users = corpus.load_corpus(
        cfg.path("messages.jsonl"), cfg.path("users.jsonl")
    )
    tables = cfg.tables()
    listing, matched = _load_listing(cfg)
    fopts = cfg["filter"]
    result = corpus.filter_sample(
        messages, users, listing, matched,
        window_user_min=int(fopts["window_user_min"]),
        automated_threshold=int(fopts["automated_threshold"]),
        normalizer=lambda text: " ".join(textnorm.normalize(text, tables)),
    )
    cfg.path("filter_stages.json").write_text(
        json.dumps({"stages": result.stages}, indent=2) + "\n"
    )

    normalized = []
    token_lists = []
    with open(cfg.path("normalized.jsonl"), "w", encoding="utf-8") as fh:
        for m in result.messages:
            tokens = textnorm.normalize(m.text, tables)
            token_lists.append(tokens)
            fh.write(json.dumps({"message_id": m.message_id, "tokens": tokens}) + "\n")
            normalized.append(m.message_id)
    vocab = textnorm.build_vocab(token_lists, cap=int(cfg["vocab_cap"]))
    vocab.save(cfg.path("vocab.txt"))
    logger.info("normalized %d messages; vocab size %d", len(normalized), vocab.size)
    return [cfg.path(n) for n in ("normalized.jsonl", "vocab.txt", "filter_stages.json")]


def _read_normalized(cfg: PipelineConfig) -> list[tuple[str, list[str]]]:
    records = []
    with open(cfg.path("normalized.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            records.append((rec["message_id"], rec["tokens"]))
    return records


def stage_label(cfg: PipelineConfig) -> list[Path]:
    normalized = _read_normalized(cfg)
    messages, _ = corpus.load_corpus(cfg.path("messages.jsonl"), cfg.path("users.jsonl"))
    tag_by_id = {m.message_id: m.author_sentiment_tag for m in messages}
    dicts, info = cfg.dictionaries()
    tables = cfg.tables()
    neutral_tokens = frozenset(tables.emoticons.values()) | frozenset(tables.emoji.values())

    nb_data = []
    for message_id, tokens in normalized:
        tag = tag_by_id.get(message_id)
        if tag == "bullish":
            nb_data.append((tokens, "pos"))
        elif tag == "bearish":
            nb_data.append((tokens, "neg"))
    if not nb_data:
        raise DataError("no bullish/bearish-tagged messages to train the sentiment model")
    nb = weaklabel.nb_train(
        nb_data,
        smoothing=float(cfg["nb"]["smoothing"]),
        balanced_priors=bool(cfg["nb"]["balanced_priors"]),
    )

    dataset, report = weaklabel.build_training_set(
        normalized, dicts, nb, neutral_tokens=neutral_tokens
    )
    labels_by_id = {mid: label for mid, _, label in dataset}
    with open(cfg.path("labels.jsonl"), "w", encoding="utf-8") as fh:
        for message_id, tokens in normalized:
            sent = weaklabel.sentiment_classify(nb, tokens, neutral_tokens)
            fh.write(json.dumps({
                "message_id": message_id,
                "emotion_label": labels_by_id.get(message_id, weaklabel.ABSTAIN),
                "chat_type": weaklabel.label_chat_type(tokens, info),
                "p_positive": round(sent.p_positive, 10),
                "sentiment_label": sent.label,
            }) + "\n")
    cfg.path("label_report.json").write_text(json.dumps({
        "total": report.total,
        "labeled": report.labeled,
        "coverage": report.coverage,
        "per_class_counts": dict(sorted(report.per_class_counts.items())),
    }, indent=2) + "\n")
    logger.info("labels: coverage %.1f%% over %d messages",
                100 * report.coverage, report.total)
    return [cfg.path("labels.jsonl"), cfg.path("label_report.json")]


def _hyperparams(cfg: PipelineConfig) -> bigru.Hyperparams:
    opts = dict(cfg["train"]["hyper"])
    opts.setdefault("T", int(cfg["T"]))
    opts.setdefault("seed", cfg.seed)
    if cfg["train"]["desk_scale"]:
        return bigru.Hyperparams.desk_scale(**opts)
    return bigru.Hyperparams(**opts)


def stage_train(cfg: PipelineConfig) -> list[Path]:
    normalized = _read_normalized(cfg)
    vocab = textnorm.Vocabulary.load(cfg.path("vocab.txt"))
    labels = {}
    with open(cfg.path("labels.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["emotion_label"] != weaklabel.ABSTAIN:
                labels[rec["message_id"]] = rec["emotion_label"]
    hp = _hyperparams(cfg)
    class_ids = {cls: i for i, cls in enumerate(EMOTION_CLASSES)}
    dataset = [
        (textnorm.encode(tokens, vocab, hp.T), class_ids[labels[mid]])
        for mid, tokens in normalized
        if mid in labels
    ]
    if not dataset:
        raise DataError("weak labeling produced an empty training set")
    params, history = bigru.train(dataset, hp, vocab_size=vocab.size)
    params.save(cfg.path("model.npz"), hp, vocab_hash=bigru.vocab_digest(vocab.id_to_token))
    pd.DataFrame([r.__dict__ for r in history]).to_csv(
        cfg.path("history.csv"), index=False
    )
    logger.info("trained %d epochs on %d labeled messages", len(history), len(dataset))
    return [cfg.path("model.npz"), cfg.path("history.csv")]


def _load_model(cfg: PipelineConfig) -> tuple[bigru.ModelParams, bigru.Hyperparams, textnorm.Vocabulary]:
    params, hp, vocab_hash = bigru.ModelParams.load(cfg.path("model.npz"))
    vocab = textnorm.Vocabulary.load(cfg.path("vocab.txt"))
    if vocab_hash and vocab_hash != bigru.vocab_digest(vocab.id_to_token):
        raise DataError("vocab.txt does not match the checkpoint's vocabulary hash")
    return params, hp, vocab


def stage_infer(cfg: PipelineConfig) -> list[Path]:
    normalized = _read_normalized(cfg)
    params, hp, vocab = _load_model(cfg)
    with open(cfg.path("emotions.jsonl"), "w", encoding="utf-8") as fh:
        for start in range(0, len(normalized), 512):
            chunk = normalized[start : start + 512]
            seqs = [textnorm.encode(tokens, vocab, hp.T) for _, tokens in chunk]
            ids = np.array([s.ids for s in seqs])
            lengths = np.array([s.true_length for s in seqs])
            probs, _ = bigru.forward_batch(ids, lengths, params)
            for (mid, _), p in zip(chunk, probs):
                fh.write(json.dumps({
                    "message_id": mid,
                    "probs": [round(float(v), 10) for v in p],
                }) + "\n")
    return [cfg.path("emotions.jsonl")]


def stage_attribute(cfg: PipelineConfig) -> list[Path]:
    normalized = _read_normalized(cfg)
    params, hp, vocab = _load_model(cfg)
    opts = cfg["attribute"]
    target = EMOTION_CLASSES.index(opts["target_class"])
    rng = np.random.default_rng(cfg.seed)
    usable = [(mid, tokens) for mid, tokens in normalized if tokens]
    n_sample = min(int(opts["n_messages"]), len(usable))
    picked_idx = sorted(rng.choice(len(usable), size=n_sample, replace=False))
    sample = []
    for i in picked_idx:
        mid, tokens = usable[i]
        sample.append((mid, tokens, textnorm.encode(tokens, vocab, hp.T)))

    rows = []
    for mid, tokens, seq in sample:
        if seq.true_length <= 12:
            attr = shapley_exact(params, seq, target, message_id=mid)
        else:
            attr = shapley_sampled(
                params, seq, target,
                n_samples=int(opts["n_samples"]), seed=cfg.seed, message_id=mid,
            )
        for pos in range(attr.true_length):
            rows.append({
                "message_id": mid,
                "position": pos,
                "word": tokens[pos],
                "class": opts["target_class"],
                "phi": float(attr.values[pos]),
            })
    pd.DataFrame(rows).to_csv(cfg.path("attribution.csv"), index=False)

    table = global_importance(
        params, sample, target,
        min_count=int(opts["min_count"]), n_samples=int(opts["n_samples"]),
        seed=cfg.seed,
    )
    pd.DataFrame(table, columns=["word", "mean_abs_phi", "count"]).to_csv(
        cfg.path("global_importance.csv"), index=False
    )
    return [cfg.path("attribution.csv"), cfg.path("global_importance.csv")]


def _agg_config(cfg: PipelineConfig) -> agg.AggregateConfig:
    opts = dict(cfg["aggregate"])
    for key in ("pre_window", "event_window"):
        if key in opts:
            opts[key] = tuple(opts[key])
    if "exret_windows" in opts:
        opts["exret_windows"] = {k: tuple(v) for k, v in opts["exret_windows"].items()}
    return agg.AggregateConfig(**opts)


def stage_eventstudy(cfg: PipelineConfig) -> list[Path]:
    announcements = corpus.load_announcements(cfg.path("announcements.csv"))
    quotes = corpus.load_quotes(cfg.path("quotes.csv"))
    factors = corpus.load_factors(cfg.path("factors.csv"))
    config = _agg_config(cfg)
    table = agg.event_study(announcements, quotes, factors, config)
    table.to_csv(cfg.path("eventstudy.csv"), index=False)
    return [cfg.path("eventstudy.csv")]


def stage_aggregate(cfg: PipelineConfig) -> list[Path]:
    messages, users = corpus.load_corpus(
        cfg.path("messages.jsonl"), cfg.path("users.jsonl")
    )
    announcements = corpus.load_announcements(cfg.path("announcements.csv"))
    factors = corpus.load_factors(cfg.path("factors.csv"))
    config = _agg_config(cfg)

    vectors: dict[str, np.ndarray] = {}
    with open(cfg.path("emotions.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            vectors[rec["message_id"]] = np.asarray(rec["probs"], dtype=float)
    sentiments: dict[str, weaklabel.SentimentScore] = {}
    chat_types: dict[str, str] = {}
    with open(cfg.path("labels.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            sentiments[rec["message_id"]] = weaklabel.SentimentScore(
                p_positive=float(rec["p_positive"])
            )
            chat_types[rec["message_id"]] = rec["chat_type"]

    event_table = pd.read_csv(cfg.path("eventstudy.csv"))
    event_table["day0"] = pd.to_datetime(event_table["day0"]).dt.date

    # only messages that made it through filtering and inference enter panels
    scored = [m for m in messages if m.message_id in vectors]

    def build(message_filter=None) -> pd.DataFrame:
        return agg.assemble_panel(
            scored, users, announcements, factors, vectors, sentiments,
            event_table, config, message_filter=message_filter,
        )

    outputs = []
    panel = build()
    panel.to_csv(cfg.path("panel.csv"), index=False)
    outputs.append(cfg.path("panel.csv"))

    variant_filters = {
        "chat": agg.chat_type_filter(chat_types, {"chat"}),
        "fundamental": agg.chat_type_filter(chat_types, {"fundamental", "earnings"}),
        "original": agg.channel_filter("original"),
        "dissemination": agg.channel_filter("dissemination"),
    }
    for name in cfg["regress"]["variants"]:
        if name in variant_filters:
            message_filter = variant_filters[name]
        elif name in agg.USER_SUBSETS:
            message_filter = agg.USER_SUBSETS[name]
        elif name == "top5":
            message_filter = agg.popularity_filter(users, top=True)
        elif name == "rest":
            message_filter = agg.popularity_filter(users, top=False)
        else:
            raise UsageError(f"unknown panel variant {name!r}")
        variant = build(message_filter)
        path = cfg.path(f"panel_{name}.csv")
        variant.to_csv(path, index=False)
        outputs.append(path)

    counts = agg.message_count_profile(scored, announcements, factors)
    counts.to_csv(cfg.path("message_counts.csv"), index=False)
    outputs.append(cfg.path("message_counts.csv"))
    return outputs


def _emotion_regressors(suffix: str = "_pre") -> tuple[str, ...]:
    return tuple(f"{cls}{suffix}" for cls in EMOTION_CLASSES if cls != "neutral")


def _read_panel(path: Path) -> pd.DataFrame:
    panel = pd.read_csv(path)
    panel["day0"] = pd.to_datetime(panel["day0"]).dt.date
    return panel


def stage_regress(cfg: PipelineConfig) -> list[Path]:
    opts = cfg["regress"]
    lower, upper = opts["limits"]

    def prepare(panel: pd.DataFrame) -> pd.DataFrame:
        panel = panel.copy()
        for col in opts["winsorize_columns"]:
            if col in panel.columns and panel[col].notna().any():
                panel[col] = agg.winsorize(panel[col], lower, upper)
        return panel

    panel = prepare(_read_panel(cfg.path("panel.csv")))
    emotions = _emotion_regressors()
    controls_returns = ("sue", "sue_lag", "exret_m10_m2", "size", "mb",
                        "analysts", "inst", "q4", "loss")
    controls_sue = ("sue_lag", "exret_m10_m2", "size", "mb",
                    "analysts", "inst", "q4", "loss")
    fe = ("firm", "year", "month", "dow")

    models: list[tuple[str, pd.DataFrame, econ.RegressionSpec]] = [
        ("sue_on_emotions", panel, econ.RegressionSpec(
            dependent="sue", emotions=emotions, controls=controls_sue,
            fixed_effects=fe, cluster="firm")),
        ("exret_on_emotions", panel, econ.RegressionSpec(
            dependent="exret_m1_p1", emotions=emotions, controls=controls_returns,
            fixed_effects=fe, cluster="industry_quarter")),
    ]

    vol_panel = panel.copy()
    if vol_panel["volatility"].notna().any():
        vol_panel["vol_top10"] = econ.top_decile_indicator(vol_panel["volatility"])
        models.append(("exret_volatility_interaction", vol_panel, econ.RegressionSpec(
            dependent="exret_m1_p1", emotions=emotions,
            controls=controls_returns + ("vol_top10",),
            interactions=(("vol_top10", "happy_pre"),),
            fixed_effects=fe, cluster="industry_quarter")))

    for name in opts["variants"]:
        path = cfg.path(f"panel_{name}.csv")
        if not path.exists():
            raise DataError(f"{path} is missing; run the 'aggregate' stage first")
        vp = prepare(_read_panel(path))
        if len(vp) == 0:
            logger.warning("variant panel %s is empty; skipped", name)
            continue
        models.append((f"exret_{name}", vp, econ.RegressionSpec(
            dependent="exret_m1_p1", emotions=emotions, controls=controls_returns,
            fixed_effects=fe, cluster="industry_quarter")))

    rows = []
    for model_name, frame, spec in models:
        try:
            fit = econ.fe_regress(frame, spec)
        except ValueError as exc:
            raise DataError(f"regression {model_name!r} failed: {exc}") from exc
        for term in fit.term_order:
            rows.append({
                "model": model_name,
                "regressor": term,
                "coef": fit.coef[term],
                "se": fit.se[term],
                "t": fit.tstat[term],
                "p": fit.pvalue[term],
                "stars": fit.stars(term),
                "adj_r2": fit.adj_r2,
                "n_obs": fit.n_obs,
                "within_sd": fit.within_sd,
            })
    pd.DataFrame(rows).to_csv(cfg.path("regression_table.csv"), index=False)
    return [cfg.path("regression_table.csv")]


def stage_portfolio(cfg: PipelineConfig) -> list[Path]:
    panel = _read_panel(cfg.path("panel.csv"))
    quotes = corpus.load_quotes(cfg.path("quotes.csv"))
    factors = corpus.load_factors(cfg.path("factors.csv"))
    opts = cfg["portfolio"]
    returns = econ.portfolio_backtest(
        panel, quotes, deciles=int(opts["deciles"]), hold=int(opts["hold"])
    )
    out = returns.copy()
    out["date"] = out["date"].map(lambda d: d.isoformat())
    out.to_csv(cfg.path("portfolio_returns.csv"), index=False)
    fit = econ.alpha_regression(returns, factors)
    pd.DataFrame([{
        "regressor": term,
        "coef": fit.coef[term],
        "se": fit.se[term],
        "t": fit.tstat[term],
        "p": fit.pvalue[term],
        "stars": fit.stars(term),
    } for term in fit.term_order]).to_csv(cfg.path("portfolio_alpha.csv"), index=False)
    return [cfg.path("portfolio_returns.csv"), cfg.path("portfolio_alpha.csv")]


def stage_toymodel(cfg: PipelineConfig) -> list[Path]:
    opts = dict(cfg["toymodel"])
    etas = opts.pop("eta_grid")
    signals = toymodel.Signals(s1=opts.pop("s1"), s2=opts.pop("s2"))
    params = toymodel.ToyParams(**opts)
    rows = toymodel.eta_sweep(params, etas, signals)
    pd.DataFrame(rows).to_csv(cfg.path("toymodel_sweep.csv"), index=False)
    return [cfg.path("toymodel_sweep.csv")]


STAGE_FUNCS = {
    "synth": stage_synth,
    "normalize": stage_normalize,
    "label": stage_label,
    "train": stage_train,
    "infer": stage_infer,
    "attribute": stage_attribute,
    "eventstudy": stage_eventstudy,
    "aggregate": stage_aggregate,
    "regress": stage_regress,
    "portfolio": stage_portfolio,
    "toymodel": stage_toymodel,
}


def run_stage(stage: str, cfg: PipelineConfig) -> list[Path]:
    if stage not in STAGE_FUNCS:
        raise UsageError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _check_inputs(stage, cfg)
    outputs = STAGE_FUNCS[stage](cfg)
    _write_manifest(stage, cfg, inputs, outputs)
    return outputs


def run_pipeline(cfg: PipelineConfig, stages: list[str] | None = None) -> None:
    for stage in stages or STAGES:
        run_stage(stage, cfg)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="emopanel", description=__doc__)
    parser.add_argument("stage", choices=STAGES + ["all"])
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config path; defaults apply when omitted")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        raw = {}
        if args.config is not None:
            if not args.config.exists():
                raise UsageError(f"config file {args.config} does not exist")
            raw = json.loads(args.config.read_text())
        cfg = PipelineConfig(raw, out_override=args.out, seed_override=args.seed)
        if args.stage == "all":
            run_pipeline(cfg)
        else:
            run_stage(args.stage, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, corpus.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
