"""Corpus ingestion, sample restrictions, and the synthetic generator."""

import json
from datetime import datetime, timezone

import numpy as np
import pytest

from emopanel.corpus import (
    CorpusError,
    RawMessage,
    classify_information_channel,
    filter_sample,
    load_corpus,
    write_factors,
    write_messages,
    write_quotes,
    write_users,
)
from emopanel.synth import SynthConfig, synth_generate


def _msg(i, user="u1", tickers=("AAPL",), text="hello world", **kwargs):
    return RawMessage(
        message_id=f"m{i}",
        user_id=user,
        tickers=list(tickers),
        text=text,
        timestamp=datetime(2015, 3, 2, 14, 30, tzinfo=timezone.utc),
        **kwargs,
    )


class TestLoadCorpus:
    def _write(self, tmp_path, message_lines, user_lines=()):
        mpath = tmp_path / "messages.jsonl"
        upath = tmp_path / "users.jsonl"
        mpath.write_text("\n".join(message_lines) + ("\n" if message_lines else ""))
        upath.write_text("\n".join(user_lines) + ("\n" if user_lines else ""))
        return mpath, upath

    def test_empty_files(self, tmp_path):
        mpath, upath = self._write(tmp_path, [])
        messages, users = load_corpus(mpath, upath)
        assert messages == [] and users == []

    def test_single_record(self, tmp_path):
        line = json.dumps({
            "message_id": "m1", "user_id": "u1", "tickers": ["AAPL"],
            "text": "hi", "timestamp": "2015-03-02T14:30:00+00:00",
        })
        mpath, upath = self._write(tmp_path, [line])
        messages, _ = load_corpus(mpath, upath)
        assert len(messages) == 1
        assert messages[0].timestamp.tzinfo is not None

    def test_missing_timestamp_reports_line_one(self, tmp_path):
        line = json.dumps({
            "message_id": "m1", "user_id": "u1", "tickers": ["AAPL"], "text": "hi",
        })
        mpath, upath = self._write(tmp_path, [line])
        with pytest.raises(CorpusError) as err:
            load_corpus(mpath, upath)
        assert err.value.line == 1

    def test_duplicate_message_id(self, tmp_path):
        line = json.dumps({
            "message_id": "m1", "user_id": "u1", "tickers": ["AAPL"],
            "text": "hi", "timestamp": "2015-03-02T14:30:00+00:00",
        })
        mpath, upath = self._write(tmp_path, [line, line])
        with pytest.raises(CorpusError) as err:
            load_corpus(mpath, upath)
        assert err.value.line == 2

    def test_malformed_json_line_number(self, tmp_path):
        good = json.dumps({
            "message_id": "m1", "user_id": "u1", "tickers": ["AAPL"],
            "text": "hi", "timestamp": "2015-03-02T14:30:00+00:00",
        })
        mpath, upath = self._write(tmp_path, [good, "{broken"])
        with pytest.raises(CorpusError) as err:
            load_corpus(mpath, upath)
        assert err.value.line == 2

    def test_naive_timestamp_becomes_utc(self):
        m = _msg(1)
        m2 = RawMessage(
            message_id="x", user_id="u", tickers=["A"], text="t",
            timestamp=datetime(2015, 3, 2, 14, 30),
        )
        assert m2.timestamp.tzinfo == timezone.utc
        assert m.timestamp.tzinfo == timezone.utc


LISTING = {"AAPL": "NASDAQ", "GE": "NYSE", "PENNY": "OTC"}
MATCHED = {"AAPL", "GE"}


class TestFilterSample:
    def test_two_ticker_message_dropped_at_single_ticker_stage(self):
        messages = [_msg(1), _msg(2, tickers=("AAPL", "GE"), user="u2")]
        result = filter_sample(messages, [], LISTING, MATCHED, window_user_min=1)
        stages = dict(result.stages)
        assert stages["NASDAQ/NYSE Ticker"] == 2
        assert stages["Single Ticker"] == 1
        assert [m.message_id for m in result.messages] == ["m1"]

    def test_automated_user_dropped(self):
        messages = [
            _msg(i, user="bot", text="same text") for i in range(1001)
        ] + [_msg(9999, user="human", text="unique words")]
        result = filter_sample(
            messages, [], LISTING, MATCHED, window_user_min=1,
            automated_threshold=1000,
        )
        assert dict(result.stages)["Not Automated"] == 1
        assert [m.message_id for m in result.messages] == ["m9999"]

    def test_min_users_per_group(self):
        messages = [_msg(1, user="u1"), _msg(2, user="u1")]
        result = filter_sample(messages, [], LISTING, MATCHED, window_user_min=2)
        assert result.messages == []
        both = [_msg(1, user="u1"), _msg(2, user="u2")]
        kept = filter_sample(both, [], LISTING, MATCHED, window_user_min=2)
        assert len(kept.messages) == 2

    def test_unlisted_and_unmatched_tickers_dropped(self):
        messages = [
            _msg(1, tickers=("PENNY",)),
            _msg(2, tickers=("GE",), user="u2"),
            _msg(3, tickers=("ZZZZ",), user="u3"),
        ]
        result = filter_sample(messages, [], LISTING, MATCHED, window_user_min=1)
        assert [m.message_id for m in result.messages] == ["m2"]

    def test_idempotent(self):
        messages = [
            _msg(1), _msg(2, user="u2"), _msg(3, tickers=("AAPL", "GE"), user="u3"),
            _msg(4, tickers=("PENNY",), user="u4"),
        ]
        once = filter_sample(messages, [], LISTING, MATCHED, window_user_min=2)
        twice = filter_sample(once.messages, [], LISTING, MATCHED, window_user_min=2)
        assert [m.message_id for m in twice.messages] == [
            m.message_id for m in once.messages
        ]

    def test_stage_counts_monotone(self):
        messages = [_msg(i, user=f"u{i % 3}") for i in range(30)]
        messages += [_msg(100, tickers=("PENNY",), user="u9")]
        result = filter_sample(messages, [], LISTING, MATCHED)
        counts = [c for _, c in result.stages]
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_window_user_min_validation(self):
        with pytest.raises(ValueError):
            filter_sample([], [], LISTING, MATCHED, window_user_min=0)


class TestInformationChannel:
    def test_original(self):
        assert classify_information_channel(_msg(1)) == "original"

    def test_retweet_is_dissemination(self):
        assert classify_information_channel(_msg(1, is_retweet=True)) == "dissemination"

    def test_hyperlink_is_dissemination(self):
        assert classify_information_channel(_msg(1, has_hyperlink=True)) == "dissemination"

    def test_partition(self):
        msgs = [
            _msg(1), _msg(2, is_retweet=True), _msg(3, has_hyperlink=True),
            _msg(4, is_retweet=True, has_hyperlink=True),
        ]
        channels = [classify_information_channel(m) for m in msgs]
        assert set(channels) <= {"original", "dissemination"}
        assert channels.count("original") + channels.count("dissemination") == len(msgs)


class TestSynthGenerate:
    def test_same_seed_byte_identical(self, tmp_path):
        cfg = SynthConfig()
        paths = {}
        for run in ("a", "b"):
            data = synth_generate(11, n_firms=3, n_quarters=2, n_users=10, planted=cfg)
            base = tmp_path / run
            base.mkdir()
            write_messages(base / "messages.jsonl", data.messages)
            write_users(base / "users.jsonl", data.users)
            write_quotes(base / "quotes.csv", data.quotes)
            write_factors(base / "factors.csv", data.factors)
            paths[run] = base
        for name in ("messages.jsonl", "users.jsonl", "quotes.csv", "factors.csv"):
            assert (paths["a"] / name).read_bytes() == (paths["b"] / name).read_bytes()

    def test_zero_noise_unit_market_beta(self):
        cfg = SynthConfig(
            idio_sigma=0.0, betas=(1.0, 0.0, 0.0, 0.0),
            firm_effect_sigma=0.0, planted_happy_exret=0.0, include_junk=False,
        )
        data = synth_generate(3, n_firms=2, n_quarters=1, n_users=5, planted=cfg)
        factor_by_date = {f.date: f for f in data.factors}
        for q in data.quotes:
            f = factor_by_date[q.date]
            assert q.ret == pytest.approx(f.rf + f.mktrf, abs=1e-15)

    def test_true_classes_cover_all_emotions(self):
        data = synth_generate(5, n_firms=4, n_quarters=4, n_users=30)
        classes = set(data.truth.message_class.values())
        assert {"neutral", "happy", "sad", "fear", "surprise"} <= classes

    def test_messages_sorted_and_unique_ids(self):
        data = synth_generate(5, n_firms=2, n_quarters=2, n_users=8)
        ids = [m.message_id for m in data.messages]
        assert len(ids) == len(set(ids))
        stamps = [m.timestamp for m in data.messages]
        assert stamps == sorted(stamps)

    def test_sizes_validated(self):
        with pytest.raises(ValueError):
            synth_generate(1, n_firms=0, n_quarters=1, n_users=1)

    def test_happy_share_in_unit_interval(self):
        data = synth_generate(2, n_firms=3, n_quarters=2, n_users=10)
        shares = np.array(list(data.truth.happy_pre.values()))
        assert np.all((shares >= 0) & (shares <= 1))
