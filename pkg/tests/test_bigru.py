"""BiGRU forward/backward correctness, training behavior, CV, and evaluation."""

import math

import numpy as np
import pytest

from emopanel.bigru import (
    EpochRecord,
    Hyperparams,
    ModelParams,
    backward,
    batch_loss,
    confusion_matrix,
    forward,
    forward_batch,
    gru_cell,
    kfold_cv,
    loss,
    softmax,
    train,
    vocab_digest,
)
from emopanel.textnorm import TokenSequence


def tiny_hp(**overrides) -> Hyperparams:
    base = dict(
        T=5, embed_dim=4, hidden=3, linear_dim=3, dense1=4, dense2=3,
        n_classes=7, batch_size=4, lr=0.05, embed_dropout=0.25,
        max_epochs=5, seed=0, val_fraction=0.0,
    )
    base.update(overrides)
    return Hyperparams(**base)


def tiny_params(vocab_size=20, hp=None, seed=0) -> ModelParams:
    return ModelParams.init(vocab_size, hp or tiny_hp(), np.random.default_rng(seed))


class TestGRUCell:
    def test_zero_fixed_point(self):
        hp = tiny_hp()
        params = tiny_params(hp=hp)
        zeros = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        out = gru_cell(np.zeros(hp.embed_dim), np.zeros(hp.hidden), zeros)
        np.testing.assert_allclose(out, 0.0, atol=0)

    def test_scalar_hand_evaluation(self):
        # d = h = 1, x = 1, h_prev = 0, all weights 1, biases 0
        w = {
            "Wxz": np.ones((1, 1)), "Wxr": np.ones((1, 1)), "Wxh": np.ones((1, 1)),
            "Whz": np.ones((1, 1)), "Whr": np.ones((1, 1)), "Whh": np.ones((1, 1)),
            "bz": np.zeros(1), "br": np.zeros(1), "bh": np.zeros(1),
        }
        out = gru_cell(np.array([1.0]), np.array([0.0]), w)
        sig1 = 1.0 / (1.0 + math.exp(-1.0))
        assert sig1 == pytest.approx(0.7310586, abs=1e-7)
        expected = (1.0 - sig1) * math.tanh(1.0)
        assert out[0] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.2048, abs=5e-5)

    def test_candidate_path_off_keeps_scaled_state(self):
        # zero candidate weights force H = Z * h_prev
        rng = np.random.default_rng(1)
        hp = tiny_hp()
        params = tiny_params(hp=hp, seed=1)
        w = {k: v.copy() for k, v in params.arrays.items()}
        w["Wxh"] = np.zeros_like(w["Wxh"])
        w["Whh"] = np.zeros_like(w["Whh"])
        w["bh"] = np.zeros_like(w["bh"])
        x = rng.normal(size=hp.embed_dim)
        h_prev = rng.normal(size=hp.hidden)
        out = gru_cell(x, h_prev, w)
        z = 1.0 / (1.0 + np.exp(-(x @ w["Wxz"] + h_prev @ w["Whz"] + w["bz"])))
        np.testing.assert_allclose(out, z * h_prev, atol=1e-12)

    def test_shape_mismatch_raises(self):
        params = tiny_params()
        with pytest.raises(ValueError):
            gru_cell(np.zeros(7), np.zeros(3), params.arrays)

    def test_state_stays_bounded(self):
        rng = np.random.default_rng(3)
        params = tiny_params(seed=3)
        h = rng.uniform(-1, 1, size=3)
        for _ in range(50):
            h = gru_cell(rng.normal(size=4), h, params.arrays)
            assert np.max(np.abs(h)) <= 1.0 + 1e-12


class TestForward:
    def test_uniform_probs_with_zero_head(self):
        params = tiny_params()
        params.arrays["Wy"][:] = 0.0
        params.arrays["by"][:] = 0.0
        seq = TokenSequence(ids=[3, 4, 5, 0, 0], true_length=3)
        probs, _ = forward(seq, params)
        np.testing.assert_allclose(probs, np.full(7, 1 / 7), atol=1e-12)

    def test_probs_sum_to_one(self):
        rng = np.random.default_rng(7)
        params = tiny_params(seed=7)
        ids = rng.integers(0, 20, size=(16, 5))
        lengths = rng.integers(0, 6, size=16)
        probs, _ = forward_batch(ids, lengths, params)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(probs > 0)

    def test_palindrome_with_tied_directions(self):
        params = tiny_params(seed=11)
        for name in ("Wxz", "Wxr", "Wxh", "Whz", "Whr", "Whh", "bz", "br", "bh"):
            params.arrays[f"{name}_b"] = params.arrays[name].copy()
        seq = TokenSequence(ids=[4, 9, 4, 0, 0], true_length=3)
        rev = TokenSequence(ids=list(reversed(seq.ids[:3])) + [0, 0], true_length=3)
        p1, _ = forward(seq, params)
        p2, _ = forward(rev, params)
        np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_padding_never_changes_prediction(self):
        params5 = tiny_params(seed=5)
        seq_short = TokenSequence(ids=[2, 3, 0, 0, 0], true_length=2)
        probs_short, _ = forward(seq_short, params5)
        # same tokens, same params, junk ids hidden behind PAD positions
        seq_junk = TokenSequence(ids=[2, 3, 17, 18, 19], true_length=2)
        probs_junk, _ = forward(seq_junk, params5)
        np.testing.assert_allclose(probs_short, probs_junk, atol=0)

    def test_empty_sequence_is_valid(self):
        params = tiny_params()
        probs, _ = forward(TokenSequence(ids=[0] * 5, true_length=0), params)
        assert probs.shape == (7,)
        np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-12)

    def test_class_permutation_equivariance(self):
        params = tiny_params(seed=13)
        seq = TokenSequence(ids=[1, 2, 3, 4, 5], true_length=5)
        base, _ = forward(seq, params)
        perm = np.array([3, 0, 6, 1, 4, 2, 5])
        params.arrays["Wy"] = params.arrays["Wy"][:, perm]
        params.arrays["by"] = params.arrays["by"][perm]
        permuted, _ = forward(seq, params)
        np.testing.assert_allclose(permuted, base[perm], atol=1e-12)


class TestLoss:
    def test_one_hot_is_zero(self):
        probs = np.zeros(7)
        probs[2] = 1.0
        assert loss(probs, 2) == 0.0

    def test_uniform_seven_way(self):
        assert loss(np.full(7, 1 / 7), 3) == pytest.approx(math.log(7), abs=1e-12)
        assert loss(np.full(7, 1 / 7), 3) == pytest.approx(1.9459, abs=1e-4)

    def test_half_probability(self):
        probs = np.array([0.5, 0.5, 0, 0, 0, 0, 0])
        assert loss(probs, 0) == pytest.approx(0.6931, abs=1e-4)

    def test_zero_probability_clamped_and_flagged(self):
        probs = np.zeros(7)
        probs[0] = 1.0
        with pytest.warns(RuntimeWarning):
            value = loss(probs, 3)
        assert value == pytest.approx(-math.log(1e-12))


class TestBackward:
    def test_finite_difference_all_groups(self):
        hp = tiny_hp()
        params = tiny_params(vocab_size=20, hp=hp, seed=0)
        ids = np.array([[3, 5, 7, 0, 0], [2, 2, 9, 11, 4], [1, 0, 0, 0, 0]])
        lengths = np.array([3, 5, 1])
        targets = np.array([2, 6, 0])
        _, cache = forward_batch(ids, lengths, params)
        grads = backward(cache, targets)

        def f() -> float:
            p, _ = forward_batch(ids, lengths, params)
            return batch_loss(p, targets)

        h = 1e-5
        worst = 0.0
        for name in params.keys():
            arr = params.arrays[name]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                fp = f()
                arr[idx] = orig - h
                fm = f()
                arr[idx] = orig
                gn = (fp - fm) / (2 * h)
                ga = grads[name][idx]
                worst = max(worst, abs(ga - gn) / max(1e-6, abs(ga), abs(gn)))
        assert worst < 1e-4

    def test_untouched_embedding_row_zero_gradient(self):
        params = tiny_params()
        ids = np.array([[3, 5, 0, 0, 0]])
        _, cache = forward_batch(ids, np.array([2]), params)
        grads = backward(cache, np.array([1]))
        np.testing.assert_allclose(grads["E"][12], 0.0, atol=0)
        assert np.any(grads["E"][3] != 0)

    def test_dropped_position_zero_embedding_gradient(self):
        params = tiny_params()
        ids = np.array([[3, 5, 7, 0, 0]])
        mask = np.array([[1.0, 0.0, 1.0, 1.0, 1.0]])
        _, cache = forward_batch(
            ids, np.array([3]), params,
            train_mode=True, dropout=0.25, dropout_mask=mask,
        )
        grads = backward(cache, np.array([2]))
        np.testing.assert_allclose(grads["E"][5], 0.0, atol=0)
        assert np.any(grads["E"][3] != 0)

    def test_one_step_descends_on_single_example(self):
        hp = tiny_hp(lr=1e-4)
        params = tiny_params(hp=hp, seed=21)
        ids = np.array([[4, 8, 15, 0, 0]])
        lengths = np.array([3])
        target = np.array([5])
        probs, cache = forward_batch(ids, lengths, params)
        before = batch_loss(probs, target)
        grads = backward(cache, target)
        for name in params.keys():
            params.arrays[name] -= hp.lr * grads[name]
        after_probs, _ = forward_batch(ids, lengths, params)
        assert batch_loss(after_probs, target) < before


class TestTrain:
    def _dataset(self, n=64, seed=0):
        # class = which of two marker tokens appears first
        rng = np.random.default_rng(seed)
        data = []
        for _ in range(n):
            cls = int(rng.integers(0, 2))
            marker = 2 if cls == 0 else 3
            filler = rng.integers(4, 10, size=4).tolist()
            ids = [marker] + filler
            data.append((TokenSequence(ids=ids, true_length=5), cls))
        return data

    def test_zero_lr_keeps_params(self):
        hp = tiny_hp(lr=0.0, max_epochs=3, embed_dropout=0.0)
        data = self._dataset()
        params0 = ModelParams.init(20, hp, np.random.default_rng(hp.seed))
        snapshot = {k: v.copy() for k, v in params0.arrays.items()}
        trained, _ = train(data, hp, vocab_size=20)
        for k in snapshot:
            np.testing.assert_allclose(trained.arrays[k], snapshot[k], atol=0)

    def test_fixed_seed_identical_history(self):
        hp = tiny_hp(max_epochs=4, val_fraction=0.2)
        h1 = train(self._dataset(), hp, vocab_size=20)[1]
        h2 = train(self._dataset(), hp, vocab_size=20)[1]
        assert [r.__dict__ for r in h1] == [r.__dict__ for r in h2]

    def test_learns_separable_data(self):
        hp = tiny_hp(max_epochs=60, lr=0.3, embed_dropout=0.0, batch_size=16)
        params, history = train(self._dataset(n=64), hp, vocab_size=20)
        assert history[-1].train_acc >= 0.95

    def test_early_stopping_restores_best(self):
        hp = tiny_hp(max_epochs=30, val_fraction=0.25, patience=1, lr=0.3)
        params, history = train(self._dataset(n=48, seed=3), hp, vocab_size=20)
        assert len(history) <= 30

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], tiny_hp(), vocab_size=5)

    def test_label_out_of_range_rejected(self):
        seq = TokenSequence(ids=[1, 0, 0, 0, 0], true_length=1)
        with pytest.raises(ValueError):
            train([(seq, 9)], tiny_hp(), vocab_size=5)


class TestKFold:
    def _dataset(self, n=25):
        return [
            (TokenSequence(ids=[2 + (i % 2), 4, 5, 0, 0], true_length=3), i % 2)
            for i in range(n)
        ]

    def test_fold_sizes(self):
        hp = tiny_hp(max_epochs=1)
        results, _ = kfold_cv(self._dataset(25), hp, k=5, vocab_size=10)
        assert len(results) == 5

    def test_identical_items_identical_metrics(self):
        hp = tiny_hp(max_epochs=2)
        data = [(TokenSequence(ids=[2, 3, 4, 0, 0], true_length=3), 1)] * 20
        results, _ = kfold_cv(data, hp, k=4, vocab_size=10)
        first = results[0]
        for r in results[1:]:
            assert r["train_loss"] == pytest.approx(first["train_loss"], abs=1e-12)
            assert r["held_loss"] == pytest.approx(first["held_loss"], abs=1e-12)

    def test_selection_minimizes_in_sample_loss(self):
        hp = tiny_hp(max_epochs=2)
        results, selected = kfold_cv(self._dataset(20), hp, k=4, vocab_size=10)
        losses = [r["train_loss"] for r in results]
        assert losses[selected] == min(losses)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            kfold_cv(self._dataset(10), tiny_hp(), k=1, vocab_size=10)
        with pytest.raises(ValueError):
            kfold_cv(self._dataset(3), tiny_hp(), k=5, vocab_size=10)


class TestConfusionMatrix:
    def test_perfect_predictions_identity(self):
        preds = np.array([0, 1, 2, 3, 4, 5, 6])
        matrix, acc = confusion_matrix(preds, preds, 7)
        np.testing.assert_allclose(matrix, np.eye(7), atol=0)
        assert acc == 1.0

    def test_half_split_row(self):
        matrix, acc = confusion_matrix(np.array([0, 1]), np.array([0, 0]), 3)
        np.testing.assert_allclose(matrix[0], [0.5, 0.5, 0.0], atol=0)
        assert acc == 0.5

    def test_all_wrong_zero_accuracy(self):
        _, acc = confusion_matrix(np.array([1, 2]), np.array([0, 0]), 3)
        assert acc == 0.0

    def test_rows_sum_to_one_when_populated(self):
        rng = np.random.default_rng(0)
        gold = rng.integers(0, 4, size=100)
        preds = rng.integers(0, 4, size=100)
        matrix, _ = confusion_matrix(preds, gold, 4)
        for i in range(4):
            if (gold == i).any():
                assert matrix[i].sum() == pytest.approx(1.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix(np.array([0]), np.array([0, 1]), 2)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        hp = tiny_hp()
        params = tiny_params(hp=hp)
        digest = vocab_digest(["<PAD>", "<NONE>", "alpha"])
        path = tmp_path / "model.npz"
        params.save(path, hp, vocab_hash=digest)
        loaded, hp2, digest2 = ModelParams.load(path)
        assert hp2 == hp
        assert digest2 == digest
        for k in params.keys():
            np.testing.assert_allclose(loaded[k], params[k], atol=0)

    def test_softmax_stability(self):
        big = np.array([1000.0, 1000.0, 999.0])
        out = softmax(big)
        assert np.isfinite(out).all()
        assert out.sum() == pytest.approx(1.0)

    def test_history_record_fields(self):
        rec = EpochRecord(epoch=0, train_loss=1.0, train_acc=0.5)
        assert rec.val_loss is None


class TestHyperparams:
    def test_paper_scale_defaults(self):
        hp = Hyperparams()
        assert (hp.T, hp.embed_dim, hp.hidden) == (30, 200, 256)
        assert (hp.dense1, hp.dense2) == (256, 128)
        assert (hp.batch_size, hp.lr, hp.embed_dropout) == (4096, 0.01, 0.25)
        assert hp.patience == 1

    def test_desk_scale_small(self):
        hp = Hyperparams.desk_scale()
        assert hp.batch_size == 32
        assert max(hp.hidden, hp.dense1, hp.dense2) <= 32

    def test_class_count_restricted(self):
        with pytest.raises(ValueError):
            Hyperparams(n_classes=5)

    def test_dropout_range(self):
        with pytest.raises(ValueError):
            Hyperparams(embed_dropout=1.0)
