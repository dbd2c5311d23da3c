"""Network engine: shapes, softmax, gradients, dropout, training."""

import numpy as np
import pytest

from kwspot import nn


def zero_weights(spec):
    w = nn.init_model(spec, 0)
    return [{k: np.zeros_like(v) for k, v in lw.items()} for lw in w]


class TestSpecs:
    def test_default_shape_propagation(self):
        spec = nn.default_model_spec((31, 13))
        shapes = nn.propagate_shapes(spec)
        assert shapes == [(31, 13), (29, 32), (14, 32), (14, 32), (12, 32),
                          (6, 32), (6, 32), (192,), (8,)]

    def test_parameter_count(self):
        spec = nn.default_model_spec((31, 13))
        # conv1: 32*13*3+32, conv2: 32*32*3+32, dense: 8*192+8
        assert nn.parameter_count(spec) == 1248 + 32 + 3072 + 32 + 1536 + 8 == 5928

    def test_mac_count(self):
        spec = nn.default_model_spec((31, 13))
        assert nn.mac_count(spec) == 29 * 32 * 13 * 3 + 12 * 32 * 32 * 3 + 8 * 192

    def test_final_layer_enforced(self):
        with pytest.raises(ValueError, match="dense"):
            nn.ModelSpec((nn.reshape(), nn.flatten(), nn.dense(8)), (4, 4))

    def test_kernel_larger_than_sequence_rejected(self):
        with pytest.raises(ValueError, match="kernel"):
            nn.default_model_spec((4, 13), filters=(32, 32), kernel=3)

    def test_bad_dropout_rate(self):
        with pytest.raises(ValueError):
            nn.dropout(1.0)

    def test_spec_dict_round_trip(self):
        spec = nn.default_model_spec((31, 13), dense_width=16)
        assert nn.ModelSpec.from_dict(spec.to_dict()) == spec

    def test_2d_variant_shapes(self):
        spec = nn.default_model_spec((31, 13), filters=(8,), kernel=3, conv_dim=2)
        shapes = nn.propagate_shapes(spec)
        assert shapes[0] == (31, 13, 1)
        assert shapes[1] == (29, 11, 8)
        assert shapes[2] == (14, 5, 8)


class TestInit:
    def test_conv1_kernel_shape(self):
        weights = nn.init_model(nn.default_model_spec((31, 13)), 0)
        assert weights[1]["W"].shape == (32, 13, 3)

    def test_biases_zero(self):
        weights = nn.init_model(nn.default_model_spec((31, 13)), 0)
        for lw in weights:
            if "b" in lw:
                assert np.all(lw["b"] == 0.0)

    def test_he_uniform_bound(self):
        spec = nn.default_model_spec((31, 13))
        weights = nn.init_model(spec, 0)
        bound = np.sqrt(6.0 / (13 * 3))
        assert np.abs(weights[1]["W"]).max() <= bound

    def test_deterministic(self):
        spec = nn.default_model_spec((31, 13))
        a, b = nn.init_model(spec, 5), nn.init_model(spec, 5)
        for la, lb in zip(a, b):
            for k in la:
                assert np.array_equal(la[k], lb[k])


class TestForward:
    def test_uniform_on_zero_everything(self):
        spec = nn.default_model_spec((31, 13))
        probs = nn.forward(spec, zero_weights(spec), np.zeros((31, 13)))
        np.testing.assert_allclose(probs, np.full(8, 0.125), atol=1e-12)

    def test_softmax_properties(self):
        spec = nn.default_model_spec((31, 13))
        w = nn.init_model(spec, 1)
        x = np.random.default_rng(0).normal(0, 2, (16, 31, 13))
        probs = nn.forward(spec, w, x)
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_infer_deterministic(self):
        spec = nn.default_model_spec((31, 13), dropout_rate=0.5)
        w = nn.init_model(spec, 1)
        x = np.random.default_rng(0).normal(0, 1, (31, 13))
        assert np.array_equal(nn.forward(spec, w, x), nn.forward(spec, w, x))

    def test_shape_mismatch_rejected(self):
        spec = nn.default_model_spec((31, 13))
        with pytest.raises(ValueError, match="shape"):
            nn.forward(spec, nn.init_model(spec, 0), np.zeros((30, 13)))


class TestLossAndGrads:
    def test_uniform_loss_is_log8(self):
        spec = nn.default_model_spec((31, 13))
        x = np.zeros((4, 31, 13))
        y = np.eye(8)[[0, 3, 5, 7]]
        loss, _ = nn.loss_and_grads(spec, zero_weights(spec), x, y)
        assert abs(loss - np.log(8)) < 1e-9

    def test_near_optimum_loss_and_grads_vanish(self):
        spec = nn.ModelSpec((nn.reshape(), nn.flatten(), nn.dense(8, "softmax")), (2, 4))
        weights = zero_weights(spec)
        weights[2]["b"] = np.zeros(8)
        weights[2]["b"][2] = 50.0  # forces p(class 2) -> 1
        x = np.random.default_rng(0).normal(0, 1, (3, 2, 4))
        y = np.eye(8)[[2, 2, 2]]
        loss, grads = nn.loss_and_grads(spec, weights, x, y)
        assert loss < 1e-9
        assert max(np.abs(g).max() for lw in grads for g in lw.values()) < 1e-8

    def test_empty_batch_rejected(self):
        spec = nn.default_model_spec((31, 13))
        with pytest.raises(ValueError):
            nn.loss_and_grads(spec, nn.init_model(spec, 0),
                              np.zeros((0, 31, 13)), np.zeros((0, 8)))


class TestGradientCheck:
    def test_small_default_spec(self):
        spec = nn.default_model_spec((16, 6), filters=(8, 8), kernel=3,
                                     dropout_rate=0.25)
        assert nn.gradient_check(spec, 0) < 1e-4

    def test_dense_only(self):
        spec = nn.ModelSpec(
            (nn.reshape(), nn.flatten(), nn.dense(16), nn.dense(8, "softmax")), (6, 4)
        )
        assert nn.gradient_check(spec, 1) < 1e-6

    def test_conv_only_kernel_3(self):
        spec = nn.ModelSpec(
            (nn.reshape(), nn.conv1d(4, 3), nn.flatten(), nn.dense(8, "softmax")),
            (10, 3),
        )
        assert nn.gradient_check(spec, 2) < 1e-5

    def test_conv2d_and_pools(self):
        spec = nn.default_model_spec((12, 8), filters=(3,), kernel=3,
                                     dropout_rate=0.2, conv_dim=2)
        assert nn.gradient_check(spec, 3) < 1e-4

    def test_large_spec_rejected(self):
        spec = nn.default_model_spec((31, 13), filters=(64, 64), dense_width=64)
        with pytest.raises(ValueError, match="20k"):
            nn.gradient_check(spec, 0)


class TestDropout:
    def test_inverted_scaling_expectation(self):
        # identity dense exposes the dropped activations as logits
        spec = nn.ModelSpec(
            (nn.reshape(), nn.flatten(), nn.dropout(0.25), nn.dense(8, "softmax")),
            (1, 8),
        )
        weights = zero_weights(spec)
        weights[3]["W"] = np.eye(8)
        x = np.ones((1, 1, 8))
        rng = np.random.default_rng(0)
        acc = np.zeros(8)
        n = 10_000
        for _ in range(n):
            logits, _ = nn._forward(spec, weights, x, True, rng)
            acc += logits[0]
        assert np.abs(acc / n - 1.0).max() < 0.03

    def test_infer_mode_ignores_dropout(self):
        spec = nn.ModelSpec(
            (nn.reshape(), nn.flatten(), nn.dropout(0.9), nn.dense(8, "softmax")),
            (1, 8),
        )
        weights = zero_weights(spec)
        weights[3]["W"] = np.eye(8)
        logits, _ = nn._forward(spec, weights, np.ones((1, 1, 8)), False, None)
        np.testing.assert_allclose(logits[0], 1.0)


def separable_toy_data(n_per_class=20, seed=0):
    """Two well-separated gaussian clusters mapped to subclasses 0 and 4."""
    rng = np.random.default_rng(seed)
    a = rng.normal(+2.0, 0.3, (n_per_class, 8, 3))
    b = rng.normal(-2.0, 0.3, (n_per_class, 8, 3))
    x = np.concatenate([a, b])
    y = np.array([0] * n_per_class + [4] * n_per_class)
    return x, y


class TestFit:
    def test_separable_data_reaches_full_accuracy(self):
        x, y = separable_toy_data()
        spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3, dropout_rate=0.1)
        config = nn.TrainConfig(epochs=30, batch_size=8, seed=0, patience=30)
        weights, history = nn.fit(spec, (x, y), (x, y), config)
        assert max(h["train_accuracy"] for h in history) == 1.0
        # returned weights are F1-selected; they must at least nail the parents
        parent_preds = nn.forward(spec, weights, x).argmax(axis=1) < 4
        assert np.mean(parent_preds == (y < 4)) == 1.0
        assert len(history) <= 30

    def test_zero_epochs_returns_initial(self):
        x, y = separable_toy_data(4)
        spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3)
        config = nn.TrainConfig(epochs=0, batch_size=4, seed=7)
        weights, history = nn.fit(spec, (x, y), (x, y), config)
        assert history == []
        init = nn.init_model(spec, 7)
        for lw, li in zip(weights, init):
            for k in lw:
                assert np.array_equal(lw[k], li[k])

    def test_deterministic_training(self):
        x, y = separable_toy_data(8)
        spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3, dropout_rate=0.2)
        config = nn.TrainConfig(epochs=5, batch_size=8, seed=11)
        w1, h1 = nn.fit(spec, (x, y), (x, y), config)
        w2, h2 = nn.fit(spec, (x, y), (x, y), config)
        assert h1 == h2
        for a, b in zip(w1, w2):
            for k in a:
                assert np.array_equal(a[k], b[k])

    def test_divergence_guard(self):
        x, y = separable_toy_data(4)
        with np.errstate(over="ignore", invalid="ignore"):
            x = x * 1e308  # overflows the first matmul into inf -> nan loss
            spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3)
            config = nn.TrainConfig(epochs=2, batch_size=4, seed=0)
            with pytest.raises(nn.TrainingDiverged):
                nn.fit(spec, (x, y), (x, y), config)

    def test_batch_larger_than_train_rejected(self):
        x, y = separable_toy_data(2)
        spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3)
        with pytest.raises(ValueError, match="batch_size"):
            nn.fit(spec, (x, y), (x, y), nn.TrainConfig(batch_size=64))

    def test_best_epoch_selection_prefers_earlier_on_ties(self):
        # constant validation F1 across epochs must keep the first epoch's weights
        x, y = separable_toy_data(8)
        spec = nn.default_model_spec((8, 3), filters=(4,), kernel=3)
        config = nn.TrainConfig(epochs=3, batch_size=8, seed=2, patience=10)
        weights, history = nn.fit(spec, (x, y), (x, y), config)
        best_f1 = max(h["val_f1"] for h in history)
        first_best = next(h["epoch"] for h in history if h["val_f1"] == best_f1)
        assert history[first_best]["val_f1"] == best_f1
