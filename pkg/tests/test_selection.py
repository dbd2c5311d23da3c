"""Confusion matrices, parent collapse, F1 conventions, random search."""

import json

import numpy as np
import pytest

from kwspot import nn
from kwspot.features import MfccConfig
from kwspot.selection import (
    ConfusionMatrix2,
    ConfusionMatrix8,
    SearchSpace,
    TrialResult,
    accuracy_parent,
    collapse_to_parent,
    confusion_from_predictions,
    f1_name,
    precision_name,
    rank_trials,
    recall_name,
    run_search,
    sample_trial,
)


def onehotish(indices):
    """Probability rows peaking at the given indices."""
    out = np.full((len(indices), 8), 0.01)
    out[np.arange(len(indices)), indices] = 0.93
    return out


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        labels = np.repeat(np.arange(8), 2)
        cm = confusion_from_predictions(onehotish(labels), labels)
        assert np.array_equal(cm.counts, np.eye(8, dtype=int) * 2)

    def test_single_sample_cell(self):
        cm = confusion_from_predictions(onehotish([5]), [4])
        assert cm.counts[4, 5] == 1
        assert cm.total == 1

    def test_uniform_probs_tie_break_to_zero(self):
        probs = np.full((1, 8), 0.125)
        cm = confusion_from_predictions(probs, [3])
        assert cm.counts[3, 0] == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion_from_predictions(np.zeros((0, 8)), [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            confusion_from_predictions(onehotish([1]), [1, 2])


def brute_force_parent_cm(predictions, labels):
    """Independent per-sample regrouping oracle."""
    counts = np.zeros((2, 2), dtype=np.int64)
    for probs, label in zip(predictions, labels):
        pred = int(np.argmax(probs))
        counts[0 if label < 4 else 1, 0 if pred < 4 else 1] += 1
    return counts


class TestCollapse:
    def test_intraparent_confusion_counts_as_correct(self):
        counts = np.zeros((8, 8), dtype=int)
        counts[4, 5] = 5  # static predicted as ambiance
        cm2 = collapse_to_parent(ConfusionMatrix8(counts))
        assert (cm2.tn, cm2.tp, cm2.fp, cm2.fn) == (5, 0, 0, 0)

    def test_diagonal(self):
        cm2 = collapse_to_parent(ConfusionMatrix8(np.eye(8, dtype=int) * 2))
        assert (cm2.tp, cm2.tn, cm2.fp, cm2.fn) == (8, 8, 0, 0)

    def test_total_conserved_and_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 60))
            probs = rng.random((n, 8))
            probs /= probs.sum(axis=1, keepdims=True)
            labels = rng.integers(0, 8, n)
            cm8 = confusion_from_predictions(probs, labels)
            cm2 = collapse_to_parent(cm8)
            assert cm2.total == cm8.total == n
            assert np.array_equal(cm2.counts, brute_force_parent_cm(probs, labels))


class TestF1:
    def _cm2(self, tp, fn, fp, tn):
        return ConfusionMatrix2(np.array([[tp, fn], [fp, tn]]))

    def test_perfect(self):
        assert f1_name(self._cm2(8, 0, 0, 0)) == 1.0

    def test_balanced_point_nine(self):
        cm = self._cm2(9, 1, 1, 9)
        assert abs(precision_name(cm) - 0.9) < 1e-12
        assert abs(recall_name(cm) - 0.9) < 1e-12
        assert abs(f1_name(cm) - 0.9) < 1e-12
        assert abs(accuracy_parent(cm) - 0.9) < 1e-12

    def test_undefined_precision_convention(self):
        assert f1_name(self._cm2(0, 0, 3, 0)) == 0.0

    def test_all_zero(self):
        assert f1_name(self._cm2(0, 0, 0, 0)) == 0.0

    def test_bounds_random(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            cm = self._cm2(*rng.integers(0, 50, 4))
            assert 0.0 <= f1_name(cm) <= 1.0

    def test_one_iff_no_errors(self):
        assert f1_name(self._cm2(5, 0, 0, 7)) == 1.0
        assert f1_name(self._cm2(5, 1, 0, 7)) < 1.0
        assert f1_name(self._cm2(5, 0, 1, 7)) < 1.0


class TestSearchSpace:
    def test_empty_axis_rejected(self):
        with pytest.raises(ValueError, match="conv_filters"):
            SearchSpace(conv_filters=())

    def test_nonpositive_constraints_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            SearchSpace(max_macs_per_window=0)

    def test_json_round_trip(self, tmp_path):
        space = SearchSpace(conv_filters=(8, 16), seed=3)
        path = tmp_path / "space.json"
        path.write_text(json.dumps(space.to_dict()))
        assert SearchSpace.from_json(path) == space

    def test_packaged_default_space_loads(self):
        from kwspot.cli import DEFAULT_SPACE

        space = SearchSpace.from_json(DEFAULT_SPACE)
        assert space.trial_budget == 72


def pinned_space(**overrides):
    base = dict(
        frame_length_s=(0.032,), frame_stride_s=(0.032,), num_mel_filters=(40,),
        conv_dim=(1,), conv_filters=(32,), num_conv_layers=(2,), kernel=(3,),
        dropout_rate=(0.25, 0.25), dense_width=(0,), seed=0,
    )
    base.update(overrides)
    return SearchSpace(**base)


class TestSampleTrial:
    def test_pinned_space_returns_reference_model(self):
        cfg, spec, rate = sample_trial(pinned_space(), np.random.default_rng(0))
        assert cfg == MfccConfig()
        assert rate == 0.25
        assert spec == nn.default_model_spec((31, 13))

    def test_unsatisfiable_constraints(self):
        space = pinned_space(max_macs_per_window=1)
        with pytest.raises(ValueError, match="unsatisfiable"):
            sample_trial(space, np.random.default_rng(0))

    def test_same_seed_same_sequence(self):
        space = SearchSpace()
        a = [sample_trial(space, np.random.default_rng(7)) for _ in range(3)]
        b = [sample_trial(space, np.random.default_rng(7)) for _ in range(3)]
        assert a == b

    def test_constraints_hold_for_all_draws(self):
        space = SearchSpace(max_parameters=6000, max_macs_per_window=150_000)
        rng = np.random.default_rng(5)
        for _ in range(25):
            _, spec, _ = sample_trial(space, rng)
            assert nn.parameter_count(spec) <= 6000
            assert nn.mac_count(spec) <= 150_000


class TestRanking:
    def _result(self, trial_id, f1, params, status="ok"):
        return TrialResult(
            trial_id=trial_id, mfcc_config={}, model_spec={}, dropout_rate=0.2,
            val_f1=f1, val_accuracy=f1, parameters=params, macs_per_window=0,
            status=status,
        )

    def test_f1_descending(self):
        ranked = rank_trials([self._result(0, 0.5, 100), self._result(1, 0.9, 100)])
        assert [r.trial_id for r in ranked] == [1, 0]

    def test_tie_broken_by_fewer_parameters(self):
        ranked = rank_trials([self._result(0, 0.9, 5000), self._result(1, 0.9, 3000)])
        assert [r.trial_id for r in ranked] == [1, 0]

    def test_full_tie_broken_by_trial_id(self):
        ranked = rank_trials([self._result(1, 0.9, 100), self._result(0, 0.9, 100)])
        assert [r.trial_id for r in ranked] == [0, 1]

    def test_failed_trials_sink(self):
        ranked = rank_trials([self._result(0, 0.0, 10, "failed"),
                              self._result(1, 0.1, 10)])
        assert [r.trial_id for r in ranked] == [1, 0]


class TestRunSearch:
    def test_budget_one(self, tiny_manifest, tmp_path):
        space = pinned_space(conv_filters=(8,))
        ranked = run_search(
            space, tiny_manifest, tiny_manifest.base_dir, tmp_path,
            budget=1, train_config=nn.TrainConfig(epochs=3, batch_size=8, seed=0),
        )
        assert len(ranked) == 1
        r = ranked[0]
        assert r.status == "ok"
        assert 0.0 <= r.val_f1 <= 1.0
        assert (tmp_path / "ranking.csv").exists()
        assert (tmp_path / "trial_000.json").exists()
        assert (tmp_path / r.weights_path).exists()

    def test_good_beats_degenerate(self, tiny_manifest, tmp_path):
        tc = nn.TrainConfig(epochs=6, batch_size=8, seed=0)
        good = run_search(
            pinned_space(conv_filters=(16,), dropout_rate=(0.1, 0.1)),
            tiny_manifest, tiny_manifest.base_dir, tmp_path / "good",
            budget=1, train_config=tc,
        )[0]
        degenerate = run_search(
            pinned_space(conv_filters=(1,), dropout_rate=(0.9, 0.9), seed=1),
            tiny_manifest, tiny_manifest.base_dir, tmp_path / "bad",
            budget=1, train_config=tc,
        )[0]
        degenerate.trial_id = 1
        combined = rank_trials([good, degenerate])
        assert combined[0] is good
        assert good.val_f1 > degenerate.val_f1

    def test_ranking_deterministic(self, tiny_manifest, tmp_path):
        space = SearchSpace(seed=4, conv_filters=(4, 8), num_mel_filters=(20,),
                            conv_dim=(1,))
        tc = nn.TrainConfig(epochs=2, batch_size=8, seed=0)
        a = run_search(space, tiny_manifest, tiny_manifest.base_dir,
                       tmp_path / "a", budget=2, train_config=tc)
        b = run_search(space, tiny_manifest, tiny_manifest.base_dir,
                       tmp_path / "b", budget=2, train_config=tc)
        assert [(r.trial_id, r.val_f1, r.parameters) for r in a] == \
               [(r.trial_id, r.val_f1, r.parameters) for r in b]
        assert (tmp_path / "a" / "ranking.csv").read_text() == \
               (tmp_path / "b" / "ranking.csv").read_text()
