"""
Tests for core.pipeline: windows, streaming, loss, optimizer, training and
checkpoints.
"""

import json

import numpy as np
import pytest

from core.backbone import set_trainable
from core.errors import ConfigError, DivergenceError, FormatError, GapError, NumericalError, ShapeError
from core.harness import gen_scene, identity_deviation
from core.harness.checks import check_loss
from core.numerics import Tensor
from core.params import hash_groups
from core.pipeline import (
    AdamW,
    build_rungs,
    distill,
    evaluate_drift,
    init_model,
    load_checkpoint,
    make_windows,
    multi_task_loss,
    read_metrics,
    run_baseline,
    run_sequence,
    save_checkpoint,
    step_window,
    new_buffer,
    train,
    train_step,
    write_metrics,
)
from tests.conftest import toy_config


# =============================================================================
# Windows
# =============================================================================

class TestWindows:

    def test_non_overlapping(self):
        schedule = make_windows(10, 4, 4)
        assert [list(w) for w in schedule] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
        assert not schedule.is_overlapping

    def test_overlapping_covers_every_frame(self):
        schedule = make_windows(9, 4, 2)
        assert schedule.is_overlapping
        assert schedule.covered() == set(range(9))
        assert schedule[-1].stop == 9

    def test_single_short_window(self):
        assert [list(w) for w in make_windows(3, 8, 8)] == [[0, 1, 2]]

    def test_stride_above_length_raises(self):
        with pytest.raises(GapError):
            make_windows(10, 2, 3)

    def test_empty_sequence_raises(self):
        with pytest.raises(ShapeError):
            make_windows(0, 2, 2)


# =============================================================================
# Streaming
# =============================================================================

class TestStreaming:

    def test_cold_start_matches_windowed_backbone(self, config, model, scene):
        assert identity_deviation(model, config, scene, n_windows=None) <= 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_cold_start_identity_across_configs(self, seed, scene):
        rng = np.random.default_rng(seed)
        config = toy_config(
            seed=seed,
            horizon=int(rng.integers(1, 4)),
            alpha=float(rng.uniform()),
            entry_granularity=["window", "frame"][seed % 2],
            share_stream_weights=bool(seed % 2),
            scan_mode=["sequential", "chunked"][seed % 2],
        )
        assert identity_deviation(init_model(config), config, scene, n_windows=3) <= 1e-12

    def test_random_injector_breaks_identity(self, scene):
        config = toy_config(zero_init=False)
        assert identity_deviation(init_model(config), config, scene, n_windows=2) > 0

    @pytest.mark.parametrize("zero_init", [True, False])
    def test_second_window_depends_on_first_only_through_injector(self, zero_init, scene):
        config = toy_config(zero_init=zero_init)
        model = init_model(config)
        other = gen_scene(5, 4, "corridor", 28, 14, 3)
        outputs = []
        for first in (scene.frames[:2], other.frames[:2]):
            buf = new_buffer(config)
            step_window(list(first), buf, model, config)
            outputs.append(step_window(scene.frames[2:4], buf, model, config)[0])
        gaps = [
            np.max(np.abs(a.pointmap.data - b.pointmap.data)) + np.max(np.abs(a.depth.data - b.depth.data))
            for a, b in zip(*outputs)
        ]
        if zero_init:
            assert max(gaps) == 0.0
        else:
            assert max(gaps) > 0.0

    def test_buffer_fills_to_horizon(self, config, model, scene):
        result = run_sequence(scene.frames, model, config)
        lengths = [e["buffer_length_after"] for e in result.events]
        assert lengths == [1, 2, 3, 3]
        assert len(result.buffer) == config.horizon

    def test_retained_bytes_constant_once_full(self, config, model):
        short = gen_scene(1, 12, "orbit", 28, 14, 3)
        long = gen_scene(1, 24, "orbit", 28, 14, 3)
        a = run_sequence(short.frames, model, config).peak_retained_bytes
        b = run_sequence(long.frames, model, config).peak_retained_bytes
        assert a == b > 0

    def test_baseline_keeps_no_state(self, config, model, scene):
        result = run_baseline(scene.frames, model, config)
        assert result.buffer is None
        assert result.peak_retained_bytes == 0
        assert len(result.predictions) == scene.n_frames

    def test_overlapping_windows_last_write_wins(self, model, scene):
        config = toy_config(window_length=3, stride=2)
        result = run_sequence(scene.frames, model, config)
        assert result.frame_indices == list(range(scene.n_frames))
        buf = new_buffer(config)
        preds = []
        for window in make_windows(scene.n_frames, 3, 2):
            preds.append(dict(zip(window, step_window([scene.frames[i] for i in window], buf, model, config)[0])))
        last = {}
        for p in preds:
            last.update(p)
        np.testing.assert_array_equal(result.predictions[2].depth.data, last[2].depth.data)

    def test_frame_granularity_one_entry_per_frame(self, model, scene):
        config = toy_config(entry_granularity="frame", horizon=5)
        buf = new_buffer(config)
        _, event = step_window(scene.frames[:2], buf, model, config)
        assert len(buf) == 2
        assert buf.entry_shape == (4, 8)
        assert event["readout_tokens"] == 8

    def test_append_mode_runs(self, scene):
        config = toy_config(injection_mode="append")
        result = run_sequence(scene.frames, init_model(config), config)
        assert len(result.predictions) == scene.n_frames

    def test_resume_from_buffer(self, config, model, scene):
        whole = run_sequence(scene.frames, model, config)
        first = run_sequence(scene.frames[:4], model, config)
        rest = run_sequence(scene.frames[4:], model, config, buf=first.buffer)
        np.testing.assert_array_equal(
            whole.predictions[-1].pointmap.data, rest.predictions[-1].pointmap.data
        )

    def test_distill_granularities(self):
        feats = [Tensor(np.full((2, 3), v)) for v in (1.0, 3.0)]
        np.testing.assert_array_equal(distill(feats, "window").data, 2.0)
        assert distill(feats, "frame").shape == (4, 3)


# =============================================================================
# Loss and optimizer
# =============================================================================

class TestLoss:

    def test_perfect_prediction_has_zero_loss(self, scene):
        total, terms = multi_task_loss(scene.ground_truth, scene.ground_truth)
        assert total.item() == pytest.approx(0.0, abs=1e-12)
        assert set(terms) == {"depth", "pointmap", "camera"}

    def test_total_is_unweighted_sum(self, config, model, scene):
        preds = run_sequence(scene.frames, model, config).predictions
        total, terms = multi_task_loss(preds, scene.ground_truth)
        assert total.item() == pytest.approx(sum(t.item() for t in terms.values()), rel=1e-12)

    def test_quaternion_sign_is_ignored(self, scene):
        gt = scene.ground_truth[:1]
        flipped = [type(gt[0])(Tensor(-gt[0].quaternion.data), gt[0].translation, gt[0].depth, gt[0].pointmap)]
        _, terms = multi_task_loss(flipped, gt)
        assert terms["camera"].item() == pytest.approx(0.0, abs=1e-12)

    def test_pointmap_offset_adds_mean_squared_norm(self, scene):
        gt = scene.ground_truth[:3]
        rng = np.random.default_rng(11)
        offsets = [rng.normal(size=g.pointmap.shape) for g in gt]
        shifted = [
            type(g)(g.quaternion, g.translation, g.depth, Tensor(g.pointmap.data + d))
            for g, d in zip(gt, offsets)
        ]
        base, _ = multi_task_loss(gt, gt)
        total, terms = multi_task_loss(shifted, gt)
        expected = np.mean(np.sum(np.stack(offsets) ** 2, axis=-1))
        assert terms["pointmap"].item() == pytest.approx(expected, rel=1e-12)
        assert total.item() - base.item() == pytest.approx(expected, rel=1e-12)
        assert terms["depth"].item() == pytest.approx(0.0, abs=1e-12)

    def test_frame_count_mismatch_raises(self, scene):
        with pytest.raises(ShapeError):
            multi_task_loss(scene.ground_truth[:2], scene.ground_truth[:3])

    @pytest.mark.parametrize("seed", range(3))
    def test_loss_gradient(self, seed):
        result = check_loss(seed)
        assert result.passed, result


class TestAdamW:

    def test_first_step_moves_by_lr(self):
        opt = AdamW(lr=0.1)
        out = opt.step({"w": Tensor([1.0, -1.0])}, {"w": Tensor([2.0, -3.0])})
        np.testing.assert_allclose(out["w"].data, [0.9, -0.9], atol=1e-6)

    def test_only_named_gradients_update(self):
        params = {"a": Tensor([1.0]), "b": Tensor([1.0])}
        out = AdamW(lr=0.1).step(params, {"a": Tensor([1.0])})
        assert set(out) == {"a"}

    def test_weight_decay_shrinks_without_gradient(self):
        out = AdamW(lr=0.1, weight_decay=0.5).step({"w": Tensor([2.0])}, {"w": Tensor([0.0])})
        np.testing.assert_allclose(out["w"].data, [1.9])


# =============================================================================
# Training
# =============================================================================

class TestTraining:

    def test_rungs_split_stage_two_steps(self):
        config = toy_config(stage2_steps=7, stage2_ladder=[2, 3, 4])
        rungs = build_rungs(config)
        assert [(r.stage, r.steps, r.n_windows) for r in rungs] == [(1, 3, 2), (2, 2, 2), (2, 2, 3), (2, 3, 4)]

    def test_stage_one_keeps_backbone_frozen(self, config, scene):
        model = init_model(config)
        before = hash_groups(model.named())
        result = train(config, [scene], model=model)
        after = hash_groups(result.model.named())
        assert after["backbone"] == before["backbone"]
        assert after["injector"] != before["injector"]
        assert result.frozen_hashes["backbone"] == before["backbone"]
        assert len(result.metrics) == config.stage1_steps + 1

    def test_stage_two_trains_backbone(self, scene):
        config = toy_config(stage1_steps=0, stage2_steps=2, stage2_ladder=[1])
        model = init_model(config)
        result = train(config, [scene], model=model)
        assert hash_groups(result.model.named())["backbone"] != hash_groups(model.named())["backbone"]

    def test_identical_runs_are_bitwise_identical(self, config, scene, tmp_path):
        for run in ("a", "b"):
            result = train(config, [scene])
            write_metrics(tmp_path / run / "metrics.jsonl", result.metrics)
            save_checkpoint(tmp_path / run / "ckpt", result.model, config)
        assert (tmp_path / "a/metrics.jsonl").read_bytes() == (tmp_path / "b/metrics.jsonl").read_bytes()
        assert (tmp_path / "a/ckpt/params.bin").read_bytes() == (tmp_path / "b/ckpt/params.bin").read_bytes()
        assert read_metrics(tmp_path / "a/metrics.jsonl")[0].stage == 1

    def test_zero_steps_returns_initial_model(self, scene):
        config = toy_config(stage1_steps=0, stage2_steps=0)
        model = init_model(config)
        result = train(config, [scene], model=model)
        assert result.metrics == []
        assert hash_groups(result.model.named()) == hash_groups(model.named())

    def test_zero_learning_rate_keeps_loss_constant(self, scene):
        config = toy_config(lr_stage1=0.0)
        model = init_model(config)
        result = train(config, [scene], model=model)
        assert len(result.metrics) == config.stage1_steps + 1
        assert len({m.loss_total for m in result.metrics}) == 1
        assert hash_groups(result.model.named()) == hash_groups(model.named())

    def test_all_groups_frozen_keeps_loss_constant(self, config, model, scene):
        plan = set_trainable(model.named(), {"backbone": False, "memory": False, "injector": False})
        optimizer = AdamW(lr=0.1, weight_decay=0.5)
        before = hash_groups(model.named())
        current, losses = model, []
        for step in range(3):
            current, record = train_step(current, config, scene, plan, optimizer, 2, 1, step)
            losses.append(record.loss_total)
        assert losses[0] == losses[1] == losses[2]
        assert hash_groups(current.named()) == before

    def test_update_failure_raises_divergence(self, config, scene, monkeypatch):
        def broken_step(self, params, grads):
            raise NumericalError("non-finite update")

        monkeypatch.setattr("core.pipeline.trainer.AdamW.step", broken_step)
        with pytest.raises(DivergenceError) as info:
            train(config, [scene])
        assert info.value.step == 0

    def test_non_finite_loss_raises_divergence(self, config, scene, monkeypatch):
        calls = []

        def exploding_loss(model, config, clip, n_windows=None):
            calls.append(n_windows)
            if len(calls) == 2:
                raise NumericalError("loss overflow")
            return Tensor(1.0), {t: Tensor(1.0 / 3.0) for t in ("depth", "pointmap", "camera")}

        monkeypatch.setattr("core.pipeline.trainer.clip_loss", exploding_loss)
        with pytest.raises(DivergenceError) as info:
            train(config, [scene])
        assert info.value.step == 1

    @pytest.mark.slow
    def test_stage_one_reduces_loss(self):
        config = toy_config(stage1_steps=200, stage1_windows=2)
        scene = gen_scene(0, 8, "orbit", 28, 14, 3)
        result = train(config, [scene])
        stage1 = [m for m in result.metrics if m.stage == 1]
        assert stage1[-1].loss_total < stage1[0].loss_total


# =============================================================================
# Drift evaluation
# =============================================================================

class TestEvaluation:

    def test_untrained_memory_matches_baseline(self, config, model, scene):
        with_memory = evaluate_drift(model, config, scene)
        baseline = evaluate_drift(model, config, scene, use_memory=False)
        assert with_memory.endpoint_drift == pytest.approx(baseline.endpoint_drift, abs=1e-12)
        np.testing.assert_allclose(
            with_memory.per_frame["translation_error"], baseline.per_frame["translation_error"], atol=1e-12
        )

    def test_one_row_per_frame(self, config, model, scene):
        report = evaluate_drift(model, config, scene)
        assert len(report.per_frame) == scene.n_frames
        assert report.per_frame["translation_error"].iloc[0] == pytest.approx(0.0, abs=1e-12)


# =============================================================================
# Checkpoints
# =============================================================================

class TestCheckpoint:

    def test_round_trip(self, config, model, scene, tmp_path):
        result = run_sequence(scene.frames, model, config)
        save_checkpoint(tmp_path, model, config, buf=result.buffer)
        loaded, loaded_config, buf = load_checkpoint(tmp_path)
        assert loaded_config == config
        assert hash_groups(loaded.named()) == hash_groups(model.named())
        assert len(buf) == len(result.buffer)

    def test_tampered_parameters_detected(self, config, model, tmp_path):
        save_checkpoint(tmp_path, model, config)
        hashes = json.loads((tmp_path / "hashes.json").read_text())
        hashes["backbone"] = "0" * 64
        (tmp_path / "hashes.json").write_text(json.dumps(hashes))
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path)

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ConfigError):
            toy_config(window_size=3)
