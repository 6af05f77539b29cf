"""
Pipeline - windowed streaming, multi-task loss, staged training, checkpoints.

Quick start:
    from core import pipeline

    model = pipeline.init_model(config)
    result = pipeline.run_sequence(scene.frames, model, config)
    report = pipeline.evaluate_drift(model, config, scene)
"""

from core.pipeline.checkpoint import load_checkpoint, save_checkpoint
from core.pipeline.evaluation import evaluate_drift, read_metrics, write_metrics
from core.pipeline.loss import LOSS_TERMS, camera_loss, depth_loss, multi_task_loss, pointmap_loss
from core.pipeline.model import MemoryStreamParams, ModelParams, group_rng, init_model
from core.pipeline.optimizer import AdamW
from core.pipeline.stream import (
    SequenceResult,
    distill,
    memory_hook,
    new_buffer,
    run_baseline,
    run_sequence,
    step_window,
)
from core.pipeline.trainer import Clip, Rung, TrainResult, build_rungs, clip_loss, train, train_step
from core.pipeline.windows import WindowSchedule, make_windows


__all__ = [
    "WindowSchedule",
    "make_windows",
    "MemoryStreamParams",
    "ModelParams",
    "group_rng",
    "init_model",
    "new_buffer",
    "distill",
    "memory_hook",
    "step_window",
    "SequenceResult",
    "run_sequence",
    "run_baseline",
    "LOSS_TERMS",
    "depth_loss",
    "pointmap_loss",
    "camera_loss",
    "multi_task_loss",
    "AdamW",
    "Clip",
    "Rung",
    "TrainResult",
    "build_rungs",
    "clip_loss",
    "train_step",
    "train",
    "evaluate_drift",
    "write_metrics",
    "read_metrics",
    "save_checkpoint",
    "load_checkpoint",
]
