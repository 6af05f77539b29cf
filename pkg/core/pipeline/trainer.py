"""
Trainer - two-stage schedule over synthetic clips.

Stage 1 (warm-up): backbone frozen; memory stream and injector trained on
the first `stage1_windows` windows of each clip.
Stage 2 (joint): every group trainable; clip length climbs the
`stage2_ladder` (windows per clip), optionally widening the window length
per rung (`stage2_window_lengths`).

Each step logs the loss of the current parameters before updating them; a
final record after the last update closes each stage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from tqdm import trange

from core.backbone import Frame, FreezePlan, Predictions, set_trainable, verify_frozen
from core.errors import DivergenceError, NumericalError
from core.numerics import GradTape, Tensor
from core.pipeline.constants import STAGE1_FLAGS, STAGE2_FLAGS, STAGE_JOINT, STAGE_WARMUP
from core.pipeline.loss import multi_task_loss
from core.pipeline.model import ModelParams, init_model
from core.pipeline.optimizer import AdamW
from core.pipeline.stream import run_sequence
from core.schemas import MetricRecord, RunConfig


logger = logging.getLogger(__name__)


class Clip(Protocol):
    """Anything with frames and per-frame ground truth (e.g. a SyntheticScene)."""
    frames: Sequence[Frame]
    ground_truth: Sequence[Predictions]


@dataclass
class TrainResult:
    model: ModelParams
    metrics: list[MetricRecord] = field(default_factory=list)
    frozen_hashes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Rung:
    """One block of steps at a fixed clip geometry."""
    stage: int
    steps: int
    n_windows: int
    window_length: int
    lr: float
    flags: dict


def clip_loss(
    model: ModelParams,
    config: RunConfig,
    clip: Clip,
    n_windows: Optional[int] = None,
) -> tuple[Tensor, dict[str, Tensor]]:
    """Stream the first n_windows windows of a clip and score every covered frame."""
    result = run_sequence(clip.frames, model, config, n_windows=n_windows)
    gt = [clip.ground_truth[i] for i in result.frame_indices]
    return multi_task_loss(result.predictions, gt)


def _record(stage: int, step: int, total: Tensor, terms: dict[str, Tensor]) -> MetricRecord:
    return MetricRecord(
        stage=stage,
        step=step,
        loss_total=total.item(),
        loss_depth=terms["depth"].item(),
        loss_pointmap=terms["pointmap"].item(),
        loss_camera=terms["camera"].item(),
    )


def train_step(
    model: ModelParams,
    config: RunConfig,
    clip: Clip,
    plan: FreezePlan,
    optimizer: AdamW,
    n_windows: Optional[int],
    stage: int,
    step: int,
) -> tuple[ModelParams, MetricRecord]:
    """
    One gradient step on one clip.

    Returns:
        (updated model, metrics of the pre-update parameters)
    """
    named = model.named()
    trainable = {name: t for name, t in named.items() if plan.is_trainable(name)}
    try:
        with GradTape() as tape:
            tape.watch(*trainable.values())
            total, terms = clip_loss(model, config, clip, n_windows)
        if not math.isfinite(total.item()):
            raise DivergenceError(step, total.item())
        grads = tape.gradient(total, list(trainable.values()))
        if trainable:
            updated = optimizer.step(named, dict(zip(trainable, grads)))
            model = model.replace_tensors(updated)
    except DivergenceError:
        raise
    except NumericalError as exc:
        logger.warning("Non-finite values at step %d: %s", step, exc)
        raise DivergenceError(step, float("nan")) from exc
    return model, _record(stage, step, total, terms)


def _stage_config(config: RunConfig, window_length: int) -> RunConfig:
    if window_length == config.window_length:
        return config
    return config.with_updates(window_length=window_length, stride=min(config.stride, window_length))


def build_rungs(config: RunConfig) -> list[Rung]:
    rungs = []
    if config.stage1_steps:
        rungs.append(Rung(STAGE_WARMUP, config.stage1_steps, config.stage1_windows,
                          config.window_length, config.lr_stage1, STAGE1_FLAGS))
    if config.stage2_steps:
        ladder = config.stage2_ladder
        lengths = config.stage2_window_lengths or [config.window_length] * len(ladder)
        per_rung, extra = divmod(config.stage2_steps, len(ladder))
        for r, (n_windows, length) in enumerate(zip(ladder, lengths)):
            steps = per_rung + (extra if r == len(ladder) - 1 else 0)
            if steps:
                rungs.append(Rung(STAGE_JOINT, steps, n_windows, length, config.lr_stage2, STAGE2_FLAGS))
    return rungs


def train(
    config: RunConfig,
    dataset: Sequence[Clip],
    model: Optional[ModelParams] = None,
    progress: bool = False,
) -> TrainResult:
    """
    Run the staged schedule.

    Args:
        config: Run configuration
        dataset: Clips; step s uses dataset[s % len(dataset)]
        model: Starting parameters (init_model(config) by default)
        progress: Show a tqdm bar per rung

    Returns:
        TrainResult with the final model and per-step metrics
    """
    model = model or init_model(config)
    result = TrainResult(model=model)
    step = 0

    for stage in (STAGE_WARMUP, STAGE_JOINT):
        rungs = [r for r in build_rungs(config) if r.stage == stage]
        if not rungs:
            continue
        plan = set_trainable(model.named(), rungs[0].flags)
        logger.info("Stage %d: %d rungs, %d steps", stage, len(rungs), sum(r.steps for r in rungs))
        for rung in rungs:
            optimizer = AdamW(lr=rung.lr, weight_decay=config.weight_decay)
            rung_config = _stage_config(config, rung.window_length)
            for _ in _steps(rung.steps, progress, f"stage {stage} ({rung.n_windows} windows)"):
                clip = dataset[step % len(dataset)]
                model, record = train_step(model, rung_config, clip, plan, optimizer,
                                           rung.n_windows, stage, step)
                result.metrics.append(record)
                step += 1
        total, terms = _guarded_loss(model, rung_config, dataset[step % len(dataset)], rungs[-1].n_windows, step)
        result.metrics.append(_record(stage, step, total, terms))
        verify_frozen(plan, model.named())
        result.frozen_hashes.update(plan.frozen_hashes)

    result.model = model
    return result


def _guarded_loss(model, config, clip, n_windows, step):
    try:
        total, terms = clip_loss(model, config, clip, n_windows)
    except NumericalError as exc:
        raise DivergenceError(step, float("nan")) from exc
    if not math.isfinite(total.item()):
        raise DivergenceError(step, total.item())
    return total, terms


def _steps(count: int, progress: bool, desc: str):
    if not progress:
        return range(count)
    return trange(count, desc=desc, leave=False)
