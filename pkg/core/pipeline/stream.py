"""
Streaming loop - the Extract-Propagate-Inject cycle over windows.

Main workflow for one window (step_window):
1. Extract: patchify the frames and run a hook-free pass up to the feature
   layer; distil the window's feature F_t
2. Refine: read out each stream (history + F_t) and run its Mamba block from
   the carried state
3. Inject: rerun the backbone with the refined current tokens added to the
   keys / values of the injected layers, then apply the heads
4. Update: push the refined feature into the buffer and propagate the states

This module handles ONLY the forward logic. Training and file I/O live in
trainer.py and checkpoint.py.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from core import memory
from core.backbone import Frame, KVHook, Predictions, aggregate, heads, patchify
from core.injector import InjectorParams, append_memory_rows, inject_kv
from core.memory import MemoryBuffer
from core.numerics import Tensor, ops
from core.pipeline.model import ModelParams
from core.pipeline.windows import make_windows
from core.schemas import EntryGranularity, InjectionMode, RunConfig
from core.ssm import mamba_block


logger = logging.getLogger(__name__)


def new_buffer(config: RunConfig) -> MemoryBuffer:
    return memory.create_buffer(
        capacity=config.horizon,
        inner_dim=config.inner_dim,
        state_dim=config.state_dim,
        alpha=config.alpha,
    )


def distill(features: Sequence[Tensor], granularity: str) -> Tensor:
    """
    Current-window feature fed to the read-out.

    window: mean over the window's frames, [N, D]
    frame:  the frames stacked in order, [L*N, D]
    """
    if granularity == EntryGranularity.FRAME:
        return ops.concat(list(features), axis=0)
    if len(features) == 1:
        return features[0]
    return ops.mean(ops.concat([ops.reshape(f, (1,) + f.shape) for f in features], axis=0), axis=0)


def _trailing_rows(x: Tensor, count: int) -> Tensor:
    return ops.index(x, slice(x.shape[0] - count, x.shape[0]))


def _leading_rows(x: Tensor, count: int) -> Optional[Tensor]:
    return ops.index(x, slice(0, count)) if count > 0 else None


def memory_hook(
    injector: InjectorParams,
    K_tokens: Tensor,
    V_tokens: Tensor,
    mode: str = InjectionMode.TRAILING.value,
    K_history: Optional[Tensor] = None,
    V_history: Optional[Tensor] = None,
) -> KVHook:
    """
    Build the aggregate() hook that injects memory into designated layers.

    K_tokens / V_tokens must already be aligned to the window's token grid.
    """
    def hook(layer: int, K: Tensor, V: Tensor) -> tuple[Tensor, Tensor]:
        branches = injector.for_layer(layer)
        if branches is None:
            return K, V
        K, V = inject_kv(K, V, K_tokens, V_tokens, branches)
        if mode == InjectionMode.APPEND:
            K, V = append_memory_rows(K, V, K_history, V_history, branches)
        return K, V

    return hook


def step_window(
    frames: Sequence[Frame],
    buf: Optional[MemoryBuffer],
    model: ModelParams,
    config: RunConfig,
) -> tuple[list[Predictions], dict]:
    """
    Process one window and advance the memory.

    Args:
        frames: The window's frames (1 <= len <= L)
        buf: Memory buffer (modified in place); None runs the bare backbone
        model: All parameter groups
        config: Run configuration

    Returns:
        Tuple of (per-frame predictions, event_data dict)
    """
    tokens = [patchify(f, model.backbone) for f in frames]
    grid = tokens[0].grid
    use_memory = buf is not None

    event = {
        'frames': [f.t for f in frames],
        'memory': use_memory,
        'buffer_length_before': len(buf) if buf is not None else 0,
        'readout_tokens': 0,
    }

    hook = None
    if use_memory:
        n = tokens[0].num_tokens
        extracted = aggregate(tokens, model.backbone, upto=config.feature_layer)
        current = distill(extracted, config.entry_granularity)
        current_rows = current.shape[0]

        refined: dict[str, Tensor] = {}
        history: dict[str, Optional[Tensor]] = {}
        states = {}
        for stream in ("K", "V"):
            read = memory.read_out(buf, current, stream)
            F_hat, states[stream] = mamba_block(
                read,
                model.memory.block(stream),
                buf.state(stream),
                scan_mode=config.scan_mode,
                chunk=config.scan_chunk,
            )
            refined[stream] = _trailing_rows(F_hat, current_rows)
            history[stream] = _leading_rows(F_hat, read.shape[0] - current_rows)
        event['readout_tokens'] = read.shape[0]

        repeat = len(frames) if config.entry_granularity == EntryGranularity.WINDOW else 1
        aligned = {s: ops.concat([refined[s]] * repeat, axis=0) for s in refined}
        hook = memory_hook(
            model.injector,
            aligned["K"],
            aligned["V"],
            mode=config.injection_mode,
            K_history=history["K"],
            V_history=history["V"],
        )

    features = aggregate(tokens, model.backbone, hook=hook)
    predictions = [heads(f, model.backbone.heads, grid) for f in features]

    if use_memory:
        if config.entry_granularity == EntryGranularity.FRAME:
            for k in range(len(frames)):
                rows = slice(k * n, (k + 1) * n)
                memory.update(
                    buf,
                    ops.index(refined["K"], rows),
                    ops.index(refined["V"], rows),
                    raw=ops.index(current, rows),
                )
        else:
            memory.update(buf, refined["K"], refined["V"], raw=current)
        memory.propagate(buf, states["K"], states["V"])

    event['buffer_length_after'] = len(buf) if buf is not None else 0
    event['retained_bytes'] = memory.retained_bytes(buf) if buf is not None else 0
    logger.debug("window %s: %s", event['frames'], event)
    return predictions, event


@dataclass
class SequenceResult:
    """Per-frame predictions of a streamed sequence (later windows overwrite earlier ones)."""
    predictions: list[Predictions]
    frame_indices: list[int] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    buffer: Optional[MemoryBuffer] = None

    @property
    def peak_retained_bytes(self) -> int:
        return max((e['retained_bytes'] for e in self.events), default=0)


def run_sequence(
    frames: Sequence[Frame],
    model: ModelParams,
    config: RunConfig,
    buf: Optional[MemoryBuffer] = None,
    use_memory: Optional[bool] = None,
    n_windows: Optional[int] = None,
) -> SequenceResult:
    """
    Stream a frame sequence window by window.

    Args:
        frames: Ordered frames
        model: All parameter groups
        config: Run configuration (window length, stride, memory settings)
        buf: Buffer to continue from (resume); a fresh one otherwise
        use_memory: Overrides config.memory_enabled (False = windowed baseline)
        n_windows: Process only the first n windows

    Returns:
        SequenceResult; overlapping windows resolve duplicate frames by last write
    """
    use_memory = config.memory_enabled if use_memory is None else use_memory
    schedule = make_windows(len(frames), config.window_length, config.stride)
    windows = schedule.windows if n_windows is None else schedule.windows[:n_windows]
    if use_memory and buf is None:
        buf = new_buffer(config)
    active = buf if use_memory else None

    by_frame: dict[int, Predictions] = {}
    events = []
    for k, window in enumerate(windows):
        preds, event = step_window([frames[i] for i in window], active, model, config)
        event['window'] = k
        events.append(event)
        for i, pred in zip(window, preds):
            by_frame[i] = pred

    covered = sorted(by_frame)
    logger.info("Streamed %d windows over %d frames (memory=%s)", len(windows), len(covered), use_memory)
    return SequenceResult(
        predictions=[by_frame[i] for i in covered],
        frame_indices=covered,
        events=events,
        buffer=active,
    )


def run_baseline(frames: Sequence[Frame], model: ModelParams, config: RunConfig) -> SequenceResult:
    """Windowed backbone without memory on the same windows."""
    return run_sequence(frames, model, config, use_memory=False)
