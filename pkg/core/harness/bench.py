"""
Scaling benchmark - wall time and retained bytes versus sequence length.

Methods (same backbone size for all):
- memory: windowed streaming with the memory stream and injector
- windowed-baseline: the same windows, no memory
- full-global-attention: one window holding every frame (quadratic reference)

Retained bytes count what must stay resident while streaming: the buffer and
carried SSM states plus the keys and values of the widest attention span.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import ConfigError
from core.harness.constants import BENCH_METHODS, BENCH_OVERRIDES, BENCH_REPEATS
from core.harness.scene import gen_scene
from core.pipeline import init_model, run_sequence
from core.schemas import BenchRecord, RunConfig, build_run_config


logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["method", "frames", "seconds", "peak_bytes"]


def bench_config(seed: int = 0, **overrides) -> RunConfig:
    return build_run_config({**BENCH_OVERRIDES, "seed": seed, **overrides})


def _method_config(config: RunConfig, method: str, n_frames: int) -> tuple[RunConfig, bool]:
    if method == "memory":
        return config, True
    if method == "windowed-baseline":
        return config, False
    if method == "full-global-attention":
        return config.with_updates(window_length=n_frames, stride=n_frames), False
    raise ConfigError(f"Unknown bench method '{method}'; expected one of {BENCH_METHODS}")


def kv_bytes(config: RunConfig, frames_in_window: int, itemsize: int = 8) -> int:
    """Keys + values of one attention span."""
    return 2 * frames_in_window * config.num_patches * config.token_dim * itemsize


def bench_scaling(
    frame_counts: Sequence[int],
    methods: Sequence[str] = BENCH_METHODS,
    config: Optional[RunConfig] = None,
    repeats: int = BENCH_REPEATS,
) -> list[BenchRecord]:
    """
    Time inference for each method and frame count.

    Args:
        frame_counts: Ascending sequence lengths
        methods: Subset of BENCH_METHODS
        config: Model geometry (bench_config() by default)
        repeats: Timings per point; the median is reported

    Returns:
        One BenchRecord per (method, count)
    """
    config = config or bench_config()
    counts = sorted(frame_counts)
    scene = gen_scene(config.seed, counts[-1], "orbit", config.image_size, config.patch_size, config.channels)
    model = init_model(config)

    records = []
    for method in methods:
        for n in counts:
            run_config, use_memory = _method_config(config, method, n)
            frames = scene.frames[:n]
            timings = []
            for _ in range(repeats):
                start = time.perf_counter()
                result = run_sequence(frames, model, run_config, use_memory=use_memory)
                timings.append(time.perf_counter() - start)
            peak = result.peak_retained_bytes + kv_bytes(config, min(run_config.window_length, n))
            records.append(BenchRecord(
                method=method,
                frames=n,
                seconds=float(np.median(timings)),
                peak_bytes=peak,
            ))
            logger.info("bench %s n=%d: %.4fs, %d bytes", method, n, records[-1].seconds, peak)
    return records


def records_frame(records: Sequence[BenchRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=BENCH_COLUMNS)


def fit_exponent(records: Sequence[BenchRecord], method: str) -> float:
    """Slope of log(seconds) against log(frames) by least squares."""
    frame = records_frame(records)
    rows = frame[frame["method"] == method]
    if len(rows) < 2:
        raise ConfigError(f"Need at least two frame counts to fit '{method}', got {len(rows)}")
    slope, _ = np.polyfit(np.log(rows["frames"]), np.log(rows["seconds"]), 1)
    return float(slope)


def write_bench_csv(records: Sequence[BenchRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False)
    return path
