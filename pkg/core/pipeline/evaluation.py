"""
Evaluation - stream a long sequence and measure drift against ground truth.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional

from core.analytics import DriftReport, drift_report
from core.pipeline.model import ModelParams
from core.pipeline.stream import run_sequence
from core.pipeline.trainer import Clip
from core.schemas import MetricRecord, RunConfig


def evaluate_drift(
    model: ModelParams,
    config: RunConfig,
    sequence: Clip,
    use_memory: Optional[bool] = None,
) -> DriftReport:
    """
    Args:
        model: Parameters to evaluate (inference only, no tape)
        config: Window geometry and memory settings
        sequence: Frames with ground truth, typically many windows long
        use_memory: False evaluates the windowed baseline on the same windows

    Returns:
        DriftReport anchored on the first frame
    """
    result = run_sequence(sequence.frames, model, config, use_memory=use_memory)
    gt = [sequence.ground_truth[i] for i in result.frame_indices]
    return drift_report(result.predictions, gt)


def write_metrics(path: str | Path, records: Iterable[MetricRecord]) -> None:
    """One JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.model_dump_json() + "\n" for r in records))


def read_metrics(path: str | Path) -> list[MetricRecord]:
    lines = Path(path).read_text().splitlines()
    return [MetricRecord.model_validate_json(line) for line in lines if line.strip()]
