"""
Service layer to assemble drift reports from streamed predictions.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from core.analytics.metrics import depth_scores, pointmap_scores, pose_matrices, trajectory_errors, transform_points
from core.analytics.types import DriftReport
from core.backbone import Predictions
from core.errors import ShapeError


logger = logging.getLogger(__name__)


def _poses(preds: Sequence[Predictions]) -> np.ndarray:
    return pose_matrices(
        np.stack([p.quaternion.numpy() for p in preds]),
        np.stack([p.translation.numpy() for p in preds]),
    )


def drift_report(pred: Sequence[Predictions], gt: Sequence[Predictions]) -> DriftReport:
    """
    Build the DriftReport of one sequence.

    Predicted poses and pointmaps are mapped into the ground-truth frame by the
    transform that aligns the first predicted pose to the first true pose.
    """
    if len(pred) != len(gt) or not pred:
        raise ShapeError(f"drift_report: {len(pred)} predicted frames vs {len(gt)} ground-truth frames")

    per_frame, G = trajectory_errors(_poses(pred), _poses(gt))
    grid = gt[0].grid
    points = pointmap_scores(
        [transform_points(G, p.pointmap.numpy()) for p in pred],
        [g.pointmap.numpy() for g in gt],
        grid,
    )
    depth = depth_scores(
        np.stack([p.depth.numpy() for p in pred]),
        np.stack([g.depth.numpy() for g in gt]),
    )

    report = DriftReport(
        per_frame=per_frame,
        endpoint_drift=float(per_frame["translation_error"].iloc[-1]),
        **points,
        **depth,
    )
    logger.info("Drift over %d frames: endpoint %.4f m", len(pred), report.endpoint_drift)
    return report
