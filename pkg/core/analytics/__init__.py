"""
Analytics package exports.
"""

from core.analytics.constants import PER_FRAME_COLUMNS, SUMMARY_KEYS
from core.analytics.metrics import (
    depth_scores,
    first_frame_alignment,
    grid_normals,
    pointmap_scores,
    pose_matrices,
    trajectory_errors,
)
from core.analytics.service import drift_report
from core.analytics.types import DriftReport

__all__ = [
    "PER_FRAME_COLUMNS",
    "SUMMARY_KEYS",
    "DriftReport",
    "drift_report",
    "pose_matrices",
    "first_frame_alignment",
    "trajectory_errors",
    "grid_normals",
    "pointmap_scores",
    "depth_scores",
]
