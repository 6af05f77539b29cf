"""
Constants for drift and reconstruction metrics.
"""

from __future__ import annotations

from typing import Final


# ---- Depth ----
DEPTH_DELTA_THRESHOLD: Final[float] = 1.25

# ---- Series columns ----
PER_FRAME_COLUMNS: Final[list[str]] = ["frame", "translation_error", "rotation_error_deg"]

# ---- Summary keys ----
SUMMARY_KEYS: Final[list[str]] = [
    "endpoint_drift",
    "mean_translation_error",
    "mean_rotation_error_deg",
    "pointmap_mse",
    "accuracy_mean",
    "accuracy_median",
    "completeness_mean",
    "completeness_median",
    "normal_consistency_mean",
    "normal_consistency_median",
    "depth_abs_rel",
    "depth_delta_1",
]
