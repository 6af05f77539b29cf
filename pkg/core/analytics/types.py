"""
Types for drift and reconstruction reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import pandas as pd


@dataclass(frozen=True)
class DriftReport:
    """
    Accumulated error of a streamed sequence after first-frame alignment.

    per_frame holds one row per frame: frame, translation_error (meters),
    rotation_error_deg. endpoint_drift is the last translation error.
    """
    per_frame: pd.DataFrame
    endpoint_drift: float
    pointmap_mse: float
    accuracy_mean: float
    accuracy_median: float
    completeness_mean: float
    completeness_median: float
    normal_consistency_mean: float
    normal_consistency_median: float
    depth_abs_rel: float
    depth_delta_1: float

    @property
    def translation_errors(self) -> pd.Series:
        return self.per_frame["translation_error"]

    @property
    def rotation_errors(self) -> pd.Series:
        return self.per_frame["rotation_error_deg"]

    def summary(self) -> dict[str, float]:
        """Flat scalar view (for JSON / ablation tables)."""
        return {
            "endpoint_drift": self.endpoint_drift,
            "mean_translation_error": float(self.translation_errors.mean()),
            "mean_rotation_error_deg": float(self.rotation_errors.mean()),
            "pointmap_mse": self.pointmap_mse,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_median": self.accuracy_median,
            "completeness_mean": self.completeness_mean,
            "completeness_median": self.completeness_median,
            "normal_consistency_mean": self.normal_consistency_mean,
            "normal_consistency_median": self.normal_consistency_median,
            "depth_abs_rel": self.depth_abs_rel,
            "depth_delta_1": self.depth_delta_1,
        }
