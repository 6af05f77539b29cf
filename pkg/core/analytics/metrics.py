"""
Metric computations for trajectories, pointmaps and depth.

All functions take plain arrays; poses are 4x4 camera-to-world matrices.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from core.analytics.constants import DEPTH_DELTA_THRESHOLD, PER_FRAME_COLUMNS
from core.errors import ShapeError


# ---- Poses ----

def pose_matrices(quaternions: np.ndarray, translations: np.ndarray) -> np.ndarray:
    """[n, 4] (w, x, y, z) + [n, 3] -> [n, 4, 4]."""
    quaternions = np.atleast_2d(quaternions)
    translations = np.atleast_2d(translations)
    T = np.tile(np.eye(4), (len(quaternions), 1, 1))
    T[:, :3, :3] = Rotation.from_quat(np.roll(quaternions, -1, axis=1)).as_matrix()
    T[:, :3, 3] = translations
    return T


def inverse_pose(T: np.ndarray) -> np.ndarray:
    R, t = T[:3, :3], T[:3, 3]
    inv = np.eye(4)
    inv[:3, :3] = R.T
    inv[:3, 3] = -R.T @ t
    return inv


def first_frame_alignment(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Rigid transform G with G @ pred[0] == gt[0]."""
    return gt[0] @ inverse_pose(pred[0])


def translation_errors(aligned: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.linalg.norm(aligned[:, :3, 3] - gt[:, :3, 3], axis=1)


def rotation_errors_deg(aligned: np.ndarray, gt: np.ndarray) -> np.ndarray:
    relative = np.einsum("nji,njk->nik", gt[:, :3, :3], aligned[:, :3, :3])
    return np.degrees(Rotation.from_matrix(relative).magnitude())


def trajectory_errors(pred: np.ndarray, gt: np.ndarray) -> tuple[pd.DataFrame, np.ndarray]:
    """
    Per-frame errors after first-frame anchoring.

    Args:
        pred: [n, 4, 4] predicted poses
        gt: [n, 4, 4] ground-truth poses

    Returns:
        (per-frame DataFrame, alignment transform G)
    """
    if pred.shape != gt.shape or pred.ndim != 3 or len(pred) == 0:
        raise ShapeError(f"trajectory_errors: pred {list(pred.shape)} vs gt {list(gt.shape)}")
    G = first_frame_alignment(pred, gt)
    aligned = G[None] @ pred
    frame = pd.DataFrame({
        "frame": np.arange(len(pred)),
        "translation_error": translation_errors(aligned, gt),
        "rotation_error_deg": rotation_errors_deg(aligned, gt),
    })
    return frame[PER_FRAME_COLUMNS], G


def transform_points(G: np.ndarray, points: np.ndarray) -> np.ndarray:
    return points @ G[:3, :3].T + G[:3, 3]


# ---- Pointmaps ----

def nearest_distances(source: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each source point to its nearest target point, and that index."""
    distances, indices = cKDTree(target).query(source)
    return distances, indices


def grid_normals(points: np.ndarray) -> np.ndarray:
    """
    Unit normals of a [rows, cols, 3] point grid, flattened to [rows*cols, 3].

    Grids thinner than 2 along either axis have no defined normal (NaN rows).
    """
    rows, cols, _ = points.shape
    if rows < 2 or cols < 2:
        return np.full((rows * cols, 3), np.nan)
    d_row = np.gradient(points, axis=0)
    d_col = np.gradient(points, axis=1)
    normals = np.cross(d_col, d_row).reshape(-1, 3)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norms > 0, normals / norms, np.nan)


def normal_consistency(pred_normals: np.ndarray, gt_normals: np.ndarray, matches: np.ndarray) -> np.ndarray:
    """|cos| between each predicted normal and the normal of its matched ground-truth point."""
    return np.abs(np.sum(pred_normals * gt_normals[matches], axis=1))


def pointmap_scores(pred: list[np.ndarray], gt: list[np.ndarray], grid: tuple[int, int]) -> dict[str, float]:
    """
    Accuracy (pred -> gt), completeness (gt -> pred) and normal consistency.

    Args:
        pred: Per-frame [N, 3] aligned predicted points
        gt: Per-frame [N, 3] ground-truth points
        grid: (rows, cols) of each frame's points
    """
    pred_all = np.concatenate(pred)
    gt_all = np.concatenate(gt)
    accuracy, matches = nearest_distances(pred_all, gt_all)
    completeness, _ = nearest_distances(gt_all, pred_all)

    rows, cols = grid
    pred_normals = np.concatenate([grid_normals(p.reshape(rows, cols, 3)) for p in pred])
    gt_normals = np.concatenate([grid_normals(g.reshape(rows, cols, 3)) for g in gt])
    nc = pd.Series(normal_consistency(pred_normals, gt_normals, matches)).dropna()

    return {
        "pointmap_mse": float(np.mean(np.sum((pred_all - gt_all) ** 2, axis=1))),
        "accuracy_mean": float(np.mean(accuracy)),
        "accuracy_median": float(np.median(accuracy)),
        "completeness_mean": float(np.mean(completeness)),
        "completeness_median": float(np.median(completeness)),
        "normal_consistency_mean": float(nc.mean()) if not nc.empty else float("nan"),
        "normal_consistency_median": float(nc.median()) if not nc.empty else float("nan"),
    }


# ---- Depth ----

def depth_scores(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """
    AbsRel and delta < 1.25 after per-sequence median scaling.

    Args:
        pred: Stacked predicted depths (> 0)
        gt: Stacked ground-truth depths (> 0), same shape
    """
    if pred.shape != gt.shape:
        raise ShapeError(f"depth_scores: pred {list(pred.shape)} vs gt {list(gt.shape)}")
    scaled = pred * (np.median(gt) / np.median(pred))
    ratio = np.maximum(scaled / gt, gt / scaled)
    return {
        "depth_abs_rel": float(np.mean(np.abs(scaled - gt) / gt)),
        "depth_delta_1": float(np.mean(ratio < DEPTH_DELTA_THRESHOLD)),
    }
