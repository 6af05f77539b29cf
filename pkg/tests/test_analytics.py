"""
Tests for core.analytics: first-frame anchoring, trajectory, pointmap and
depth scores.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from core.analytics import (
    PER_FRAME_COLUMNS,
    SUMMARY_KEYS,
    depth_scores,
    drift_report,
    grid_normals,
    pointmap_scores,
    pose_matrices,
    trajectory_errors,
)
from core.backbone import Predictions
from core.errors import ShapeError
from core.numerics import Tensor


def rigid(rotvec, translation):
    T = np.eye(4)
    T[:3, :3] = Rotation.from_rotvec(rotvec).as_matrix()
    T[:3, 3] = translation
    return T


def moved(pred: Predictions, G: np.ndarray) -> Predictions:
    """Apply a world transform to a prediction (pose and points)."""
    T = G @ pred.pose_matrix()
    x, y, z, w = Rotation.from_matrix(T[:3, :3]).as_quat()
    return Predictions(
        quaternion=Tensor([w, x, y, z]),
        translation=Tensor(T[:3, 3]),
        depth=pred.depth,
        pointmap=Tensor(pred.pointmap.data @ G[:3, :3].T + G[:3, 3]),
    )


class TestTrajectory:

    def test_identity_quaternion_with_translation(self):
        T = pose_matrices(np.array([[1.0, 0.0, 0.0, 0.0]]), np.array([[1.0, 2.0, 3.0]]))
        expected = np.eye(4)
        expected[:3, 3] = [1.0, 2.0, 3.0]
        np.testing.assert_allclose(T[0], expected, atol=1e-12)

    def test_quaternion_order_is_wxyz(self):
        half = np.sqrt(0.5)
        T = pose_matrices(np.array([[half, 0.0, 0.0, half]]), np.zeros((1, 3)))
        expected = np.eye(4)
        expected[:2, :2] = [[0.0, -1.0], [1.0, 0.0]]
        np.testing.assert_allclose(T[0], expected, atol=1e-12)

    def test_global_offset_is_removed(self):
        gt = np.stack([rigid([0, 0.1 * k, 0], [k, 0, 0]) for k in range(5)])
        G = rigid([0.3, -0.2, 0.5], [4, -1, 2])
        pred = np.einsum("ij,njk->nik", np.linalg.inv(G), gt)
        frame, _ = trajectory_errors(pred, gt)
        assert list(frame.columns) == PER_FRAME_COLUMNS
        assert frame["translation_error"].max() < 1e-9
        assert frame["rotation_error_deg"].max() < 1e-6

    def test_drift_grows_from_anchor(self):
        gt = np.stack([rigid([0, 0, 0], [k, 0, 0]) for k in range(4)])
        pred = np.stack([rigid([0, 0, 0], [1.1 * k, 0, 0]) for k in range(4)])
        frame, _ = trajectory_errors(pred, gt)
        np.testing.assert_allclose(frame["translation_error"], [0.0, 0.1, 0.2, 0.3], atol=1e-12)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            trajectory_errors(np.tile(np.eye(4), (2, 1, 1)), np.tile(np.eye(4), (3, 1, 1)))


class TestPointmaps:

    def test_plane_normals(self):
        u, v = np.meshgrid(np.arange(3.0), np.arange(3.0), indexing="ij")
        plane = np.stack([u, v, np.zeros_like(u)], axis=-1)
        normals = grid_normals(plane)
        np.testing.assert_allclose(np.abs(normals[:, 2]), 1.0)

    def test_thin_grid_has_no_normals(self):
        assert np.isnan(grid_normals(np.zeros((1, 3, 3)))).all()

    def test_identical_points_score_perfectly(self, rng):
        pts = [rng.normal(size=(4, 3)) for _ in range(3)]
        scores = pointmap_scores(pts, pts, (2, 2))
        assert scores["pointmap_mse"] == 0.0
        assert scores["accuracy_mean"] == 0.0
        assert scores["completeness_median"] == 0.0
        assert scores["normal_consistency_mean"] == pytest.approx(1.0)


class TestDepth:

    def test_scale_is_factored_out(self, rng):
        gt = rng.uniform(1.0, 3.0, size=(4, 2, 2))
        scores = depth_scores(2.5 * gt, gt)
        assert scores["depth_abs_rel"] == pytest.approx(0.0, abs=1e-12)
        assert scores["depth_delta_1"] == 1.0

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            depth_scores(np.ones((2, 2)), np.ones((3, 2)))


class TestDriftReport:

    def test_rigidly_moved_prediction_has_no_drift(self, scene):
        G = rigid([0.2, 0.4, -0.1], [1.0, -2.0, 0.5])
        pred = [moved(g, G) for g in scene.ground_truth]
        report = drift_report(pred, scene.ground_truth)
        assert report.endpoint_drift < 1e-9
        assert report.pointmap_mse < 1e-12
        assert set(report.summary()) == set(SUMMARY_KEYS)
        assert len(report.per_frame) == scene.n_frames

    def test_empty_sequence_raises(self):
        with pytest.raises(ShapeError):
            drift_report([], [])
