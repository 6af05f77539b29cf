"""
Synthetic scenes - a textured box room seen from a moving camera.

The room's walls carry a lattice of feature points. Each pixel takes the
feature of the lattice point nearest to where its ray hits the wall, plus
seeded noise. Ground truth is read off the same ray casts at patch centres:
z-depth, world-frame hit point and the camera-to-world pose.

Camera convention: x right, y down, z forward; pixel (u, v) maps to the ray
((u - cx) / fx, (v - cy) / fy, 1) so the hit parameter is the z-depth.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from core.backbone import Frame, Predictions
from core.errors import ConfigError
from core.harness.constants import (
    CORRIDOR_MARGIN,
    CORRIDOR_STEP,
    CORRIDOR_SWAY,
    LATTICE_SPACING,
    LOOP_BOB,
    LOOP_RADIUS,
    MAX_STEP,
    MOTION_PROFILES,
    NOISE_STD,
    ORBIT_RADIUS,
    ORBIT_STEP,
    ROOM_HALF_EXTENT,
)
from core.numerics import Tensor


logger = logging.getLogger(__name__)

MotionProfile = Literal["orbit", "corridor", "loop"]


@dataclass(frozen=True)
class SyntheticScene:
    seed: int
    profile: str
    frames: list[Frame]
    ground_truth: list[Predictions]
    poses: np.ndarray         # [n, 4, 4] camera-to-world
    lattice: np.ndarray       # [M, 3] world points
    features: np.ndarray      # [M, C]
    half_extent: np.ndarray   # room half sizes

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :3, 3]

    def to_bytes(self) -> bytes:
        """Frames, poses and ground truth as one byte stream (determinism checks)."""
        chunks = [f.image.data.tobytes() for f in self.frames]
        chunks.append(self.poses.tobytes())
        for g in self.ground_truth:
            chunks.extend(t.data.tobytes() for t in (g.quaternion, g.translation, g.depth, g.pointmap))
        return b"".join(chunks)


# ---- Geometry helpers ----

def look_at(position: np.ndarray, target: np.ndarray, up: np.ndarray = np.array([0.0, 1.0, 0.0])) -> np.ndarray:
    """Rotation whose z column points from position to target, y column roughly -up."""
    z = target - position
    z = z / np.linalg.norm(z)
    x = np.cross(-up, z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


def box_lattice(half_extent: np.ndarray, spacing: float) -> np.ndarray:
    """Points on the six faces of an axis-aligned box, spaced on a regular grid."""
    axes = [np.arange(-h, h + 1e-9, spacing) for h in half_extent]
    faces = []
    for axis in range(3):
        a, b = [i for i in range(3) if i != axis]
        grid_a, grid_b = np.meshgrid(axes[a], axes[b], indexing="ij")
        for sign in (-1.0, 1.0):
            pts = np.zeros((grid_a.size, 3))
            pts[:, axis] = sign * half_extent[axis]
            pts[:, a] = grid_a.ravel()
            pts[:, b] = grid_b.ravel()
            faces.append(pts)
    return np.unique(np.round(np.concatenate(faces), 9), axis=0)


def cast_rays(origin: np.ndarray, directions: np.ndarray, half_extent: np.ndarray) -> np.ndarray:
    """Hit parameter of rays leaving a point inside the box (first wall hit)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(directions >= 0, half_extent, -half_extent)
        t = np.where(directions != 0, (bound - origin) / directions, np.inf)
    return t.min(axis=1)


def trajectory(profile: str, n_frames: int, half_extent: np.ndarray) -> np.ndarray:
    """Camera-to-world poses [n, 4, 4] for a motion profile."""
    if profile not in MOTION_PROFILES:
        raise ConfigError(f"Unknown motion profile '{profile}'; expected one of {MOTION_PROFILES}")
    k = np.arange(n_frames, dtype=float)
    poses = np.tile(np.eye(4), (n_frames, 1, 1))

    if profile == "orbit":
        theta = ORBIT_STEP * k
        positions = np.stack([ORBIT_RADIUS * np.cos(theta), np.zeros(n_frames), ORBIT_RADIUS * np.sin(theta)], axis=1)
        targets = np.zeros_like(positions)
    elif profile == "corridor":
        z = -0.5 * CORRIDOR_STEP * (n_frames - 1) + CORRIDOR_STEP * k
        positions = np.stack([CORRIDOR_SWAY * np.sin(0.1 * k), np.zeros(n_frames), z], axis=1)
        targets = positions + np.array([0.0, 0.0, 1.0])
    else:
        radius = min(LOOP_RADIUS, 0.9 * MAX_STEP * n_frames / (2 * np.pi))
        theta = 2 * np.pi * k / n_frames
        positions = np.stack([radius * np.cos(theta), LOOP_BOB * np.sin(2 * theta), radius * np.sin(theta)], axis=1)
        tangents = np.stack([-np.sin(theta), np.zeros(n_frames), np.cos(theta)], axis=1)
        targets = positions + tangents

    for i in range(n_frames):
        poses[i, :3, :3] = look_at(positions[i], targets[i])
        poses[i, :3, 3] = positions[i]
    return poses


def room_extent(profile: str, n_frames: int) -> np.ndarray:
    half = np.array(ROOM_HALF_EXTENT)
    if profile == "corridor":
        half[2] = max(half[2], 0.5 * CORRIDOR_STEP * n_frames + CORRIDOR_MARGIN)
    return half


def quaternion_wxyz(R: np.ndarray) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    q = np.array([w, x, y, z])
    return q if w >= 0 else -q


# ---- Rendering ----

def render_frame(
    pose: np.ndarray,
    intrinsics: tuple[float, float, float, float],
    image_size: int,
    patch_size: int,
    half_extent: np.ndarray,
    tree: cKDTree,
    features: np.ndarray,
    noise: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns:
        (image [H, W, C], patch depth [rows, cols], patch points [rows*cols, 3])
    """
    fx, fy, cx, cy = intrinsics
    R, origin = pose[:3, :3], pose[:3, 3]

    def rays(us: np.ndarray, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cam = np.stack([(us - cx) / fx, (vs - cy) / fy, np.ones_like(us)], axis=1)
        world = cam @ R.T
        t = cast_rays(origin, world, half_extent)
        return t, origin + t[:, None] * world

    pix = np.arange(image_size) + 0.5
    vs, us = np.meshgrid(pix, pix, indexing="ij")
    _, hits = rays(us.ravel(), vs.ravel())
    _, nearest = tree.query(hits)
    image = features[nearest].reshape(image_size, image_size, -1) + noise

    side = image_size // patch_size
    centres = (np.arange(side) + 0.5) * patch_size
    pv, pu = np.meshgrid(centres, centres, indexing="ij")
    depth, points = rays(pu.ravel(), pv.ravel())
    return image, depth.reshape(side, side), points


def gen_scene(
    seed: int,
    n_frames: int,
    profile: MotionProfile = "orbit",
    image_size: int = 28,
    patch_size: int = 14,
    channels: int = 3,
    noise_std: float = NOISE_STD,
    max_step: Optional[float] = MAX_STEP,
) -> SyntheticScene:
    """
    Build a deterministic scene.

    Args:
        seed: Seed for lattice features and pixel noise
        n_frames: Number of frames (>= 1)
        profile: orbit | corridor | loop
        image_size: Square frame side in pixels
        patch_size: Backbone patch side (ground truth is per patch)
        channels: Feature channels per pixel
        noise_std: Pixel noise standard deviation
        max_step: Bound on per-frame camera translation (None disables the check)

    Returns:
        SyntheticScene
    """
    if n_frames < 1:
        raise ConfigError(f"n_frames must be >= 1, got {n_frames}")
    if image_size % patch_size:
        raise ConfigError(f"image_size {image_size} not divisible by patch_size {patch_size}")

    rng = np.random.default_rng(seed)
    half = room_extent(profile, n_frames)
    lattice = box_lattice(half, LATTICE_SPACING)
    features = rng.uniform(-1.0, 1.0, size=(len(lattice), channels))
    tree = cKDTree(lattice)

    poses = trajectory(profile, n_frames, half)
    steps = np.linalg.norm(np.diff(poses[:, :3, 3], axis=0), axis=1)
    if max_step is not None and steps.size and steps.max() > max_step:
        raise ConfigError(f"Camera moves {steps.max():.3f} m in one frame (bound {max_step} m)")

    intrinsics = (float(image_size), float(image_size), image_size / 2.0, image_size / 2.0)
    frames, truth = [], []
    for t, pose in enumerate(poses):
        noise = rng.normal(0.0, noise_std, size=(image_size, image_size, channels))
        image, depth, points = render_frame(pose, intrinsics, image_size, patch_size, half, tree, features, noise)
        frames.append(Frame(image=Tensor(image), intrinsics=intrinsics, t=t))
        truth.append(Predictions(
            quaternion=Tensor(quaternion_wxyz(pose[:3, :3])),
            translation=Tensor(pose[:3, 3]),
            depth=Tensor(depth),
            pointmap=Tensor(points),
        ))

    logger.debug("Generated %s scene: %d frames, %d lattice points", profile, n_frames, len(lattice))
    return SyntheticScene(
        seed=seed,
        profile=profile,
        frames=frames,
        ground_truth=truth,
        poses=poses,
        lattice=lattice,
        features=features,
        half_extent=half,
    )
