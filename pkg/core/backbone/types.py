"""
Types exchanged between the backbone, the streaming pipeline and the harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from core.errors import ShapeError
from core.numerics import Tensor


@dataclass(frozen=True)
class Frame:
    """One synthetic observation."""
    image: Tensor                                  # [H, W, C]
    intrinsics: tuple[float, float, float, float]  # fx, fy, cx, cy
    t: int

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


@dataclass(frozen=True)
class PatchTokens:
    tokens: Tensor          # [N, D]
    grid: tuple[int, int]   # (rows, cols)

    def __post_init__(self):
        rows, cols = self.grid
        if self.tokens.shape[0] != rows * cols:
            raise ShapeError(f"PatchTokens: {self.tokens.shape[0]} tokens for grid {rows}x{cols}")

    @property
    def num_tokens(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class Predictions:
    """
    Per-frame geometry.

    The pose is camera-to-world: a unit quaternion (w, x, y, z) and a
    translation in meters. Pointmap rows follow the patch grid, row-major.
    """
    quaternion: Tensor   # [4]
    translation: Tensor  # [3]
    depth: Tensor        # [rows, cols], > 0
    pointmap: Tensor     # [N, 3]

    @property
    def grid(self) -> tuple[int, int]:
        return self.depth.shape

    def pose_matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world transform."""
        w, x, y, z = self.quaternion.numpy()
        T = np.eye(4)
        T[:3, :3] = Rotation.from_quat([x, y, z, w]).as_matrix()
        T[:3, 3] = self.translation.numpy()
        return T
