"""
Constants for the toy reconstruction backbone.
"""

from __future__ import annotations

from typing import Final


# ---- Tokenizer ----
PATCH_SIZE: Final[int] = 14
POSITION_BASE: Final[float] = 10000.0

# ---- Transformer ----
TOKEN_DIM: Final[int] = 64
NUM_BLOCKS: Final[int] = 4
NUM_HEADS: Final[int] = 4
MLP_RATIO: Final[int] = 4
INIT_STD: Final[float] = 0.02

# ---- Heads ----
POSE_DIM: Final[int] = 7                      # quaternion (w, x, y, z) + translation
IDENTITY_POSE: Final[tuple[float, ...]] = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
