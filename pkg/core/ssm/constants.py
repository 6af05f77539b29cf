"""
Memory-stream (Mamba block) defaults.
"""

from __future__ import annotations

from typing import Final


# ---- Shapes ----

STATE_DIM: Final[int] = 16     # N_state
EXPAND: Final[int] = 2         # D_inner = EXPAND * D
CONV_WIDTH: Final[int] = 4     # depthwise kernel width k (causal)


# ---- Initialisation ----

DELTA_INIT: Final[float] = 0.1        # softplus(delta bias) at init
DELTA_WEIGHT_STD: Final[float] = 0.01
LN_EPS: Final[float] = 1e-5


# ---- Scan ----

DEFAULT_CHUNK: Final[int] = 8
