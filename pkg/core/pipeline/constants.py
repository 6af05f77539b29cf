"""
Constants for the streaming pipeline and the staged trainer.
"""

from __future__ import annotations

from typing import Final


# ---- Random streams ----
# Each parameter group draws from its own generator so that changing one
# group's init leaves the others byte-identical.
RNG_STREAM_BACKBONE: Final[int] = 0
RNG_STREAM_MEMORY: Final[int] = 1
RNG_STREAM_INJECTOR: Final[int] = 2
RNG_STREAM_INJECTOR_OUTPUT: Final[int] = 3

# ---- Optimizer ----
ADAM_BETA1: Final[float] = 0.9
ADAM_BETA2: Final[float] = 0.999
ADAM_EPS: Final[float] = 1e-8

# ---- Stages ----
STAGE_WARMUP: Final[int] = 1
STAGE_JOINT: Final[int] = 2
STAGE1_FLAGS: Final[dict[str, bool]] = {"backbone": False, "memory": True, "injector": True}
STAGE2_FLAGS: Final[dict[str, bool]] = {"backbone": True, "memory": True, "injector": True}

# ---- Checkpoint files ----
PARAMS_STEM: Final[str] = "params"
CONFIG_FILE: Final[str] = "config.json"
HASHES_FILE: Final[str] = "hashes.json"
METRICS_FILE: Final[str] = "metrics.jsonl"
