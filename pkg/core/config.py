"""
Environment configuration.

Reads runtime settings from environment variables (optionally from a .env file).
Run-level hyperparameters live in RunConfig (core.schemas); this module only
covers process-wide switches.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from core.errors import ConfigError

load_dotenv()


_DTYPES = {"float64": np.float64, "float32": np.float32}


def get_out_dir() -> Path:
    """Default root for CLI artifacts (SWM_OUT_DIR)."""
    return Path(os.getenv("SWM_OUT_DIR", "out"))


def get_default_dtype() -> np.dtype:
    """
    Tensor precision (SWM_DTYPE).

    64-bit by default; gradient checks and scan tolerances assume it.
    """
    name = os.getenv("SWM_DTYPE", "float64").lower()
    if name not in _DTYPES:
        raise ConfigError(
            f"SWM_DTYPE must be one of {sorted(_DTYPES)}, got '{name}'"
        )
    return np.dtype(_DTYPES[name])


def is_checked_mode() -> bool:
    """Reject NaN/Inf at Tensor construction (SWM_CHECKED)."""
    return os.getenv("SWM_CHECKED", "true").lower() == "true"


def get_log_level() -> str:
    return os.getenv("SWM_LOG_LEVEL", "INFO").upper()
