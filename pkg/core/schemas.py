"""
Pydantic models for run configuration and on-disk artifacts.

These models define the flat key-value config file, the parameter manifest
that accompanies binary containers, and the records emitted by the CLI
(metrics JSON lines, bench CSV rows, ablation tables).
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.errors import ConfigError


SCHEMA_VERSION = 1


class ResidualSource(str, Enum):
    """Which tensor the Mamba block residual adds back."""
    INPUT = "input"            # pre-LayerNorm read-out, as written
    NORMALIZED = "normalized"  # LayerNorm output


class EntryGranularity(str, Enum):
    """What one buffer entry summarises."""
    WINDOW = "window"  # mean over the window's frames
    FRAME = "frame"    # one entry per frame


class InjectionMode(str, Enum):
    """How refined memory tokens meet the backbone keys/values."""
    TRAILING = "trailing"  # add to the current window's tokens
    APPEND = "append"      # also append history tokens as extra KV rows


class ScanMode(str, Enum):
    SEQUENTIAL = "sequential"
    CHUNKED = "chunked"


# ---- Run configuration ----

class RunConfig(BaseModel):
    """
    Everything that determines a training / evaluation run.

    Field names are the keys of the flat config file.
    """
    model_config = ConfigDict(extra="forbid", use_enum_values=True)

    seed: int = 0

    # Streaming geometry
    horizon: int = Field(4, ge=1, description="Memory horizon T (buffer capacity)")
    window_length: int = Field(4, ge=1, description="Frames per window L")
    stride: int = Field(4, ge=1, description="Window start spacing")
    alpha: float = Field(1.0, ge=0.0, le=1.0, description="Update gain between refined and raw features")
    memory_enabled: bool = True
    entry_granularity: EntryGranularity = EntryGranularity.WINDOW
    feature_layer: Optional[int] = Field(
        None, ge=0, description="Block whose output feeds the buffers (None = final block)"
    )

    # Backbone
    token_dim: int = Field(64, ge=1, description="Token dimension D")
    num_blocks: int = Field(4, ge=1)
    num_heads: int = Field(4, ge=1)
    mlp_ratio: int = Field(4, ge=1)
    patch_size: int = Field(14, ge=1)
    image_size: int = Field(28, ge=1)
    channels: int = Field(3, ge=1)
    ln_eps: float = Field(1e-5, gt=0.0)

    # Memory stream (Mamba blocks)
    state_dim: int = Field(16, ge=1, description="SSM state size N_state")
    expand: int = Field(2, ge=1, description="D_inner = expand * D")
    conv_width: int = Field(4, ge=1)
    residual_source: ResidualSource = ResidualSource.INPUT
    share_stream_weights: bool = False
    scan_mode: ScanMode = ScanMode.SEQUENTIAL
    scan_chunk: int = Field(8, ge=1)

    # Injector
    injection_layers: Optional[list[int]] = Field(
        None, description="Attention blocks receiving memory (None = every other block)"
    )
    injector_hidden: Optional[int] = Field(None, ge=1, description="D_mid (None = D)")
    injection_mode: InjectionMode = InjectionMode.TRAILING
    zero_init: bool = True

    # Training schedule
    stage1_steps: int = Field(200, ge=0)
    stage1_windows: int = Field(4, ge=1)
    stage2_steps: int = Field(0, ge=0)
    stage2_ladder: list[int] = Field(default_factory=lambda: [8, 16, 32])
    stage2_window_lengths: list[int] = Field(default_factory=list)
    lr_stage1: float = Field(1e-3, ge=0.0)
    lr_stage2: float = Field(1e-4, ge=0.0)
    weight_decay: float = Field(1e-2, ge=0.0)

    @field_validator("injection_layers", "stage2_ladder", "stage2_window_lengths", mode="before")
    @classmethod
    def _split_list(cls, value):
        """Accept comma-separated strings from the flat config file."""
        if isinstance(value, str):
            text = value.strip()
            if text.lower() in ("", "none"):
                return None if text.lower() == "none" else []
            return [int(part) for part in text.split(",") if part.strip()]
        return value

    @field_validator("feature_layer", "injector_hidden", mode="before")
    @classmethod
    def _none_string(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        if self.stride > self.window_length:
            raise ValueError(
                f"stride ({self.stride}) > window_length ({self.window_length}) leaves frames uncovered"
            )
        if self.image_size % self.patch_size:
            raise ValueError(f"image_size {self.image_size} not divisible by patch_size {self.patch_size}")
        if self.token_dim % self.num_heads:
            raise ValueError(f"token_dim {self.token_dim} not divisible by num_heads {self.num_heads}")
        if self.injection_layers is not None:
            bad = [i for i in self.injection_layers if not 0 <= i < self.num_blocks]
            if bad:
                raise ValueError(f"injection_layers {bad} outside [0, {self.num_blocks})")
        if self.feature_layer is not None and self.feature_layer > self.num_blocks:
            raise ValueError(f"feature_layer {self.feature_layer} > num_blocks {self.num_blocks}")
        if self.stage2_window_lengths and len(self.stage2_window_lengths) != len(self.stage2_ladder):
            raise ValueError("stage2_window_lengths must have one entry per stage2_ladder rung")
        if any(n < 1 for n in self.stage2_ladder + self.stage2_window_lengths):
            raise ValueError("stage-2 ladder entries must be positive")
        return self

    @property
    def inner_dim(self) -> int:
        return self.expand * self.token_dim

    @property
    def hidden_dim(self) -> int:
        return self.injector_hidden or self.token_dim

    @property
    def grid(self) -> tuple[int, int]:
        side = self.image_size // self.patch_size
        return side, side

    @property
    def num_patches(self) -> int:
        rows, cols = self.grid
        return rows * cols

    @property
    def injected_layers(self) -> list[int]:
        if self.injection_layers is None:
            return list(range(0, self.num_blocks, 2))
        return sorted(set(self.injection_layers))

    def with_updates(self, **changes) -> RunConfig:
        """Validated copy with some fields replaced."""
        return build_run_config({**self.model_dump(), **changes})


def build_run_config(values: dict) -> RunConfig:
    """Validate a mapping into a RunConfig, raising ConfigError on failure."""
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"Invalid run configuration: {exc}") from exc


def load_run_config(path: str | Path, **overrides) -> RunConfig:
    """
    Read a flat key=value config file.

    Args:
        path: Config file (one key=value per line, '#' comments)
        overrides: Values that take precedence over the file (e.g. seed from the CLI)

    Returns:
        Validated RunConfig
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    raw = {k: v for k, v in dotenv_values(path).items() if v is not None}
    unknown = sorted(set(raw) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown config keys in {path}: {', '.join(unknown)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return build_run_config(raw)


def dump_run_config(config: RunConfig) -> str:
    """Render a RunConfig back into the flat key=value format."""
    lines = []
    for key, value in config.model_dump().items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


# ---- Parameter manifests ----

class ParameterEntry(BaseModel):
    """One named tensor inside a binary container file."""
    name: str
    group: str
    shape: list[int]
    offset: int = Field(..., ge=0, description="Byte offset of the SWMT record")
    nbytes: int = Field(..., ge=0, description="Record length in bytes")


class ParameterManifest(BaseModel):
    """JSON sidecar naming each tensor of a parameter set."""
    schema_version: int = SCHEMA_VERSION
    parameters: list[ParameterEntry] = Field(default_factory=list)


# ---- Emitted records ----

class MetricRecord(BaseModel):
    """One line of the training metrics log."""
    schema_version: int = SCHEMA_VERSION
    stage: int
    step: int
    loss_total: float
    loss_depth: float
    loss_pointmap: float
    loss_camera: float


BenchMethod = Literal["memory", "windowed-baseline", "full-global-attention"]


class BenchRecord(BaseModel):
    """One timing measurement of the scaling benchmark."""
    method: BenchMethod
    frames: int = Field(..., ge=1)
    seconds: float = Field(..., gt=0.0)
    peak_bytes: int = Field(..., gt=0)


AblationArm = Literal["full", "no-mamba-update", "no-memory", "no-zero-init"]


class AblationRow(BaseModel):
    """Per-arm, per-seed ablation outcome."""
    arm: AblationArm
    seed: int
    endpoint_drift: float
    pointmap_mse: float
    accuracy_mean: float
    accuracy_median: float
    completeness_mean: float
    completeness_median: float
    normal_consistency_mean: float
    normal_consistency_median: float
    step0_identity_deviation: float
