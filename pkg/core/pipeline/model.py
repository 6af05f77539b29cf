"""
Model assembly - all parameter groups of a run in one container.

Flattened names start with the group: "backbone.*", "memory.K.*",
"memory.V.*" and "injector.layer{i}.{K,V}.*".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.backbone import BackboneParams, init_backbone
from core.injector import InjectorParams, init_injector
from core.numerics import Tensor
from core.params import named_tensors, rebuild
from core.pipeline.constants import (
    RNG_STREAM_BACKBONE,
    RNG_STREAM_INJECTOR,
    RNG_STREAM_INJECTOR_OUTPUT,
    RNG_STREAM_MEMORY,
)
from core.schemas import RunConfig
from core.ssm import MambaBlockParams, init_mamba_block


@dataclass
class MemoryStreamParams:
    """Mamba blocks for the K and V streams; V is None when weights are shared."""
    K: MambaBlockParams
    V: Optional[MambaBlockParams] = None

    def block(self, stream: str) -> MambaBlockParams:
        return self.K if stream == "K" or self.V is None else self.V


@dataclass
class ModelParams:
    backbone: BackboneParams
    memory: MemoryStreamParams
    injector: InjectorParams

    def named(self) -> dict[str, Tensor]:
        return named_tensors(self)

    def replace_tensors(self, tensors: dict[str, Tensor]) -> ModelParams:
        return rebuild(self, tensors)


def group_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def init_model(config: RunConfig, seed: Optional[int] = None) -> ModelParams:
    """
    Initialise every parameter group from the run configuration.

    Args:
        config: Run configuration
        seed: Overrides config.seed

    Returns:
        ModelParams; the injector's output maps are zero unless config.zero_init is False
    """
    seed = config.seed if seed is None else seed
    backbone = init_backbone(
        group_rng(seed, RNG_STREAM_BACKBONE),
        token_dim=config.token_dim,
        num_blocks=config.num_blocks,
        num_heads=config.num_heads,
        mlp_ratio=config.mlp_ratio,
        patch_size=config.patch_size,
        channels=config.channels,
        ln_eps=config.ln_eps,
    )

    memory_rng = group_rng(seed, RNG_STREAM_MEMORY)

    def block() -> MambaBlockParams:
        return init_mamba_block(
            memory_rng,
            token_dim=config.token_dim,
            inner_dim=config.inner_dim,
            state_dim=config.state_dim,
            conv_width=config.conv_width,
            residual_source=config.residual_source,
            ln_eps=config.ln_eps,
        )

    memory = MemoryStreamParams(K=block(), V=None if config.share_stream_weights else block())

    injector = init_injector(
        group_rng(seed, RNG_STREAM_INJECTOR),
        token_dim=config.token_dim,
        layers=config.injected_layers,
        hidden_dim=config.hidden_dim,
        zero_init=config.zero_init,
        output_rng=group_rng(seed, RNG_STREAM_INJECTOR_OUTPUT),
    )
    return ModelParams(backbone=backbone, memory=memory, injector=injector)
