"""
Backbone parameters: patch embedding, attention blocks, prediction heads.

Weights are randomly initialised and then frozen during the warm-up stage,
standing in for pretrained weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.numerics import Tensor
from core.params import Affine, full, init_affine, zeros
from core.backbone.constants import (
    IDENTITY_POSE,
    INIT_STD,
    MLP_RATIO,
    NUM_BLOCKS,
    NUM_HEADS,
    PATCH_SIZE,
    POSE_DIM,
    TOKEN_DIM,
)
from core.ssm.constants import LN_EPS


@dataclass
class AttentionBlockParams:
    """Pre-norm block: x + O(attn(LN1 x)), then x + MLP(LN2 x)."""
    ln1_gamma: Tensor
    ln1_beta: Tensor
    query: Affine
    key: Affine
    value: Affine
    out: Affine
    ln2_gamma: Tensor
    ln2_beta: Tensor
    mlp_in: Affine
    mlp_out: Affine


@dataclass
class HeadParams:
    pointmap: Affine  # D -> 3
    depth: Affine     # D -> 1
    pose: Affine      # D -> 7


@dataclass
class BackboneParams:
    embed: Affine                              # P*P*C -> D
    blocks: list[AttentionBlockParams]
    heads: HeadParams
    num_heads: int = NUM_HEADS
    patch_size: int = PATCH_SIZE
    ln_eps: float = LN_EPS
    position_encoding: bool = True

    @property
    def token_dim(self) -> int:
        return self.embed.out_dim

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)


def init_block(rng: np.random.Generator, token_dim: int, mlp_ratio: int) -> AttentionBlockParams:
    hidden = mlp_ratio * token_dim
    return AttentionBlockParams(
        ln1_gamma=full((token_dim,), 1.0),
        ln1_beta=zeros((token_dim,)),
        query=init_affine(rng, token_dim, token_dim),
        key=init_affine(rng, token_dim, token_dim),
        value=init_affine(rng, token_dim, token_dim),
        out=init_affine(rng, token_dim, token_dim),
        ln2_gamma=full((token_dim,), 1.0),
        ln2_beta=zeros((token_dim,)),
        mlp_in=init_affine(rng, token_dim, hidden),
        mlp_out=init_affine(rng, hidden, token_dim),
    )


def init_heads(rng: np.random.Generator, token_dim: int) -> HeadParams:
    """Small random head weights; the pose bias starts at the identity pose."""
    pose = init_affine(rng, token_dim, POSE_DIM, std=INIT_STD)
    pose = Affine(weight=pose.weight, bias=Tensor(np.array(IDENTITY_POSE)))
    return HeadParams(
        pointmap=init_affine(rng, token_dim, 3, std=INIT_STD),
        depth=init_affine(rng, token_dim, 1, std=INIT_STD, bias=1.0),
        pose=pose,
    )


def init_backbone(
    rng: np.random.Generator,
    token_dim: int = TOKEN_DIM,
    num_blocks: int = NUM_BLOCKS,
    num_heads: int = NUM_HEADS,
    mlp_ratio: int = MLP_RATIO,
    patch_size: int = PATCH_SIZE,
    channels: int = 3,
    ln_eps: float = LN_EPS,
) -> BackboneParams:
    """
    Args:
        rng: Generator for every backbone weight (drawn in a fixed order)
        token_dim: D, divisible by num_heads
        num_blocks: Attention blocks
        num_heads: Heads per block
        mlp_ratio: MLP hidden width as a multiple of D
        patch_size: Square patch side in pixels
        channels: Image channels C

    Returns:
        BackboneParams
    """
    return BackboneParams(
        embed=init_affine(rng, patch_size * patch_size * channels, token_dim),
        blocks=[init_block(rng, token_dim, mlp_ratio) for _ in range(num_blocks)],
        heads=init_heads(rng, token_dim),
        num_heads=num_heads,
        patch_size=patch_size,
        ln_eps=ln_eps,
    )
