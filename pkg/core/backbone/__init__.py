"""
Backbone - toy frame tokenizer, attention stack with KV hooks, and heads.

Quick start:
    from core import backbone

    params = backbone.init_backbone(rng, token_dim=64)
    preds = backbone.predict_window(frames, params)
"""

from core.backbone.constants import IDENTITY_POSE, PATCH_SIZE, POSE_DIM, TOKEN_DIM
from core.backbone.freeze import FreezePlan, set_trainable, verify_frozen
from core.backbone.model import (
    KVHook,
    aggregate,
    attention_block,
    extract_patches,
    heads,
    multi_head_attention,
    patchify,
    position_encoding,
    predict_window,
)
from core.backbone.params import (
    AttentionBlockParams,
    BackboneParams,
    HeadParams,
    init_backbone,
    init_block,
    init_heads,
)
from core.backbone.types import Frame, PatchTokens, Predictions


__all__ = [
    "Frame",
    "PatchTokens",
    "Predictions",
    "AttentionBlockParams",
    "BackboneParams",
    "HeadParams",
    "init_backbone",
    "init_block",
    "init_heads",
    "KVHook",
    "position_encoding",
    "extract_patches",
    "patchify",
    "multi_head_attention",
    "attention_block",
    "aggregate",
    "heads",
    "predict_window",
    "FreezePlan",
    "set_trainable",
    "verify_frozen",
    "PATCH_SIZE",
    "TOKEN_DIM",
    "POSE_DIM",
    "IDENTITY_POSE",
]
