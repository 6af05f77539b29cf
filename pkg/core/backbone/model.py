"""
Toy reconstruction backbone - tokenizer, attention stack, heads.

Runtime flow for one window:
1. patchify() each frame into [N, D] tokens (+ 2-D sinusoidal positions)
2. aggregate() runs joint self-attention over all L*N window tokens; a hook
   may rewrite each block's (K, V) before attention
3. heads() turns one frame's [N, D] features into pose, depth and pointmap
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from core.backbone.constants import POSITION_BASE
from core.backbone.params import AttentionBlockParams, BackboneParams, HeadParams
from core.backbone.types import Frame, PatchTokens, Predictions
from core.errors import ShapeError
from core.numerics import Tensor, ops


logger = logging.getLogger(__name__)

# hook(layer_index, K, V) -> (K', V'); K' / V' may carry extra rows
KVHook = Callable[[int, Tensor, Tensor], tuple[Tensor, Tensor]]


# ---- Tokenizer ----

@lru_cache(maxsize=32)
def _axis_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length, dtype=float)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(POSITION_BASE, 2 * (i // 2) / max(dim, 1))
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def position_encoding(grid: tuple[int, int], dim: int) -> np.ndarray:
    """
    Fixed 2-D sinusoidal encoding, [rows*cols, dim].

    The first dim//2 channels encode the row, the rest the column.
    """
    rows, cols = grid
    half = dim // 2
    row_enc = _axis_encoding(rows, half)
    col_enc = _axis_encoding(cols, dim - half)
    enc = np.concatenate(
        [np.repeat(row_enc, cols, axis=0), np.tile(col_enc, (rows, 1))],
        axis=1,
    )
    return enc


def extract_patches(image: np.ndarray, patch_size: int) -> tuple[np.ndarray, tuple[int, int]]:
    """[H, W, C] -> ([rows*cols, P*P*C], (rows, cols)), row-major patches."""
    height, width, channels = image.shape
    if height % patch_size or width % patch_size:
        raise ShapeError(f"Image {height}x{width} not divisible by patch size {patch_size}")
    rows, cols = height // patch_size, width // patch_size
    patches = (
        image.reshape(rows, patch_size, cols, patch_size, channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(rows * cols, patch_size * patch_size * channels)
    )
    return patches, (rows, cols)


def patchify(frame: Frame, params: BackboneParams) -> PatchTokens:
    """Non-overlapping patches, linear embedding, plus position encoding."""
    if frame.image.ndim != 3:
        raise ShapeError(f"Frame image must be [H, W, C], got {list(frame.image.shape)}")
    patches, grid = extract_patches(frame.image.data, params.patch_size)
    if patches.shape[1] != params.embed.in_dim:
        raise ShapeError(f"Patch size {patches.shape[1]} does not match embedding input {params.embed.in_dim}")
    tokens = params.embed(Tensor(patches))
    if params.position_encoding:
        tokens = ops.add(tokens, Tensor(position_encoding(grid, params.token_dim)))
    return PatchTokens(tokens=tokens, grid=grid)


# ---- Attention stack ----

def _column_slices(dim: int, num_heads: int) -> list[tuple[slice, slice]]:
    width = dim // num_heads
    return [(slice(None), slice(h * width, (h + 1) * width)) for h in range(num_heads)]


def multi_head_attention(Q: Tensor, K: Tensor, V: Tensor, num_heads: int) -> Tensor:
    """Split columns into heads, attend per head, re-join columns."""
    if Q.shape[1] % num_heads:
        raise ShapeError(f"Token dim {Q.shape[1]} not divisible by {num_heads} heads")
    outs = [
        ops.softmax_attention(ops.index(Q, cols), ops.index(K, cols), ops.index(V, cols))
        for cols in _column_slices(Q.shape[1], num_heads)
    ]
    return ops.concat(outs, axis=1)


def attention_block(
    x: Tensor,
    block: AttentionBlockParams,
    num_heads: int,
    ln_eps: float,
    layer: int = 0,
    hook: Optional[KVHook] = None,
) -> Tensor:
    h = ops.layer_norm(x, block.ln1_gamma, block.ln1_beta, ln_eps)
    Q, K, V = block.query(h), block.key(h), block.value(h)
    if hook is not None:
        K, V = hook(layer, K, V)
    x = ops.add(x, block.out(multi_head_attention(Q, K, V, num_heads)))
    h = ops.layer_norm(x, block.ln2_gamma, block.ln2_beta, ln_eps)
    return ops.add(x, block.mlp_out(ops.gelu(block.mlp_in(h))))


def aggregate(
    window_tokens: Sequence[PatchTokens],
    params: BackboneParams,
    hook: Optional[KVHook] = None,
    upto: Optional[int] = None,
) -> list[Tensor]:
    """
    Joint attention over all tokens of a window.

    Args:
        window_tokens: One PatchTokens per frame (L >= 1)
        params: Backbone parameters
        hook: Optional (K, V) rewrite applied inside every block
        upto: Number of blocks to run (None = all)

    Returns:
        Per-frame [N, D] features, in frame order
    """
    if not window_tokens:
        raise ShapeError("aggregate: window has no frames")
    n = window_tokens[0].num_tokens
    x = ops.concat([t.tokens for t in window_tokens], axis=0)
    blocks = params.blocks if upto is None else params.blocks[:upto]
    logger.debug("aggregate: %d frames x %d tokens through %d blocks", len(window_tokens), n, len(blocks))
    for layer, block in enumerate(blocks):
        x = attention_block(x, block, params.num_heads, params.ln_eps, layer=layer, hook=hook)
    return [ops.index(x, slice(k * n, (k + 1) * n)) for k in range(len(window_tokens))]


# ---- Heads ----

def heads(features: Tensor, params: HeadParams, grid: tuple[int, int]) -> Predictions:
    """
    Args:
        features: [N, D] one frame's features
        params: Head parameters
        grid: (rows, cols) with rows*cols == N

    Returns:
        Predictions with a unit quaternion and strictly positive depth
    """
    rows, cols = grid
    if features.shape[0] != rows * cols:
        raise ShapeError(f"heads: {features.shape[0]} tokens for grid {rows}x{cols}")

    pointmap = params.pointmap(features)
    depth = ops.reshape(ops.softplus(params.depth(features)), (rows, cols))
    pose = ops.reshape(params.pose(ops.mean(features, axis=0, keepdims=True)), (7,))
    quat = ops.index(pose, slice(0, 4))
    quat = ops.div(quat, ops.sqrt(ops.sum(ops.square(quat))))
    return Predictions(
        quaternion=quat,
        translation=ops.index(pose, slice(4, 7)),
        depth=depth,
        pointmap=pointmap,
    )


def predict_window(
    frames: Sequence[Frame],
    params: BackboneParams,
    hook: Optional[KVHook] = None,
) -> list[Predictions]:
    """Bare windowed forward pass: patchify, aggregate, heads per frame."""
    tokens = [patchify(f, params) for f in frames]
    features = aggregate(tokens, params, hook=hook)
    return [heads(f, params.heads, t.grid) for f, t in zip(features, tokens)]
