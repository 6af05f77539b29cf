"""
Zero-conv branches and memory-augmented attention.

    K' = K + branch_K(K_hat)
    V' = V + branch_V(V_hat)
    out = softmax(Q K'^T / sqrt(d_k)) V'

With a zero output map the branch returns exact zeros, so K' and V' are
bitwise equal to K and V.
"""

from __future__ import annotations

from typing import Optional

from core.errors import AlignmentError, ShapeError
from core.injector.params import BranchParams, LayerInjector
from core.numerics import Tensor, ops


def zero_conv_branch(x: Tensor, branch: BranchParams) -> Tensor:
    """Position-wise GELU(x @ W1 + b1) @ W2 + b2 on [S, D] tokens."""
    if x.ndim != 2 or x.shape[1] != branch.token_dim:
        raise ShapeError(f"zero_conv_branch: tokens {list(x.shape)} vs branch dim {branch.token_dim}")
    hidden = ops.gelu(ops.linear(x, branch.W1, branch.b1))
    return ops.linear(hidden, branch.W2, branch.b2)


def inject_kv(
    K: Tensor,
    V: Tensor,
    K_hat: Tensor,
    V_hat: Tensor,
    layer: LayerInjector,
) -> tuple[Tensor, Tensor]:
    """
    Add branch outputs of the memory tokens to a layer's keys and values.

    Args:
        K, V: [S, d] backbone keys / values
        K_hat, V_hat: [S, d] refined memory tokens aligned to the same grid
        layer: Branch parameters for this layer

    Returns:
        (K', V')
    """
    for name, base, mem in (("K", K, K_hat), ("V", V, V_hat)):
        if base.shape[0] != mem.shape[0]:
            raise AlignmentError(
                f"inject_kv: {base.shape[0]} backbone {name} tokens vs {mem.shape[0]} memory tokens"
            )
        if base.shape != mem.shape:
            raise ShapeError(f"inject_kv: {name} {list(base.shape)} vs memory {list(mem.shape)}")
    return (
        ops.add(K, zero_conv_branch(K_hat, layer.K)),
        ops.add(V, zero_conv_branch(V_hat, layer.V)),
    )


def append_memory_rows(
    K: Tensor,
    V: Tensor,
    K_hist: Optional[Tensor],
    V_hist: Optional[Tensor],
    layer: LayerInjector,
) -> tuple[Tensor, Tensor]:
    """Extend the key/value rows with branch outputs of history tokens."""
    if K_hist is None or V_hist is None or K_hist.shape[0] == 0:
        return K, V
    return (
        ops.concat([K, zero_conv_branch(K_hist, layer.K)], axis=0),
        ops.concat([V, zero_conv_branch(V_hist, layer.V)], axis=0),
    )


def attend_with_memory(Q: Tensor, K_prime: Tensor, V_prime: Tensor) -> Tensor:
    return ops.softmax_attention(Q, K_prime, V_prime)
