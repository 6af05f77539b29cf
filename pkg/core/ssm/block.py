"""
Mamba temporal encoding block.

    x_hat = LN(M_prev)
    a     = SiLU(DW(Linear(x_hat)))
    gate  = SiLU(Linear(x_hat))
    F_hat = Linear(SSM(a)) * gate + M_prev

The residual adds the pre-normalisation read-out; MambaBlockParams.residual_source
switches it to x_hat.
"""

from __future__ import annotations

from core.errors import ShapeError
from core.numerics import Tensor, ops
from core.schemas import ResidualSource, ScanMode
from core.ssm.constants import DEFAULT_CHUNK
from core.ssm.params import MambaBlockParams, SSMState
from core.ssm.scan import selective_scan


def mamba_block(
    M_prev: Tensor,
    params: MambaBlockParams,
    h0: SSMState,
    scan_mode: str = ScanMode.SEQUENTIAL.value,
    chunk: int = DEFAULT_CHUNK,
) -> tuple[Tensor, SSMState]:
    """
    Refine a read-out token sequence and advance the SSM state.

    Args:
        M_prev: [T_tok, D] read-out tokens (history entries, then current)
        params: Block parameters
        h0: State carried from the previous window
        scan_mode: "sequential" or "chunked"
        chunk: Chunk length for the chunked scan

    Returns:
        (F_hat [T_tok, D], updated state)
    """
    if M_prev.ndim != 2 or M_prev.shape[1] != params.token_dim:
        raise ShapeError(
            f"mamba_block: tokens {list(M_prev.shape)} do not match token dim {params.token_dim}"
        )

    x_hat = ops.layer_norm(M_prev, params.ln_gamma, params.ln_beta, params.ln_eps)
    a = ops.silu(ops.depthwise_conv1d_causal(params.in_conv(x_hat), params.conv_kernel, params.conv_bias))
    gate = ops.silu(params.in_gate(x_hat))
    y, h_next = selective_scan(a, params.ssm, h0, mode=scan_mode, chunk=chunk)

    residual = x_hat if params.residual_source == ResidualSource.NORMALIZED else M_prev
    return ops.add(ops.mul(params.out_proj(y), gate), residual), h_next
