"""
SSM - selective state-space scan and the Mamba temporal encoding block.

Quick start:
    from core import ssm

    params = ssm.init_mamba_block(rng, token_dim=64)
    F_hat, h_next = ssm.mamba_block(read_out, params, params.initial_state())
"""

from core.ssm.block import mamba_block
from core.ssm.constants import CONV_WIDTH, DEFAULT_CHUNK, DELTA_INIT, EXPAND, STATE_DIM
from core.ssm.params import (
    MambaBlockParams,
    SSMParams,
    SSMState,
    init_mamba_block,
    init_ssm,
)
from core.ssm.scan import (
    ScanInputs,
    scan_inputs,
    selective_scan,
    selective_scan_chunked,
    selective_scan_sequential,
)


__all__ = [
    "mamba_block",
    "MambaBlockParams",
    "SSMParams",
    "SSMState",
    "ScanInputs",
    "init_mamba_block",
    "init_ssm",
    "scan_inputs",
    "selective_scan",
    "selective_scan_sequential",
    "selective_scan_chunked",
    "STATE_DIM",
    "EXPAND",
    "CONV_WIDTH",
    "DELTA_INIT",
    "DEFAULT_CHUNK",
]
