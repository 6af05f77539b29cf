"""
Numerics - dense tensors with reverse-mode gradients.

Provides the Tensor type, the GradTape recorder, the primitives the memory
stream and backbone are built from, a finite-difference gradient checker and
the SWMT binary container.

Quick start:
    from core.numerics import GradTape, Tensor, ops

    with GradTape() as tape:
        tape.watch(x)
        y = ops.sum(ops.silu(x))
    (gx,) = tape.gradient(y, [x])
"""

from core.numerics import ops
from core.numerics.gradcheck import check_gradient
from core.numerics.ops import depthwise_conv1d_causal, layer_norm, softmax_attention
from core.numerics.serialization import (
    decode_tensor,
    encode_tensor,
    load_named,
    save_named,
)
from core.numerics.tensor import (
    GradTape,
    Tensor,
    default_dtype,
    record,
    set_checked_mode,
)


__all__ = [
    "ops",
    "Tensor",
    "GradTape",
    "record",
    "default_dtype",
    "set_checked_mode",
    "layer_norm",
    "depthwise_conv1d_causal",
    "softmax_attention",
    "check_gradient",
    "encode_tensor",
    "decode_tensor",
    "save_named",
    "load_named",
]
