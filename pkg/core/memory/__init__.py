"""
Memory - dual-stream FIFO buffers and carried SSM states.

Quick start:
    from core import memory

    buf = memory.create_buffer(capacity=4, inner_dim=128, state_dim=16)
    tokens = memory.read_out(buf, F_t, stream="K")
    ...
    memory.update(buf, F_hat_k, F_hat_v, raw=F_t)
    memory.propagate(buf, h_k, h_v)
"""

from core.memory.buffer import (
    BufferMeta,
    MemoryBuffer,
    Stream,
    blend_entry,
    capacity_bytes,
    create_buffer,
    load_snapshot,
    propagate,
    read_out,
    reset,
    retained_bytes,
    save_snapshot,
    update,
)


__all__ = [
    "MemoryBuffer",
    "BufferMeta",
    "Stream",
    "create_buffer",
    "read_out",
    "blend_entry",
    "update",
    "propagate",
    "reset",
    "retained_bytes",
    "capacity_bytes",
    "save_snapshot",
    "load_snapshot",
]
