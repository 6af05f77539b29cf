"""
Memory Buffer - dual-stream FIFO memory and carried SSM states.

Key concepts:
- K-stream / V-stream: the last T distilled features, oldest first
- Read-out: history entries + the current feature, concatenated along the
  token axis; when the buffer is full the farthest entry is left out
- Update: push the refined feature (optionally blended with the raw one by
  the update gain alpha); the oldest entry falls out past capacity T
- Carried states: one SSM hidden state per stream, replaced after each window

Capacity and state shapes are fixed at creation, so retained bytes never
depend on how many windows have been processed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel

from core.errors import ConfigError, ShapeError, StateError
from core.numerics import Tensor, load_named, ops, save_named
from core.ssm import SSMState


Stream = Literal["K", "V"]


@dataclass
class MemoryBuffer:
    """
    Fixed-capacity FIFO pair plus carried SSM states.

    Invariant: 0 <= len(k_stream) == len(v_stream) <= capacity.
    """
    capacity: int                  # T, temporal horizon
    ssm_state_k: SSMState
    ssm_state_v: SSMState
    alpha: float = 1.0             # update gain: alpha * refined + (1 - alpha) * raw
    k_stream: deque = field(default_factory=deque)
    v_stream: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError(f"Buffer capacity must be >= 1, got {self.capacity}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"Update gain alpha must be in [0, 1], got {self.alpha}")
        self.k_stream = deque(self.k_stream, maxlen=self.capacity)
        self.v_stream = deque(self.v_stream, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.k_stream)

    @property
    def is_full(self) -> bool:
        return len(self) == self.capacity

    def stream(self, which: Stream) -> deque:
        if which == "K":
            return self.k_stream
        if which == "V":
            return self.v_stream
        raise ConfigError(f"Unknown memory stream '{which}'")

    def state(self, which: Stream) -> SSMState:
        return self.ssm_state_k if which == "K" else self.ssm_state_v

    @property
    def entry_shape(self) -> Optional[tuple[int, ...]]:
        return self.k_stream[0].shape if self.k_stream else None


def create_buffer(capacity: int, inner_dim: int, state_dim: int, alpha: float = 1.0) -> MemoryBuffer:
    """Empty buffer with zero states of shape [inner_dim, state_dim]."""
    return MemoryBuffer(
        capacity=capacity,
        alpha=alpha,
        ssm_state_k=SSMState.zeros(inner_dim, state_dim),
        ssm_state_v=SSMState.zeros(inner_dim, state_dim),
    )


def read_out(buf: MemoryBuffer, F_t: Tensor, stream: Stream = "K") -> Tensor:
    """
    Concatenate kept history with the current feature.

    Args:
        buf: Memory buffer (not modified)
        F_t: [N, D] current feature
        stream: Which stream's history to use

    Returns:
        [T_tok, D] tokens: history entries oldest first, then F_t. A full buffer
        contributes only its T-1 newest entries.
    """
    entries = list(buf.stream(stream))
    if entries and entries[0].shape[1:] != F_t.shape[1:]:
        raise ShapeError(
            f"read_out: feature {list(F_t.shape)} does not match {stream}-stream entries {list(entries[0].shape)}"
        )
    if buf.is_full:
        entries = entries[1:]
    return ops.concat(entries + [F_t], axis=0)


def blend_entry(buf: MemoryBuffer, refined: Tensor, raw: Optional[Tensor]) -> Tensor:
    """alpha * refined + (1 - alpha) * raw, exact at alpha in {0, 1}."""
    if buf.alpha == 1.0:
        return refined
    if raw is None:
        raise ConfigError(f"Update gain alpha={buf.alpha} needs the raw feature")
    if raw.shape != refined.shape:
        raise ShapeError(f"update: raw {list(raw.shape)} vs refined {list(refined.shape)}")
    if buf.alpha == 0.0:
        return raw
    return ops.add(ops.scale(refined, buf.alpha), ops.scale(raw, 1.0 - buf.alpha))


def update(
    buf: MemoryBuffer,
    F_hat_t: Tensor,
    F_hat_v: Optional[Tensor] = None,
    raw: Optional[Tensor] = None,
) -> None:
    """
    Push the newest encoded feature; past capacity the oldest entry is evicted.

    Args:
        buf: Memory buffer (modified in place)
        F_hat_t: Refined K-stream feature (also used for V when F_hat_v is None)
        F_hat_v: Refined V-stream feature
        raw: Unrefined feature F_t, required when alpha < 1
    """
    F_hat_v = F_hat_t if F_hat_v is None else F_hat_v
    expected = buf.entry_shape
    for t in (F_hat_t, F_hat_v):
        if t.ndim != 2 or (expected is not None and t.shape != expected):
            raise ShapeError(f"update: entry {list(t.shape)} does not match buffer entries {expected}")
    buf.k_stream.append(blend_entry(buf, F_hat_t, raw))
    buf.v_stream.append(blend_entry(buf, F_hat_v, raw))


def propagate(buf: MemoryBuffer, new_k_state: SSMState, new_v_state: SSMState) -> None:
    """Replace the carried states; the next window's blocks start from them."""
    for old, new, name in ((buf.ssm_state_k, new_k_state, "K"), (buf.ssm_state_v, new_v_state, "V")):
        if new.shape != old.shape:
            raise StateError(f"propagate: {name} state {list(new.shape)} != {list(old.shape)}")
    buf.ssm_state_k = new_k_state
    buf.ssm_state_v = new_v_state


def reset(buf: MemoryBuffer) -> None:
    """Empty both streams and zero the states (sequence boundary)."""
    buf.k_stream.clear()
    buf.v_stream.clear()
    inner, state = buf.ssm_state_k.shape
    buf.ssm_state_k = SSMState.zeros(inner, state)
    buf.ssm_state_v = SSMState.zeros(inner, state)


def retained_bytes(buf: MemoryBuffer) -> int:
    """Bytes held by buffer entries and carried states."""
    entries = sum(t.nbytes for t in buf.k_stream) + sum(t.nbytes for t in buf.v_stream)
    return entries + buf.ssm_state_k.nbytes + buf.ssm_state_v.nbytes


def capacity_bytes(buf: MemoryBuffer, entry_shape: tuple[int, ...]) -> int:
    """Retained bytes of a full buffer with entries of entry_shape."""
    itemsize = buf.ssm_state_k.h.dtype.itemsize
    per_entry = int(itemsize * Tensor.zeros(entry_shape).size)
    return 2 * buf.capacity * per_entry + buf.ssm_state_k.nbytes + buf.ssm_state_v.nbytes


# ---- Snapshots ----

class BufferMeta(BaseModel):
    """Sidecar describing a buffer snapshot."""
    capacity: int
    alpha: float
    length: int


def save_snapshot(buf: MemoryBuffer, stem: str | Path) -> None:
    """Dump entries and states for checkpoint / resume."""
    stem = Path(stem)
    tensors = {f"K.{i}": t for i, t in enumerate(buf.k_stream)}
    tensors.update({f"V.{i}": t for i, t in enumerate(buf.v_stream)})
    tensors["state.K"] = buf.ssm_state_k.h
    tensors["state.V"] = buf.ssm_state_v.h
    save_named(stem, tensors, group_of=lambda name: name.split(".", 1)[0])
    meta = BufferMeta(capacity=buf.capacity, alpha=buf.alpha, length=len(buf))
    stem.with_suffix(".meta.json").write_text(meta.model_dump_json(indent=2))


def load_snapshot(stem: str | Path) -> MemoryBuffer:
    stem = Path(stem)
    meta = BufferMeta.model_validate_json(stem.with_suffix(".meta.json").read_text())
    tensors, _ = load_named(stem)
    return MemoryBuffer(
        capacity=meta.capacity,
        alpha=meta.alpha,
        ssm_state_k=SSMState(h=tensors["state.K"]),
        ssm_state_v=SSMState(h=tensors["state.V"]),
        k_stream=deque(tensors[f"K.{i}"] for i in range(meta.length)),
        v_stream=deque(tensors[f"V.{i}"] for i in range(meta.length)),
    )
