"""
Tensor and GradTape - the numeric substrate.

A Tensor is an immutable dense real array (numpy-backed, row-major). Primitive
operations in core.numerics.ops produce new Tensors and, while a GradTape is
active and one of their inputs is watched, append a record holding a
vector-Jacobian product. Replaying the records backward gives reverse-mode
gradients.

Quick start:
    with GradTape() as tape:
        tape.watch(w)
        loss = ops.sum(ops.square(ops.matmul(x, w)))
    (grad_w,) = tape.gradient(loss, [w])
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from core.config import get_default_dtype, is_checked_mode
from core.errors import NumericalError, ShapeError


_DEFAULT_DTYPE = get_default_dtype()
_CHECKED = is_checked_mode()

Grads = tuple[Optional[np.ndarray], ...]
VJP = Callable[[Grads], Grads]


def set_checked_mode(enabled: bool) -> None:
    """Toggle NaN/Inf rejection at construction (process-wide)."""
    global _CHECKED
    _CHECKED = enabled


def default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


class Tensor:
    """
    Immutable dense real array.

    Invariants:
    - product(shape) == number of stored values
    - values finite when checked mode is on
    """

    __slots__ = ("data", "__weakref__")

    def __init__(self, data, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.array(data, dtype=dtype or _DEFAULT_DTYPE, copy=True)
        self.data = _seal(arr)

    @classmethod
    def wrap(cls, arr: np.ndarray) -> Tensor:
        """Adopt an array produced by a primitive (no copy)."""
        t = cls.__new__(cls)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(_DEFAULT_DTYPE)
        t.data = _seal(arr)
        return t

    @classmethod
    def zeros(cls, shape: Sequence[int], dtype=None) -> Tensor:
        return cls.wrap(np.zeros(tuple(shape), dtype=dtype or _DEFAULT_DTYPE))

    @classmethod
    def ones(cls, shape: Sequence[int], dtype=None) -> Tensor:
        return cls.wrap(np.ones(tuple(shape), dtype=dtype or _DEFAULT_DTYPE))

    # ---- Introspection ----

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def nbytes(self) -> int:
        return int(self.data.nbytes)

    def numpy(self) -> np.ndarray:
        """Writable copy of the values."""
        return np.array(self.data, copy=True)

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single value, shape is {self.shape}")
        return float(self.data.reshape(()))

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype.name})"

    # ---- Operator sugar (delegates to registered primitives) ----

    def __add__(self, other):
        from core.numerics import ops
        return ops.add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        from core.numerics import ops
        return ops.add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        from core.numerics import ops
        return ops.sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        from core.numerics import ops
        return ops.sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        from core.numerics import ops
        return ops.mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        from core.numerics import ops
        return ops.mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        from core.numerics import ops
        return ops.div(self, _as_tensor(other, self.dtype))

    def __neg__(self):
        from core.numerics import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from core.numerics import ops
        return ops.matmul(self, other)

    def __getitem__(self, key):
        from core.numerics import ops
        return ops.index(self, key)


def _seal(arr: np.ndarray) -> np.ndarray:
    if _CHECKED and not np.isfinite(arr).all():
        raise NumericalError(f"Non-finite value in tensor of shape {list(arr.shape)}")
    arr.setflags(write=False)
    return arr


def _as_tensor(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


# ---- Gradient tape ----

@dataclass
class _Record:
    outputs: tuple[Tensor, ...]
    inputs: tuple[Tensor, ...]
    vjp: VJP


_local = threading.local()


def _tape_stack() -> list[GradTape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def record(outputs: Sequence[Tensor], inputs: Sequence[Tensor], vjp: VJP) -> None:
    """
    Register a primitive application with every active tape.

    vjp maps output cotangents (None where an output received no gradient)
    to input cotangents (None where an input gets no gradient).
    """
    for tape in _tape_stack():
        tape._record(tuple(outputs), tuple(inputs), vjp)


class GradTape:
    """
    Ordered record of primitive applications.

    Single-owner and single-threaded: a tape only sees operations issued by the
    thread that entered it.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._tracked: dict[int, Tensor] = {}

    def __enter__(self) -> GradTape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        else:
            stack.remove(self)

    def __len__(self) -> int:
        return len(self._records)

    def watch(self, *tensors: Tensor | Iterable[Tensor]) -> None:
        """Mark inputs whose gradients will be requested."""
        for t in tensors:
            if isinstance(t, Tensor):
                self._tracked[id(t)] = t
            else:
                for inner in t:
                    self._tracked[id(inner)] = inner

    def _record(self, outputs, inputs, vjp) -> None:
        if not any(id(x) in self._tracked for x in inputs):
            return
        self._records.append(_Record(outputs, inputs, vjp))
        for out in outputs:
            self._tracked[id(out)] = out

    def gradient(
        self,
        target: Tensor,
        sources: Sequence[Tensor],
        output_grad: Optional[np.ndarray] = None,
    ) -> list[Tensor]:
        """
        Vector-Jacobian product of target with respect to each source.

        Args:
            target: Output tensor (scalar unless output_grad is given)
            sources: Tensors to differentiate against
            output_grad: Cotangent for target (defaults to 1 for scalars)

        Returns:
            One gradient per source, same shape as the source (zeros if the
            source does not influence target)
        """
        if output_grad is None:
            if target.size != 1:
                raise ShapeError(
                    f"gradient() needs a scalar target or output_grad, got shape {list(target.shape)}"
                )
            output_grad = np.ones(target.shape, dtype=target.dtype)

        grads: dict[int, np.ndarray] = {id(target): np.asarray(output_grad, dtype=target.dtype)}
        for rec in reversed(self._records):
            gouts = tuple(grads.get(id(o)) for o in rec.outputs)
            if all(g is None for g in gouts):
                continue
            gins = rec.vjp(gouts)
            for x, g in zip(rec.inputs, gins):
                if g is None:
                    continue
                if g.shape != x.shape:
                    raise ShapeError(
                        f"Cotangent shape {list(g.shape)} does not match input {list(x.shape)}"
                    )
                key = id(x)
                grads[key] = grads[key] + g if key in grads else g

        return [
            Tensor.wrap(np.array(grads[id(s)], dtype=s.dtype)) if id(s) in grads
            else Tensor.zeros(s.shape, dtype=s.dtype)
            for s in sources
        ]
