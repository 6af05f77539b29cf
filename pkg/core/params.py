"""
Parameter containers - flattening, rebuilding and hashing.

Parameter groups are plain dataclasses whose fields are Tensors, nested
parameter dataclasses, lists of those, or non-tensor settings. Tensors are
immutable, so an optimizer step builds a new container from a name -> Tensor
mapping via rebuild().
"""

from __future__ import annotations

import dataclasses
import hashlib
from typing import Any, Mapping

import numpy as np

from core.errors import ConfigError, ShapeError
from core.numerics import Tensor, ops


def named_tensors(params: Any, prefix: str = "") -> dict[str, Tensor]:
    """
    Flatten a parameter dataclass into dotted names.

    Example: MambaBlockParams under prefix "memory.K" yields
    "memory.K.ln_gamma", "memory.K.ssm.A_log", ...
    """
    out: dict[str, Tensor] = {}
    _collect(params, prefix, out)
    return out


def _collect(node: Any, name: str, out: dict[str, Tensor]) -> None:
    if isinstance(node, Tensor):
        out[name] = node
    elif dataclasses.is_dataclass(node):
        for field in dataclasses.fields(node):
            _collect(getattr(node, field.name), _join(name, field.name), out)
    elif isinstance(node, (list, tuple)):
        for i, item in enumerate(node):
            _collect(item, _join(name, str(i)), out)
    elif isinstance(node, dict):
        for key, item in node.items():
            _collect(item, _join(name, str(key)), out)


def rebuild(template: Any, tensors: Mapping[str, Tensor], prefix: str = "") -> Any:
    """
    Return a copy of template with every tensor replaced from tensors.

    Names missing from the mapping keep the template's tensor. Shapes must match.
    """
    return _rebuild(template, prefix, tensors)


def _rebuild(node: Any, name: str, tensors: Mapping[str, Tensor]) -> Any:
    if isinstance(node, Tensor):
        new = tensors.get(name, node)
        if new.shape != node.shape:
            raise ShapeError(f"Parameter '{name}': shape {list(new.shape)} != {list(node.shape)}")
        return new
    if dataclasses.is_dataclass(node):
        changes = {
            f.name: _rebuild(getattr(node, f.name), _join(name, f.name), tensors)
            for f in dataclasses.fields(node)
        }
        return dataclasses.replace(node, **changes)
    if isinstance(node, list):
        return [_rebuild(item, _join(name, str(i)), tensors) for i, item in enumerate(node)]
    if isinstance(node, tuple):
        return tuple(_rebuild(item, _join(name, str(i)), tensors) for i, item in enumerate(node))
    if isinstance(node, dict):
        return type(node)((k, _rebuild(v, _join(name, str(k)), tensors)) for k, v in node.items())
    return node


def _join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


# ---- Groups and hashes ----

PARAMETER_GROUPS = ("backbone", "memory", "injector")


def group_of(name: str) -> str:
    """Top-level parameter group of a dotted name."""
    group = name.split(".", 1)[0]
    if group not in PARAMETER_GROUPS:
        raise ConfigError(f"Parameter '{name}' is outside the known groups {PARAMETER_GROUPS}")
    return group


def hash_tensors(tensors: Mapping[str, Tensor]) -> str:
    """sha256 over names, shapes and float64 bytes (order-independent)."""
    digest = hashlib.sha256()
    for name in sorted(tensors):
        t = tensors[name]
        digest.update(name.encode())
        digest.update(repr(tuple(t.shape)).encode())
        digest.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return digest.hexdigest()


def hash_groups(tensors: Mapping[str, Tensor]) -> dict[str, str]:
    """Content hash per parameter group."""
    grouped: dict[str, dict[str, Tensor]] = {}
    for name, t in tensors.items():
        grouped.setdefault(group_of(name), {})[name] = t
    return {group: hash_tensors(members) for group, members in sorted(grouped.items())}


def retained_bytes(tensors: Mapping[str, Tensor] | list[Tensor]) -> int:
    values = tensors.values() if isinstance(tensors, Mapping) else tensors
    return sum(t.nbytes for t in values)


# ---- Initialisation helpers ----

def normal(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape))


def zeros(shape: tuple[int, ...]) -> Tensor:
    return Tensor.zeros(shape)


def full(shape: tuple[int, ...], value: float) -> Tensor:
    return Tensor(np.full(shape, value))


@dataclasses.dataclass
class Affine:
    """Row-wise affine map x @ weight + bias."""
    weight: Tensor
    bias: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


def init_affine(
    rng: np.random.Generator,
    in_dim: int,
    out_dim: int,
    std: float | None = None,
    bias: float = 0.0,
) -> Affine:
    """Normal(0, std) weights (std defaults to 1/sqrt(in_dim)), constant bias."""
    std = 1.0 / np.sqrt(in_dim) if std is None else std
    return Affine(weight=normal(rng, (in_dim, out_dim), std), bias=full((out_dim,), bias))
