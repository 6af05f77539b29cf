"""
Serialization - SWMT binary container and named parameter sets.

This module handles ONLY file I/O; nothing here knows what the tensors mean.

Record layout (little-endian):
    magic   b"SWMT"
    version u32
    rank    u32
    extents u64 x rank
    payload f64 x product(extents)

A named set is a .bin file of records back to back plus a .json manifest
(core.schemas.ParameterManifest) giving each record's name, group and offset.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from core.errors import FormatError
from core.numerics.tensor import Tensor, default_dtype
from core.schemas import ParameterEntry, ParameterManifest


MAGIC = b"SWMT"
VERSION = 1
_HEADER = struct.Struct("<4sII")


def encode_tensor(tensor: Tensor) -> bytes:
    """Serialize one tensor to an SWMT record."""
    extents = struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
    payload = np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()
    return _HEADER.pack(MAGIC, VERSION, tensor.ndim) + extents + payload


def decode_tensor(buffer: bytes, offset: int = 0, dtype=None) -> tuple[Tensor, int]:
    """
    Parse one SWMT record.

    Returns:
        (tensor, offset just past the record)
    """
    if len(buffer) - offset < _HEADER.size:
        raise FormatError("Truncated SWMT header")
    magic, version, rank = _HEADER.unpack_from(buffer, offset)
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"Unsupported SWMT version {version}")
    offset += _HEADER.size
    shape = struct.unpack_from(f"<{rank}Q", buffer, offset)
    offset += 8 * rank
    count = int(np.prod(shape)) if rank else 1
    end = offset + 8 * count
    if end > len(buffer):
        raise FormatError(f"Truncated SWMT payload for shape {list(shape)}")
    values = np.frombuffer(buffer, dtype="<f8", count=count, offset=offset).reshape(shape)
    return Tensor(values, dtype=dtype or default_dtype()), end


def save_named(
    stem: str | Path,
    tensors: Mapping[str, Tensor],
    group_of: Callable[[str], str] = lambda name: name.split(".", 1)[0],
) -> ParameterManifest:
    """
    Write a named tensor set as <stem>.bin + <stem>.json.

    Args:
        stem: Path without extension
        tensors: Ordered name -> tensor mapping
        group_of: Maps a parameter name to its group label

    Returns:
        The manifest that was written
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    manifest = ParameterManifest()
    chunks = []
    offset = 0
    for name, tensor in tensors.items():
        record = encode_tensor(tensor)
        manifest.parameters.append(ParameterEntry(
            name=name,
            group=group_of(name),
            shape=list(tensor.shape),
            offset=offset,
            nbytes=len(record),
        ))
        chunks.append(record)
        offset += len(record)
    stem.with_suffix(".bin").write_bytes(b"".join(chunks))
    stem.with_suffix(".json").write_text(manifest.model_dump_json(indent=2))
    return manifest


def load_named(stem: str | Path) -> tuple[dict[str, Tensor], ParameterManifest]:
    """Read a named tensor set written by save_named."""
    stem = Path(stem)
    manifest = ParameterManifest.model_validate_json(stem.with_suffix(".json").read_text())
    blob = stem.with_suffix(".bin").read_bytes()
    tensors: dict[str, Tensor] = {}
    for entry in manifest.parameters:
        tensor, end = decode_tensor(blob, entry.offset)
        if end - entry.offset != entry.nbytes or list(tensor.shape) != entry.shape:
            raise FormatError(f"Manifest entry '{entry.name}' does not match its record")
        tensors[entry.name] = tensor
    return tensors, manifest
