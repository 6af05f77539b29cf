"""
Checkpoint I/O.

A checkpoint directory holds:
    params.bin / params.json   named SWMT tensors + manifest
    config.json                RunConfig echo
    hashes.json                sha256 per parameter group
    buffer.*                   optional memory snapshot for resuming a stream

This module handles ONLY file I/O.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

from core import memory
from core.errors import FormatError
from core.memory import MemoryBuffer
from core.numerics import load_named, save_named
from core.params import group_of, hash_groups
from core.pipeline.constants import CONFIG_FILE, HASHES_FILE, PARAMS_STEM
from core.pipeline.model import ModelParams, init_model
from core.schemas import RunConfig


logger = logging.getLogger(__name__)

BUFFER_STEM = "buffer"


def save_checkpoint(
    directory: str | Path,
    model: ModelParams,
    config: RunConfig,
    buf: Optional[MemoryBuffer] = None,
) -> dict[str, str]:
    """
    Write a checkpoint directory.

    Returns:
        Group hashes that were recorded
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    named = model.named()
    save_named(directory / PARAMS_STEM, named, group_of=group_of)
    (directory / CONFIG_FILE).write_text(config.model_dump_json(indent=2))
    hashes = hash_groups(named)
    (directory / HASHES_FILE).write_text(json.dumps(hashes, indent=2, sort_keys=True))
    if buf is not None:
        memory.save_snapshot(buf, directory / BUFFER_STEM)
    logger.info("Saved checkpoint to %s (%d tensors)", directory, len(named))
    return hashes


def load_checkpoint(directory: str | Path) -> tuple[ModelParams, RunConfig, Optional[MemoryBuffer]]:
    """
    Read a checkpoint and verify its group hashes.

    Returns:
        (model, config, buffer snapshot or None)
    """
    directory = Path(directory)
    config = RunConfig.model_validate_json((directory / CONFIG_FILE).read_text())
    tensors, _ = load_named(directory / PARAMS_STEM)
    model = init_model(config).replace_tensors(tensors)

    expected = json.loads((directory / HASHES_FILE).read_text())
    actual = hash_groups(model.named())
    if actual != expected:
        raise FormatError(f"Checkpoint hashes in {directory} do not match its parameters")

    buf = None
    if (directory / f"{BUFFER_STEM}.meta.json").exists():
        buf = memory.load_snapshot(directory / BUFFER_STEM)
    return model, config, buf
