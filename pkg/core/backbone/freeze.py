"""
Parameter-group freezing for the staged training schedule.

Stage 1 freezes the backbone and trains only the memory stream and the
injector; stage 2 trains everything. A content hash of each frozen group is
taken when the plan is made and re-checked after training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from core.errors import ConfigError, StateError
from core.numerics import Tensor
from core.params import PARAMETER_GROUPS, group_of, hash_groups


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FreezePlan:
    trainable: dict[str, bool]
    frozen_hashes: dict[str, str] = field(default_factory=dict)

    def is_trainable(self, name: str) -> bool:
        return self.trainable.get(group_of(name), False)

    @property
    def frozen_groups(self) -> list[str]:
        return [g for g, on in self.trainable.items() if not on]


def set_trainable(params: Mapping[str, Tensor], flags: Mapping[str, bool]) -> FreezePlan:
    """
    Args:
        params: Flattened model parameters (dotted names)
        flags: Group name -> trainable; unlisted groups stay trainable

    Returns:
        FreezePlan with hashes of every frozen group
    """
    unknown = sorted(set(flags) - set(PARAMETER_GROUPS))
    if unknown:
        raise ConfigError(f"Unknown parameter groups {unknown}; expected one of {PARAMETER_GROUPS}")
    trainable = {g: bool(flags.get(g, True)) for g in PARAMETER_GROUPS}
    hashes = hash_groups(params)
    frozen = {g: hashes[g] for g, on in trainable.items() if not on and g in hashes}
    logger.info("Trainable groups: %s; frozen: %s", [g for g, on in trainable.items() if on], sorted(frozen))
    return FreezePlan(trainable=trainable, frozen_hashes=frozen)


def verify_frozen(plan: FreezePlan, params: Mapping[str, Tensor]) -> None:
    """Raise StateError if any frozen group's content changed."""
    hashes = hash_groups(params)
    changed = [g for g, h in plan.frozen_hashes.items() if hashes.get(g) != h]
    if changed:
        raise StateError(f"Frozen parameter groups changed during training: {changed}")
