"""
AdamW with a constant learning rate.

Weight decay is decoupled (applied to the parameter, not the gradient).
Parameters without a gradient entry are left untouched, which is how frozen
groups receive zero updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from core.numerics import Tensor
from core.pipeline.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS


@dataclass
class AdamW:
    lr: float
    weight_decay: float = 0.0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, Tensor]) -> dict[str, Tensor]:
        """
        Args:
            params: Current tensors by name
            grads: Gradients for the trainable subset

        Returns:
            New tensors for every name in grads
        """
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        updated: dict[str, Tensor] = {}
        for name, grad in grads.items():
            g = grad.data
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v

            p = params[name].data
            p = p * (1.0 - self.lr * self.weight_decay)
            p = p - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            updated[name] = Tensor.wrap(p)
        return updated
