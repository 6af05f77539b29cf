"""
Injector parameters - zero-conv side branches per injected attention layer.

Each branch is two 1x1 channel-mixing maps with a GELU between:

    branch(x) = GELU(x @ W1 + b1) @ W2 + b2

Only the output map (W2, b2) starts at zero. W1 keeps a small random init so
that the gradient with respect to W2 is nonzero from the first step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from core.errors import ConfigError
from core.numerics import Tensor
from core.params import normal, zeros


INIT_STD = 0.02


@dataclass
class BranchParams:
    W1: Tensor  # [D, D_mid]
    b1: Tensor  # [D_mid]
    W2: Tensor  # [D_mid, D]
    b2: Tensor  # [D]

    @property
    def token_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def is_zero_output(self) -> bool:
        return not (np.any(self.W2.data) or np.any(self.b2.data))


@dataclass
class LayerInjector:
    """K and V branches for one attention block."""
    K: BranchParams
    V: BranchParams


class InjectorParams(dict):
    """
    Mapping "layer{i}" -> LayerInjector.

    Flattened parameter names read "injector.layer{i}.K.W1" and so on.
    """

    @staticmethod
    def key(layer: int) -> str:
        return f"layer{layer}"

    @property
    def layers(self) -> list[int]:
        return sorted(int(name[len("layer"):]) for name in self)

    def for_layer(self, layer: int) -> Optional[LayerInjector]:
        return self.get(self.key(layer))


def init_branch(
    rng: np.random.Generator,
    token_dim: int,
    hidden_dim: int,
    zero_init: bool = True,
    output_rng: Optional[np.random.Generator] = None,
) -> BranchParams:
    """
    Args:
        rng: Source for W1 (b1 starts at zero)
        token_dim: D
        hidden_dim: D_mid
        zero_init: Zero the output map; otherwise draw it from output_rng
        output_rng: Generator for a random output map
    """
    W1 = normal(rng, (token_dim, hidden_dim), INIT_STD)
    if zero_init:
        W2, b2 = zeros((hidden_dim, token_dim)), zeros((token_dim,))
    else:
        if output_rng is None:
            raise ConfigError("A random output layer needs its own generator")
        W2 = normal(output_rng, (hidden_dim, token_dim), INIT_STD)
        b2 = normal(output_rng, (token_dim,), INIT_STD)
    return BranchParams(W1=W1, b1=zeros((hidden_dim,)), W2=W2, b2=b2)


def init_injector(
    rng: np.random.Generator,
    token_dim: int,
    layers: Iterable[int],
    hidden_dim: Optional[int] = None,
    zero_init: bool = True,
    output_rng: Optional[np.random.Generator] = None,
) -> InjectorParams:
    """
    Build one LayerInjector per injected layer.

    The random output maps of the no-zero-init variant come from output_rng,
    so W1 draws are identical with and without zero init.
    """
    hidden_dim = hidden_dim or token_dim
    params = InjectorParams()
    for layer in sorted(set(layers)):
        params[InjectorParams.key(layer)] = LayerInjector(
            K=init_branch(rng, token_dim, hidden_dim, zero_init, output_rng),
            V=init_branch(rng, token_dim, hidden_dim, zero_init, output_rng),
        )
    return params
