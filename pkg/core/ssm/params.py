"""
SSM and Mamba block parameters.

Key quantities:
- A = -exp(A_log): diagonal state matrix per channel, strictly negative
- delta = softplus(delta_proj(u)): per-position step sizes, strictly positive
- B, C: input-dependent state projections
- D_skip: direct feedthrough
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.errors import StateError
from core.numerics import Tensor
from core.params import Affine, full, init_affine, normal, zeros
from core.schemas import ResidualSource
from core.ssm.constants import CONV_WIDTH, DELTA_INIT, DELTA_WEIGHT_STD, EXPAND, LN_EPS, STATE_DIM


@dataclass
class SSMParams:
    """Selective state-space parameters for D_inner channels and N_state states."""
    A_log: Tensor      # [D_inner, N_state]
    B_proj: Affine     # D_inner -> N_state
    C_proj: Affine     # D_inner -> N_state
    delta_proj: Affine  # D_inner -> D_inner
    D_skip: Tensor     # [D_inner]
    delta_softplus: bool = True  # False feeds delta_proj output straight through (test fixtures)

    @property
    def inner_dim(self) -> int:
        return self.A_log.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A_log.shape[1]


@dataclass
class SSMState:
    """Recurrent hidden state h carried from one window to the next."""
    h: Tensor  # [D_inner, N_state]

    @classmethod
    def zeros(cls, inner_dim: int, state_dim: int) -> SSMState:
        return cls(h=Tensor.zeros((inner_dim, state_dim)))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.h.shape

    @property
    def nbytes(self) -> int:
        return self.h.nbytes

    def check_shape(self, inner_dim: int, state_dim: int) -> None:
        if self.h.shape != (inner_dim, state_dim):
            raise StateError(
                f"SSM state shape {list(self.h.shape)} != expected [{inner_dim}, {state_dim}]"
            )


@dataclass
class MambaBlockParams:
    """
    Temporal encoder parameters.

    x_hat = LN(M)
    a     = SiLU(DW(in_conv(x_hat)))
    gate  = SiLU(in_gate(x_hat))
    out   = out_proj(SSM(a)) * gate + residual
    """
    ln_gamma: Tensor       # [D]
    ln_beta: Tensor        # [D]
    in_conv: Affine        # D -> D_inner
    conv_kernel: Tensor    # [k, D_inner]
    conv_bias: Tensor      # [D_inner]
    in_gate: Affine        # D -> D
    ssm: SSMParams
    out_proj: Affine       # D_inner -> D
    residual_source: str = ResidualSource.INPUT.value
    ln_eps: float = LN_EPS

    @property
    def token_dim(self) -> int:
        return self.ln_gamma.shape[0]

    @property
    def inner_dim(self) -> int:
        return self.ssm.inner_dim

    @property
    def state_dim(self) -> int:
        return self.ssm.state_dim

    def initial_state(self) -> SSMState:
        return SSMState.zeros(self.inner_dim, self.state_dim)


def init_ssm(
    rng: np.random.Generator,
    inner_dim: int,
    state_dim: int = STATE_DIM,
) -> SSMParams:
    """
    Initialise SSM parameters.

    A_log[d, n] = log(n + 1) (real diagonal spectrum 1..N); delta bias chosen so
    softplus(bias) == DELTA_INIT.
    """
    a_log = np.log(np.tile(np.arange(1, state_dim + 1, dtype=float), (inner_dim, 1)))
    delta_bias = float(np.log(np.expm1(DELTA_INIT)))
    return SSMParams(
        A_log=Tensor(a_log),
        B_proj=init_affine(rng, inner_dim, state_dim),
        C_proj=init_affine(rng, inner_dim, state_dim),
        delta_proj=init_affine(rng, inner_dim, inner_dim, std=DELTA_WEIGHT_STD, bias=delta_bias),
        D_skip=full((inner_dim,), 1.0),
    )


def init_mamba_block(
    rng: np.random.Generator,
    token_dim: int,
    inner_dim: int | None = None,
    state_dim: int = STATE_DIM,
    conv_width: int = CONV_WIDTH,
    residual_source: str = ResidualSource.INPUT.value,
    ln_eps: float = LN_EPS,
) -> MambaBlockParams:
    """Initialise a Mamba block for token dimension D (D_inner defaults to 2*D)."""
    inner_dim = inner_dim or EXPAND * token_dim
    return MambaBlockParams(
        ln_gamma=full((token_dim,), 1.0),
        ln_beta=zeros((token_dim,)),
        in_conv=init_affine(rng, token_dim, inner_dim),
        conv_kernel=normal(rng, (conv_width, inner_dim), 1.0 / np.sqrt(conv_width)),
        conv_bias=zeros((inner_dim,)),
        in_gate=init_affine(rng, token_dim, token_dim),
        ssm=init_ssm(rng, inner_dim, state_dim),
        out_proj=init_affine(rng, inner_dim, token_dim),
        residual_source=ResidualSource(residual_source).value,
        ln_eps=ln_eps,
    )
