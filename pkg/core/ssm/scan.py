"""
Selective scan - the recurrence at the heart of the memory stream.

Discretisation (zero-order hold for A, Euler for B):

    h_s = exp(delta_s * A) * h_{s-1} + (delta_s * B_s) * u_s
    y_s = C_s . h_s + D_skip * u_s

Two forward strategies share one gradient:
- sequential: one step per position
- chunked: closed form inside each chunk (cumulative log-decay), state
  carried between chunks
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from core.errors import ShapeError
from core.numerics import Tensor, ops, record
from core.schemas import ScanMode
from core.ssm.constants import DEFAULT_CHUNK
from core.ssm.params import SSMParams, SSMState


@dataclass(frozen=True)
class ScanInputs:
    """Discretisation inputs derived from u (or supplied directly by tests)."""
    delta: Tensor  # [S, D_inner]
    A: Tensor      # [D_inner, N_state]
    B: Tensor      # [S, N_state]
    C: Tensor      # [S, N_state]
    D: Tensor      # [D_inner]


def scan_inputs(u: Tensor, params: SSMParams) -> ScanInputs:
    """Project u into step sizes and state matrices."""
    raw = params.delta_proj(u)
    delta = ops.softplus(raw) if params.delta_softplus else raw
    return ScanInputs(
        delta=delta,
        A=ops.neg(ops.exp(params.A_log)),
        B=params.B_proj(u),
        C=params.C_proj(u),
        D=params.D_skip,
    )


def selective_scan_sequential(
    u: Tensor,
    params: SSMParams,
    h0: SSMState,
    inputs: Optional[ScanInputs] = None,
) -> tuple[Tensor, SSMState]:
    """
    Run the recurrence one position at a time.

    Args:
        u: [S, D_inner] input sequence (S >= 1)
        params: SSM parameters
        h0: Carried state from the previous window
        inputs: Override of the derived delta/A/B/C/D (tests)

    Returns:
        (y [S, D_inner], final state)
    """
    return _scan(u, params, h0, inputs, _sequential_states)


def selective_scan_chunked(
    u: Tensor,
    params: SSMParams,
    h0: SSMState,
    chunk: int = DEFAULT_CHUNK,
    inputs: Optional[ScanInputs] = None,
) -> tuple[Tensor, SSMState]:
    """Same contract as selective_scan_sequential, computed chunk by chunk."""
    if chunk < 1:
        raise ShapeError(f"chunk must be >= 1, got {chunk}")
    return _scan(u, params, h0, inputs, lambda *a: _chunked_states(*a, chunk=chunk))


def selective_scan(
    u: Tensor,
    params: SSMParams,
    h0: SSMState,
    mode: str = ScanMode.SEQUENTIAL.value,
    chunk: int = DEFAULT_CHUNK,
) -> tuple[Tensor, SSMState]:
    if mode == ScanMode.CHUNKED:
        return selective_scan_chunked(u, params, h0, chunk=chunk)
    return selective_scan_sequential(u, params, h0)


# ---- Shared machinery ----

StateFn = Callable[..., np.ndarray]


def _scan(
    u: Tensor,
    params: SSMParams,
    h0: SSMState,
    inputs: Optional[ScanInputs],
    states_fn: StateFn,
) -> tuple[Tensor, SSMState]:
    if u.ndim != 2 or u.shape[0] < 1:
        raise ShapeError(f"selective scan needs u of shape [S>=1, D_inner], got {list(u.shape)}")
    if u.shape[1] != params.inner_dim:
        raise ShapeError(f"u has {u.shape[1]} channels, SSM expects {params.inner_dim}")
    h0.check_shape(params.inner_dim, params.state_dim)
    inputs = inputs or scan_inputs(u, params)

    x, delta, A, B, C, D = (t.data for t in (u, inputs.delta, inputs.A, inputs.B, inputs.C, inputs.D))
    hs = states_fn(x, delta, A, B, h0.h.data)
    y = (hs[1:] * C[:, None, :]).sum(axis=-1) + D * x
    y_t = Tensor.wrap(y)
    h_last = Tensor.wrap(hs[-1].copy())

    def vjp(gs):
        return _scan_backward(gs, hs, x, delta, A, B, C, D)

    record([y_t, h_last], [u, inputs.delta, inputs.A, inputs.B, inputs.C, inputs.D, h0.h], vjp)
    return y_t, SSMState(h=h_last)


def _sequential_states(x, delta, A, B, h0) -> np.ndarray:
    steps = x.shape[0]
    hs = np.empty((steps + 1,) + h0.shape, dtype=x.dtype)
    hs[0] = h0
    for s in range(steps):
        decay = np.exp(delta[s][:, None] * A)
        hs[s + 1] = decay * hs[s] + (delta[s][:, None] * B[s][None, :]) * x[s][:, None]
    return hs


def _chunked_states(x, delta, A, B, h0, chunk: int) -> np.ndarray:
    steps = x.shape[0]
    hs = np.empty((steps + 1,) + h0.shape, dtype=x.dtype)
    hs[0] = h0
    h_start = h0
    for start in range(0, steps, chunk):
        stop = min(steps, start + chunk)
        n = stop - start
        log_decay = np.cumsum(delta[start:stop][:, :, None] * A[None], axis=0)  # [n, Di, N]
        drive = (delta[start:stop][:, :, None] * B[start:stop][:, None, :]) * x[start:stop][:, :, None]
        causal = np.tril(np.ones((n, n), dtype=bool))[:, :, None, None]
        gap = np.where(causal, log_decay[:, None] - log_decay[None, :], -np.inf)
        h_chunk = np.exp(log_decay) * h_start[None] + np.einsum("sjdn,jdn->sdn", np.exp(gap), drive)
        hs[start + 1:stop + 1] = h_chunk
        h_start = h_chunk[-1]
    return hs


def _scan_backward(gs, hs, x, delta, A, B, C, D):
    gy, gh_last = gs
    steps = x.shape[0]
    gy = np.zeros_like(x) if gy is None else gy
    gh = np.zeros_like(hs[0]) if gh_last is None else np.array(gh_last, copy=True)

    gx = gy * D
    gdelta = np.empty_like(delta)
    gA = np.zeros_like(A)
    gB = np.empty_like(B)
    gC = np.einsum("sd,sdn->sn", gy, hs[1:])
    gD = (gy * x).sum(axis=0)

    for s in range(steps - 1, -1, -1):
        gh = gh + gy[s][:, None] * C[s][None, :]
        decay = np.exp(delta[s][:, None] * A)
        h_prev = hs[s]
        gx[s] += (gh * delta[s][:, None] * B[s][None, :]).sum(axis=1)
        gdelta[s] = (gh * (decay * A * h_prev + B[s][None, :] * x[s][:, None])).sum(axis=1)
        gA += gh * decay * delta[s][:, None] * h_prev
        gB[s] = (gh * delta[s][:, None] * x[s][:, None]).sum(axis=0)
        gh = gh * decay

    return gx, gdelta, gA, gB, gC, gD, gh
