"""
Primitive operations with forward evaluation and vector-Jacobian products.

Every function here takes and returns Tensors and registers itself with the
active GradTape (if any). Elementwise binary ops follow numpy broadcasting;
their gradients are summed back to the input shapes.

Composite layers (layer_norm, depthwise_conv1d_causal, softmax_attention) are
registered as single primitives with hand-written gradients.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import special

from core.errors import EmptyContextError, ShapeError
from core.numerics.tensor import Tensor, record


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast cotangent back down to shape."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, name: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast {list(a.shape)} with {list(b.shape)}") from exc


# ---- Elementwise arithmetic ----

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor.wrap(a.data + b.data)

    def vjp(gs):
        g = gs[0]
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    record([out], [a, b], vjp)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor.wrap(a.data - b.data)

    def vjp(gs):
        g = gs[0]
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    record([out], [a, b], vjp)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    _check_broadcast(a, b, "mul")
    out = Tensor.wrap(a.data * b.data)

    def vjp(gs):
        g = gs[0]
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    record([out], [a, b], vjp)
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = Tensor.wrap(a.data / b.data)

    def vjp(gs):
        g = gs[0]
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    record([out], [a, b], vjp)
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor.wrap(-a.data)
    record([out], [a], lambda gs: (-gs[0],))
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a constant (no gradient to c)."""
    out = Tensor.wrap(a.data * c)
    record([out], [a], lambda gs: (gs[0] * c,))
    return out


# ---- Elementwise functions ----

def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor.wrap(y)
    record([out], [a], lambda gs: (gs[0] * y,))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor.wrap(np.log(a.data))
    record([out], [a], lambda gs: (gs[0] / a.data,))
    return out


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    out = Tensor.wrap(y)
    record([out], [a], lambda gs: (gs[0] * 0.5 / y,))
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor.wrap(a.data * a.data)
    record([out], [a], lambda gs: (gs[0] * 2.0 * a.data,))
    return out


def absolute(a: Tensor) -> Tensor:
    out = Tensor.wrap(np.abs(a.data))
    record([out], [a], lambda gs: (gs[0] * np.sign(a.data),))
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = special.expit(a.data)
    out = Tensor.wrap(s)
    record([out], [a], lambda gs: (gs[0] * s * (1.0 - s),))
    return out


def silu(a: Tensor) -> Tensor:
    """SiLU: x * sigmoid(x)."""
    x = a.data
    s = special.expit(x)
    out = Tensor.wrap(x * s)
    record([out], [a], lambda gs: (gs[0] * (s + x * s * (1.0 - s)),))
    return out


def gelu(a: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x)."""
    x = a.data
    cdf = special.ndtr(x)
    out = Tensor.wrap(x * cdf)

    def vjp(gs):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return (gs[0] * (cdf + x * pdf),)

    record([out], [a], vjp)
    return out


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = Tensor.wrap(np.logaddexp(0.0, x))
    record([out], [a], lambda gs: (gs[0] * special.expit(x),))
    return out


# ---- Reductions and linear algebra ----

def sum(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = Tensor.wrap(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)))

    def vjp(gs):
        g = gs[0]
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    record([out], [a], vjp)
    return out


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {list(a.shape)} @ {list(b.shape)}")
    out = Tensor.wrap(a.data @ b.data)
    record([out], [a, b], lambda gs: (gs[0] @ b.data.T, a.data.T @ gs[0]))
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map x @ W + b, applied row-wise."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(
            f"linear: input dim {x.shape[-1]} does not match weight {list(weight.shape)}"
        )
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: bias {list(bias.shape)} vs output dim {weight.shape[1]}")
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def transpose(a: Tensor) -> Tensor:
    out = Tensor.wrap(a.data.T)
    record([out], [a], lambda gs: (gs[0].T,))
    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = Tensor.wrap(a.data.reshape(tuple(shape)))
    record([out], [a], lambda gs: (gs[0].reshape(a.shape),))
    return out


def index(a: Tensor, key) -> Tensor:
    """Basic or integer-array indexing (a[key])."""
    out = Tensor.wrap(np.array(a.data[key]))

    def vjp(gs):
        g = np.zeros(a.shape, dtype=a.dtype)
        np.add.at(g, key, gs[0])
        return (g,)

    record([out], [a], vjp)
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an existing axis."""
    if not tensors:
        raise ShapeError("concat: empty input list")
    if len(tensors) == 1:
        return tensors[0]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            n != m for i, (n, m) in enumerate(zip(t.shape, ref)) if i != axis % len(ref)
        ):
            raise ShapeError(f"concat: shape {list(t.shape)} does not match {list(ref)} off axis {axis}")
    out = Tensor.wrap(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(gs):
        return tuple(np.split(gs[0], bounds, axis=axis))

    record([out], list(tensors), vjp)
    return out


# ---- Layers ----

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalise each row to zero mean / unit variance, then scale and shift.

    Args:
        x: [S, D] input
        gamma: [D] scale
        beta: [D] shift
        eps: variance floor (> 0)
    """
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: last dim {d} vs gamma {list(gamma.shape)} / beta {list(beta.shape)}"
        )
    if eps <= 0:
        raise ShapeError(f"layer_norm: eps must be positive, got {eps}")

    xc = x.data - x.data.mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    out = Tensor.wrap(xhat * gamma.data + beta.data)

    def vjp(gs):
        g = gs[0]
        lead = tuple(range(g.ndim - 1))
        dxhat = g * gamma.data
        dx = rstd * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    record([out], [x, gamma, beta], vjp)
    return out


def depthwise_conv1d_causal(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """
    Per-channel causal convolution along the sequence axis.

    out[s, d] = sum_j kernel[j, d] * x[s - k + 1 + j, d] + bias[d],
    with x treated as zero before position 0. Output length equals input length.
    """
    if x.ndim != 2 or kernel.ndim != 2:
        raise ShapeError(f"depthwise_conv1d_causal: need [S,D] and [k,D], got {list(x.shape)}, {list(kernel.shape)}")
    s_len, d = x.shape
    k = kernel.shape[0]
    if kernel.shape[1] != d or bias.shape != (d,):
        raise ShapeError(
            f"depthwise_conv1d_causal: {d} channels vs kernel {list(kernel.shape)} / bias {list(bias.shape)}"
        )
    if k < 1:
        raise ShapeError("depthwise_conv1d_causal: kernel width must be >= 1")

    xp = np.concatenate([np.zeros((k - 1, d), dtype=x.dtype), x.data], axis=0)
    y = np.broadcast_to(bias.data, (s_len, d)).copy()
    for j in range(k):
        y += kernel.data[j] * xp[j:j + s_len]
    out = Tensor.wrap(y)

    def vjp(gs):
        g = gs[0]
        gxp = np.zeros_like(xp)
        gk = np.empty_like(kernel.data)
        for j in range(k):
            gxp[j:j + s_len] += g * kernel.data[j]
            gk[j] = (g * xp[j:j + s_len]).sum(axis=0)
        return gxp[k - 1:], gk, g.sum(axis=0)

    record([out], [x, kernel, bias], vjp)
    return out


def softmax_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """
    Scaled dot-product attention softmax(Q K^T / sqrt(d_k)) V.

    Args:
        q: [Sq, d_k] queries
        k: [Sk, d_k] keys
        v: [Sk, d_v] values
    """
    if k.shape[0] == 0:
        raise EmptyContextError("softmax_attention: no keys to attend to")
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError("softmax_attention: Q, K, V must be rank 2")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"softmax_attention: Q dim {q.shape[1]} vs K dim {k.shape[1]}")
    if v.shape[0] != k.shape[0]:
        raise ShapeError(f"softmax_attention: {k.shape[0]} keys vs {v.shape[0]} values")

    inv = 1.0 / math.sqrt(q.shape[1])
    probs = special.softmax(q.data @ k.data.T * inv, axis=-1)
    out = Tensor.wrap(probs @ v.data)

    def vjp(gs):
        g = gs[0]
        gp = g @ v.data.T
        glog = probs * (gp - (gp * probs).sum(axis=-1, keepdims=True)) * inv
        return glog @ k.data, glog.T @ q.data, probs.T @ g

    record([out], [q, k, v], vjp)
    return out


def attention_weights(q: Tensor, k: Tensor) -> np.ndarray:
    """Softmax weights of softmax_attention (inspection only, not recorded)."""
    if k.shape[0] == 0:
        raise EmptyContextError("attention_weights: no keys to attend to")
    return special.softmax(q.data @ k.data.T / math.sqrt(q.shape[1]), axis=-1)
