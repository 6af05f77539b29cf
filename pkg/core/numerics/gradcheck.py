"""
Finite-difference gradient checker.

Compares reverse-mode gradients from GradTape with central differences:

    rel_err = |analytic - numeric| / max(1, |numeric|)

and reports the maximum over all (or a sampled subset of) input coordinates.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from core.errors import NumericalError, ShapeError
from core.numerics.tensor import GradTape, Tensor


def check_gradient(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-6,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Maximum relative error between analytic and central-difference gradients.

    Args:
        f: Scalar-valued function of the inputs, built from registered primitives
        inputs: Points at which to differentiate
        eps: Central-difference step, in [1e-7, 1e-4] for 64-bit
        max_coords: If set, check this many randomly chosen coordinates per input
        seed: Seed for coordinate sampling

    Returns:
        Max over checked coordinates of |analytic - numeric| / max(1, |numeric|)
    """
    inputs = list(inputs)
    with GradTape() as tape:
        tape.watch(*inputs)
        out = f(*inputs)
    if out.size != 1:
        raise ShapeError(f"check_gradient: f must return a scalar, got shape {list(out.shape)}")

    analytic = [g.data for g in tape.gradient(out, inputs)]
    for g in analytic:
        if not np.isfinite(g).all():
            raise NumericalError("check_gradient: analytic gradient is not finite")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for i, x in enumerate(inputs):
        coords = np.arange(x.size)
        if max_coords is not None and x.size > max_coords:
            coords = rng.choice(x.size, size=max_coords, replace=False)
        base = x.numpy().reshape(-1)
        for c in coords:
            numeric = _central_difference(f, inputs, i, base, int(c), eps)
            err = abs(analytic[i].reshape(-1)[c] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, float(err))
    return worst


def _central_difference(
    f: Callable[..., Tensor],
    inputs: list[Tensor],
    which: int,
    base: np.ndarray,
    coord: int,
    eps: float,
) -> float:
    shape = inputs[which].shape
    values = []
    for step in (eps, -eps):
        bumped = base.copy()
        bumped[coord] += step
        args = list(inputs)
        args[which] = Tensor(bumped.reshape(shape), dtype=inputs[which].dtype)
        values.append(f(*args).item())
    return (values[0] - values[1]) / (2.0 * eps)
