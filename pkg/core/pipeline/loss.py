"""
Multi-task loss: depth + pointmap + camera, unweighted.

    L_depth    = mean over pixels of (log d_pred - log d_gt)^2
    L_pointmap = mean over points of |p_pred - p_gt|^2
    L_camera   = mean over frames of |t_pred - t_gt|^2 + (1 - |<q_pred, q_gt>|)
"""

from __future__ import annotations

from typing import Sequence

from core.backbone import Predictions
from core.errors import ShapeError
from core.numerics import Tensor, ops


LOSS_TERMS = ("depth", "pointmap", "camera")


def _check_pairs(pred: Sequence[Predictions], gt: Sequence[Predictions]) -> None:
    if len(pred) != len(gt):
        raise ShapeError(f"multi_task_loss: {len(pred)} predicted frames vs {len(gt)} ground-truth frames")
    if not pred:
        raise ShapeError("multi_task_loss: no frames")


def _stack(tensors: list[Tensor]) -> Tensor:
    return ops.concat([ops.reshape(t, (1,) + t.shape) for t in tensors], axis=0)


def depth_loss(pred: Sequence[Predictions], gt: Sequence[Predictions]) -> Tensor:
    diff = ops.sub(
        ops.log(_stack([p.depth for p in pred])),
        ops.log(_stack([g.depth for g in gt])),
    )
    return ops.mean(ops.square(diff))


def pointmap_loss(pred: Sequence[Predictions], gt: Sequence[Predictions]) -> Tensor:
    diff = ops.sub(_stack([p.pointmap for p in pred]), _stack([g.pointmap for g in gt]))
    return ops.mean(ops.sum(ops.square(diff), axis=-1))


def camera_loss(pred: Sequence[Predictions], gt: Sequence[Predictions]) -> Tensor:
    dt = ops.sub(_stack([p.translation for p in pred]), _stack([g.translation for g in gt]))
    translation = ops.mean(ops.sum(ops.square(dt), axis=-1))
    dots = ops.sum(ops.mul(_stack([p.quaternion for p in pred]), _stack([g.quaternion for g in gt])), axis=-1)
    rotation = ops.mean(ops.sub(Tensor.ones(dots.shape), ops.absolute(dots)))
    return ops.add(translation, rotation)


def multi_task_loss(
    pred: Sequence[Predictions],
    gt: Sequence[Predictions],
) -> tuple[Tensor, dict[str, Tensor]]:
    """
    Args:
        pred: Per-frame predictions
        gt: Ground truth for the same frames, same order

    Returns:
        (total, {"depth", "pointmap", "camera"} terms); total is their plain sum
    """
    _check_pairs(pred, gt)
    terms = {
        "depth": depth_loss(pred, gt),
        "pointmap": pointmap_loss(pred, gt),
        "camera": camera_loss(pred, gt),
    }
    total = ops.add(ops.add(terms["depth"], terms["pointmap"]), terms["camera"])
    return total, terms
