"""Voxel-wise binary cross-entropy and its multi-tap sum.

The printed objective sums ``V log V^ + (1 - V) log(1 - V^)`` over voxels,
which is never positive; the loss here is its negation, so minimizing it is
maximum likelihood. By default it is divided by the voxel count.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import make_result
from ..errors import UsageError

CLAMP = 1e-7


def voxel_bce_loss(pred, target, normalize=True):
    """Negated voxel-wise log-likelihood of binary ``target`` under ``pred``.

    ``pred`` is a tensor of probabilities with the same shape as ``target``
    (an array or anything with a ``values`` array in the same layout).
    Predictions are clamped to ``[1e-7, 1 - 1e-7]``.
    """
    t = np.asarray(getattr(target, "values", target))
    if t.shape != pred.shape:
        raise UsageError(f"prediction shape {pred.shape} does not match target shape {t.shape}")
    p = pred.data.astype(np.float64)
    t = t.astype(np.float64)
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    terms = t * np.log(pc) + (1.0 - t) * np.log1p(-pc)
    count = t.size if normalize else 1
    value = -terms.sum() / count
    inside = (p >= CLAMP) & (p <= 1.0 - CLAMP)

    def backward_fn(g):
        dp = -(t / pc - (1.0 - t) / (1.0 - pc)) * inside / count
        return ((float(g) * dp).astype(pred.dtype),)

    return make_result(np.asarray(value, pred.dtype), (pred,), backward_fn)


def multitap_loss(preds, target, normalize=True):
    """Unweighted sum of ``voxel_bce_loss`` over every supervision tap."""
    preds = list(preds)
    if not preds:
        raise UsageError("multitap_loss needs at least one prediction")
    losses = [voxel_bce_loss(p, target, normalize) for p in preds]
    return losses[0] if len(losses) == 1 else ops.add_all(losses)
