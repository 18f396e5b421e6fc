"""Central finite-difference checks for tape gradients.

Checks run in float64 ("shadow mode"): callers pass float64 tensors, since
float32 round-off alone exceeds a 1e-3 relative tolerance at step 1e-3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tape, backward

DEFAULT_STEP = 1e-3
DEFAULT_RTOL = 1e-3
# denominators below this are treated as this, so near-zero gradients are
# compared absolutely
ERROR_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    checked: int
    tolerance: float = DEFAULT_RTOL

    @property
    def ok(self):
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tolerance


def relative_error(analytic, numeric, floor=ERROR_FLOOR):
    analytic = np.asarray(analytic, np.float64)
    numeric = np.asarray(numeric, np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def analytic_gradients(loss_fn, tensors):
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]


def numeric_gradient(loss_fn, tensor, index, step=DEFAULT_STEP):
    flat = tensor.data.reshape(-1)
    orig = flat[index]
    flat[index] = orig + step
    up = float(loss_fn().data)
    flat[index] = orig - step
    down = float(loss_fn().data)
    flat[index] = orig
    return (up - down) / (2 * step)


def check_gradients(loss_fn, tensors, names=None, step=DEFAULT_STEP, rtol=DEFAULT_RTOL,
                    max_samples=None, rng=None):
    """Compare tape gradients of ``loss_fn()`` with central differences.

    ``loss_fn`` takes no arguments and returns a scalar tensor computed from
    ``tensors`` (whose ``.data`` is perturbed in place). With
    ``max_samples`` set, that many entries are drawn at random across all
    tensors; otherwise every entry of every tensor is checked.
    """
    names = names or [t.name or f"input{i}" for i, t in enumerate(tensors)]
    grads = analytic_gradients(loss_fn, tensors)
    sizes = [t.data.size for t in tensors]
    if max_samples is None:
        picks = [(ti, j) for ti, n in enumerate(sizes) for j in range(n)]
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        total = sum(sizes)
        flat_ids = rng.choice(total, size=min(max_samples, total), replace=False)
        bounds = np.cumsum([0] + sizes)
        picks = []
        for fid in sorted(int(f) for f in flat_ids):
            ti = int(np.searchsorted(bounds, fid, side="right") - 1)
            picks.append((ti, fid - bounds[ti]))
    worst = {}
    counts = {}
    for ti, j in picks:
        num = numeric_gradient(loss_fn, tensors[ti], j, step)
        err = float(relative_error(grads[ti].reshape(-1)[j], num))
        worst[ti] = max(worst.get(ti, 0.0), err)
        counts[ti] = counts.get(ti, 0) + 1
    return [GradCheckResult(names[ti], worst[ti], counts[ti], rtol) for ti in sorted(worst)]
