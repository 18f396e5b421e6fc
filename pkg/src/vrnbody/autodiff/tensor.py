"""Dense tensors and the tape that records operations for reverse-mode differentiation.

Operations only record onto a tape while one is active::

    with Tape() as tape:
        loss = some_ops(x, w)
    backward(loss, tape)

Outside a tape, ops compute values only, which is what inference uses.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError

DEFAULT_DTYPE = np.float32

_ACTIVE_TAPES: list["Tape"] = []


def _as_array(data, dtype=None):
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
        return data
    if isinstance(data, (np.float32, np.float64)):
        # 0-d arithmetic yields numpy scalars; keep their precision
        return np.asarray(data)
    return np.asarray(data, dtype=DEFAULT_DTYPE)


class Tensor:
    """An n-dimensional float array with an optional gradient and tape handle."""

    __slots__ = ("data", "grad", "requires_grad", "node", "tape", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self.node = None
        self.tape = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{label})"


class Tape:
    """Ordered record of differentiable operations.

    Each record is ``(inputs, output, backward_fn)`` where ``backward_fn``
    maps the upstream gradient of ``output`` to a tuple of input gradients.
    Records are appended as ops run, so the list is topologically ordered.
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE_TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def record(self, inputs, output, backward_fn):
        output.node = len(self.records)
        output.tape = self
        self.records.append((tuple(inputs), output, backward_fn))


def active_tape():
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def make_result(data, inputs, backward_fn):
    """Wrap ``data`` as the output of an op on ``inputs``.

    The op is recorded only when a tape is active and at least one input
    requires a gradient.
    """
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(inputs, out, backward_fn)
    return out


def backward(loss, tape=None):
    """Populate ``.grad`` of every leaf reachable from the scalar ``loss``.

    Leaves accumulate into any existing ``.grad``; call ``zero_grad`` on
    parameters between steps.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    tape = tape if tape is not None else loss.tape
    if tape is None or loss.node is None or loss.tape is not tape:
        raise UsageError("loss was not recorded on the given tape")

    pending = {loss.node: np.ones_like(loss.data)}
    for node in range(loss.node, -1, -1):
        g = pending.pop(node, None)
        if g is None:
            continue
        inputs, _, backward_fn = tape.records[node]
        for t, gi in zip(inputs, backward_fn(g)):
            if gi is None or not t.requires_grad:
                continue
            if gi.shape != t.data.shape:
                gi = gi.reshape(t.data.shape)
            if t.tape is tape and t.node is not None:
                prev = pending.get(t.node)
                pending[t.node] = gi if prev is None else prev + gi
            else:
                gi = gi.astype(t.data.dtype, copy=False)
                t.grad = gi.copy() if t.grad is None else t.grad + gi
