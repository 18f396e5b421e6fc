"""Differentiable operations used by the volumetric regression networks.

Spatial ops accept either an unbatched tensor (``C,H,W`` / ``C,D,H,W``) or a
batched one with a leading sample axis. Convolutions keep their working
memory channel-last, which makes the kernel-offset matmuls contiguous.
"""

from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigurationError
from .tensor import Tensor, make_result


class FlopCounter:
    """Accumulates floating point operation counts while active.

    With ``shape_only`` set, ops skip the arithmetic and return zero arrays
    of the right shape, so large networks can be counted cheaply.
    """

    def __init__(self, shape_only=True):
        self.shape_only = shape_only
        self.total = 0
        self.by_kind = {}

    def add(self, kind, count):
        count = int(count)
        self.total += count
        self.by_kind[kind] = self.by_kind.get(kind, 0) + count


_COUNTERS: list[FlopCounter] = []


@contextlib.contextmanager
def counting_flops(shape_only=True):
    counter = FlopCounter(shape_only)
    _COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _COUNTERS.remove(counter)


def _count(kind, n):
    if _COUNTERS:
        _COUNTERS[-1].add(kind, n)
        return _COUNTERS[-1].shape_only
    return False


def _check(cond, message):
    if not cond:
        raise ConfigurationError(message)


# --------------------------------------------------------------------------
# convolutions


def conv2d(x, weight, bias=None, stride=1, pad=0, method="direct"):
    """2-D cross-correlation of ``x`` (``[N,]C,H,W``) with ``weight`` (``O,C,k,k``).

    ``method`` selects between kernel-offset accumulation (``"direct"``) and
    an explicit column matrix (``"im2col"``); both give the same result.
    """
    xd = x.data
    unbatched = xd.ndim == 3
    if unbatched:
        xd = xd[None]
    _check(xd.ndim == 4, f"conv2d input must be rank 3 or 4, got shape {x.shape}")
    _check(weight.ndim == 4, f"conv2d weight must be rank 4, got shape {weight.shape}")
    n, c, h, w = xd.shape
    o, ci, kh, kw = weight.shape
    _check(ci == c, f"conv2d channel mismatch: input has {c}, weight expects {ci}")
    _check(kh == kw and kh % 2 == 1, f"conv2d kernel must be square and odd, got {kh}x{kw}")
    _check(pad >= 0 and stride >= 1, f"conv2d bad pad={pad} stride={stride}")
    _check(h + 2 * pad >= kh and w + 2 * pad >= kw,
           f"conv2d input {h}x{w} (pad {pad}) smaller than kernel {kh}x{kw}")
    if bias is not None:
        _check(bias.shape == (o,), f"conv2d bias shape {bias.shape} != ({o},)")
    if method not in ("direct", "im2col"):
        raise ConfigurationError(f"unknown conv2d method {method!r}")
    k = kh
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1

    if _count("conv", 2 * c * o * k * k * n * ho * wo):
        out = np.zeros((n, o, ho, wo), xd.dtype)
        return Tensor(out[0] if unbatched else out)

    xh = np.zeros((n, h + 2 * pad, w + 2 * pad, c), xd.dtype)
    xh[:, pad:pad + h, pad:pad + w, :] = np.moveaxis(xd, 1, -1)
    # weight as (k, k, C, O)
    wk = np.ascontiguousarray(weight.data.transpose(2, 3, 1, 0))
    rows = n * ho * wo
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1

    def window(i, j):
        return xh[:, i:i + span_h:stride, j:j + span_w:stride, :]

    cols = None
    if method == "im2col":
        win = sliding_window_view(xh, (k, k), axis=(1, 2))[:, ::stride, ::stride]
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(rows, k * k * c)
        out = cols @ wk.reshape(k * k * c, o)
    elif k == 1 and stride == 1:
        out = xh.reshape(rows, c) @ wk[0, 0]
    else:
        out = np.zeros((rows, o), xd.dtype)
        for i in range(k):
            for j in range(k):
                out += window(i, j).reshape(rows, c) @ wk[i, j]
    if bias is not None:
        out += bias.data
    out4 = out.reshape(n, ho, wo, o)
    result = np.moveaxis(out4, -1, 1)
    if unbatched:
        result = result[0]

    def backward_fn(g):
        g4 = g[None] if unbatched else g
        g2 = np.ascontiguousarray(np.moveaxis(g4, 1, -1)).reshape(rows, o)
        gb = g2.sum(axis=0) if bias is not None else None
        gx = gw = None
        if weight.requires_grad:
            if cols is not None:
                gw = (cols.T @ g2).reshape(k, k, c, o)
            elif k == 1 and stride == 1:
                gw = (xh.reshape(rows, c).T @ g2).reshape(1, 1, c, o)
            else:
                gw = np.empty((k, k, c, o), xd.dtype)
                for i in range(k):
                    for j in range(k):
                        gw[i, j] = window(i, j).reshape(rows, c).T @ g2
            gw = gw.transpose(3, 2, 0, 1)
        if x.requires_grad:
            gxh = np.zeros_like(xh)
            if k == 1 and stride == 1:
                gxh += (g2 @ wk[0, 0].T).reshape(xh.shape)
            else:
                for i in range(k):
                    for j in range(k):
                        gxh[:, i:i + span_h:stride, j:j + span_w:stride, :] += (
                            (g2 @ wk[i, j].T).reshape(n, ho, wo, c))
            gx = np.moveaxis(gxh[:, pad:pad + h, pad:pad + w, :], -1, 1)
            if unbatched:
                gx = gx[0]
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(result, inputs, backward_fn)


def flat_kernel_axis(kernel):
    """Return the axis (0..2) whose extent is 3, or None for a 1x1x1 kernel."""
    kernel = tuple(kernel)
    threes = [a for a, e in enumerate(kernel) if e == 3]
    if len(kernel) != 3 or any(e not in (1, 3) for e in kernel) or len(threes) > 1:
        raise ConfigurationError(
            f"flat kernel must be 1x1x1 or have exactly one extent of 3, got {kernel}")
    return threes[0] if threes else None


def conv3d_flat(x, weight, bias=None):
    """Volumetric convolution with a kernel flat along two axes.

    ``x`` is ``[N,]C,D,H,W``; ``weight`` is ``O,C,kd,kh,kw`` with one extent
    of 3 and the others 1 (or all 1). The size-3 axis is padded by 1, so
    the spatial extent is preserved.
    """
    xd = x.data
    unbatched = xd.ndim == 4
    if unbatched:
        xd = xd[None]
    _check(xd.ndim == 5, f"conv3d_flat input must be rank 4 or 5, got shape {x.shape}")
    _check(weight.ndim == 5, f"conv3d_flat weight must be rank 5, got shape {weight.shape}")
    n, c, d, h, w = xd.shape
    o, ci = weight.shape[:2]
    _check(ci == c, f"conv3d_flat channel mismatch: input has {c}, weight expects {ci}")
    axis = flat_kernel_axis(weight.shape[2:])
    if bias is not None:
        _check(bias.shape == (o,), f"conv3d_flat bias shape {bias.shape} != ({o},)")
    taps = 1 if axis is None else 3
    rows = n * d * h * w

    if _count("conv", 2 * c * o * taps * rows):
        out = np.zeros((n, o, d, h, w), xd.dtype)
        return Tensor(out[0] if unbatched else out)

    xl = np.moveaxis(xd, 1, -1)  # N,D,H,W,C
    wt = weight.data.reshape(o, c, taps).transpose(2, 1, 0)  # taps,C,O
    if axis is None:
        xc = np.ascontiguousarray(xl).reshape(rows, c)
        out = xc @ wt[0]
    else:
        ax = 1 + axis
        padding = [(0, 0)] * 5
        padding[ax] = (1, 1)
        xp = np.pad(xl, padding)
        extent = xl.shape[ax]
        slices = []
        for j in range(3):
            sl = [slice(None)] * 5
            sl[ax] = slice(j, j + extent)
            slices.append(tuple(sl))
        out = np.zeros((rows, o), xd.dtype)
        for j in range(3):
            out += np.ascontiguousarray(xp[slices[j]]).reshape(rows, c) @ wt[j]
    if bias is not None:
        out += bias.data
    result = np.moveaxis(out.reshape(n, d, h, w, o), -1, 1)
    if unbatched:
        result = result[0]

    def backward_fn(g):
        g5 = g[None] if unbatched else g
        g2 = np.ascontiguousarray(np.moveaxis(g5, 1, -1)).reshape(rows, o)
        gb = g2.sum(axis=0) if bias is not None else None
        gx = gw = None
        if axis is None:
            if weight.requires_grad:
                gw = (xc.T @ g2)[None]
            if x.requires_grad:
                gx = (g2 @ wt[0].T).reshape(n, d, h, w, c)
        else:
            if weight.requires_grad:
                gw = np.stack([
                    np.ascontiguousarray(xp[slices[j]]).reshape(rows, c).T @ g2
                    for j in range(3)])
            if x.requires_grad:
                gxp = np.zeros_like(xp)
                for j in range(3):
                    gxp[slices[j]] += (g2 @ wt[j].T).reshape(n, d, h, w, c)
                sl = [slice(None)] * 5
                sl[1 + axis] = slice(1, 1 + xl.shape[1 + axis])
                gx = gxp[tuple(sl)]
        if gw is not None:
            gw = gw.transpose(2, 1, 0).reshape(weight.shape)
        if gx is not None:
            gx = np.moveaxis(gx, -1, 1)
            if unbatched:
                gx = gx[0]
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(result, inputs, backward_fn)


# --------------------------------------------------------------------------
# pointwise


def relu(x):
    if _count("pointwise", x.size):
        return Tensor(np.zeros_like(x.data))
    xd = x.data
    out = np.maximum(xd, 0)

    def backward_fn(g):
        return (g * (xd > 0),)

    return make_result(out, (x,), backward_fn)


def sigmoid(x):
    """Logistic function, clipped to the open interval (0, 1) of the dtype."""
    if _count("pointwise", x.size):
        return Tensor(np.full_like(x.data, 0.5))
    xd = x.data
    out = 0.5 * (1.0 + np.tanh(0.5 * xd))
    lo = np.nextafter(xd.dtype.type(0), xd.dtype.type(1))
    hi = np.nextafter(xd.dtype.type(1), xd.dtype.type(0))
    out = np.clip(out, lo, hi).astype(xd.dtype, copy=False)

    def backward_fn(g):
        return (g * out * (1 - out),)

    return make_result(out, (x,), backward_fn)


def pointwise(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ConfigurationError(f"unknown pointwise kind {kind!r}")


# --------------------------------------------------------------------------
# resampling


def maxpool2(x):
    """2x2 max pooling over the last two axes; gradient goes to the first argmax."""
    *lead, h, w = x.shape
    _check(h % 2 == 0 and w % 2 == 0, f"maxpool2 needs even spatial extents, got {h}x{w}")
    if _count("pool", x.size):
        return Tensor(np.zeros((*lead, h // 2, w // 2), x.dtype))
    xr = x.data.reshape(*lead, h // 2, 2, w // 2, 2)
    flat = np.swapaxes(xr, -3, -2).reshape(*lead, h // 2, w // 2, 4)
    idx = flat.argmax(axis=-1)[..., None]
    out = np.take_along_axis(flat, idx, axis=-1)[..., 0]

    def backward_fn(g):
        gflat = np.zeros(flat.shape, g.dtype)
        np.put_along_axis(gflat, idx, g[..., None], axis=-1)
        gx = np.swapaxes(gflat.reshape(*lead, h // 2, w // 2, 2, 2), -3, -2)
        return (gx.reshape(*lead, h, w),)

    return make_result(out, (x,), backward_fn)


def upsample_nearest2(x, axes=(-2, -1)):
    """Nearest-neighbour doubling along ``axes`` (default: the last two)."""
    axes = tuple(a % x.ndim for a in axes)
    out_shape = list(x.shape)
    for a in axes:
        out_shape[a] *= 2
    if _count("upsample", 0):
        return Tensor(np.zeros(out_shape, x.dtype))
    out = x.data
    for a in axes:
        out = np.repeat(out, 2, axis=a)

    def backward_fn(g):
        for a in axes:
            shp = list(g.shape)
            shp[a:a + 1] = [shp[a] // 2, 2]
            g = g.reshape(shp).sum(axis=a + 1)
        return (g,)

    return make_result(out, (x,), backward_fn)


# --------------------------------------------------------------------------
# structural


def add(a, b):
    _check(a.shape == b.shape, f"add shape mismatch: {a.shape} vs {b.shape}")
    if _count("pointwise", a.size):
        return Tensor(np.zeros_like(a.data))

    def backward_fn(g):
        return g, g

    return make_result(a.data + b.data, (a, b), backward_fn)


def concat_channels(parts, axis=0):
    """Concatenate along the channel axis; other extents must agree."""
    parts = list(parts)
    _check(len(parts) > 0, "concat_channels needs at least one part")
    ref = parts[0].shape
    ax = axis % len(ref)
    for p in parts[1:]:
        _check(len(p.shape) == len(ref) and all(
            p.shape[i] == ref[i] for i in range(len(ref)) if i != ax),
            f"concat_channels extent mismatch: {ref} vs {p.shape}")
    sizes = [p.shape[ax] for p in parts]
    if _count("concat", 0):
        shp = list(ref)
        shp[ax] = sum(sizes)
        return Tensor(np.zeros(shp, parts[0].dtype))
    out = np.concatenate([p.data for p in parts], axis=ax)
    bounds = np.cumsum([0] + sizes)

    def backward_fn(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
            for i in range(len(parts)))

    return make_result(out, parts, backward_fn)


def reshape(x, shape):
    if _count("reshape", 0):
        return Tensor(np.zeros(x.data.reshape(shape).shape, x.dtype))
    src = x.shape

    def backward_fn(g):
        return (g.reshape(src),)

    return make_result(x.data.reshape(shape), (x,), backward_fn)


def sum_all(x):
    def backward_fn(g):
        return (np.broadcast_to(g.reshape(()), x.shape).astype(x.dtype),)

    total = np.asarray(x.data.sum(dtype=np.float64), dtype=x.dtype)
    return make_result(total, (x,), backward_fn)


def scale(x, factor):
    """Multiply by a constant."""
    def backward_fn(g):
        return (g * x.dtype.type(factor),)

    return make_result(x.data * x.dtype.type(factor), (x,), backward_fn)


def add_all(terms):
    """Sum of several same-shape tensors."""
    terms = list(terms)
    _check(len(terms) > 0, "add_all needs at least one term")
    out = terms[0].data.copy()
    for t in terms[1:]:
        _check(t.shape == terms[0].shape, f"add_all shape mismatch: {t.shape}")
        out = out + t.data

    def backward_fn(g):
        return tuple(g for _ in terms)

    return make_result(out, terms, backward_fn)


# --------------------------------------------------------------------------
# normalization


def batchnorm(x, gamma, beta, running_mean, running_var, training,
              momentum=0.1, eps=1e-5, channel_axis=0):
    """Per-channel batch normalization.

    In training mode statistics come from the input (all axes except the
    channel axis) and the running buffers are updated in place; in eval
    mode the running buffers are used.
    """
    ax = channel_axis % x.ndim
    c = x.shape[ax]
    _check(gamma.shape == (c,) and beta.shape == (c,),
           f"batchnorm channel mismatch: input has {c}, gamma {gamma.shape}, beta {beta.shape}")
    if _count("norm", 2 * x.size):
        return Tensor(np.zeros_like(x.data))
    red = tuple(i for i in range(x.ndim) if i != ax)
    bshape = [1] * x.ndim
    bshape[ax] = c
    xd = x.data
    count = xd.size // c

    if training:
        mean = xd.mean(axis=red, dtype=np.float64)
        var = np.maximum(xd.var(axis=red, dtype=np.float64), 0.0)
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        unbiased = var * count / (count - 1) if count > 1 else var
        running_var *= 1 - momentum
        running_var += momentum * unbiased
    else:
        mean = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    invstd = (1.0 / np.sqrt(var + eps)).astype(xd.dtype).reshape(bshape)
    mean = mean.astype(xd.dtype).reshape(bshape)
    xhat = (xd - mean) * invstd
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def backward_fn(g):
        gg = (g * xhat).sum(axis=red) if gamma.requires_grad else None
        gbeta = g.sum(axis=red) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data.reshape(bshape)
            if training:
                s1 = gxhat.sum(axis=red, keepdims=True)
                s2 = (gxhat * xhat).sum(axis=red, keepdims=True)
                gx = invstd * (gxhat - s1 / count - xhat * s2 / count)
            else:
                gx = gxhat * invstd
        return gx, gg, gbeta

    return make_result(out, (x, gamma, beta), backward_fn)
