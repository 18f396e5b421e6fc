"""Finite-difference gradient suite over every differentiable op and a micro-network.

Each check projects the op output onto fixed random weights to get a scalar,
then compares tape gradients with central differences in float64.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.gradcheck import DEFAULT_RTOL, DEFAULT_STEP, check_gradients
from .autodiff.tensor import Tensor, make_result
from .nn.network import NetworkSpec, build_network
from .training.loss import multitap_loss, voxel_bce_loss

# The composed network has ReLU kinks and batch statistics over a few
# voxels; a 1e-3 step straddles kinks, so the network check uses a finer one.
NETWORK_STEP = 1e-5


@dataclass
class SuiteEntry:
    name: str
    max_rel_error: float
    checked: int
    tolerance: float = DEFAULT_RTOL

    @property
    def ok(self):
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tolerance


def _project(out, weights):
    w = np.asarray(weights, out.dtype)
    return ops.sum_all(make_result(out.data * w, (out,), lambda g: (g * w,)))


def _param(rng, shape, away_from_zero=False):
    a = rng.standard_normal(shape)
    if away_from_zero:
        # keep relu/maxpool inputs clear of kinks and ties under a 1e-3 step
        a = np.sign(a) * (np.abs(a) + 0.05)
    return Tensor(a, requires_grad=True, dtype=np.float64)


def _op_cases(rng):
    """Yield ``(name, loss_fn, tensors)`` for each op and input slot."""
    x = _param(rng, (2, 5, 5))
    w = _param(rng, (3, 2, 3, 3))
    b = _param(rng, 3)
    for method in ("direct", "im2col"):
        for stride in (1, 2):
            ho = (5 + 2 - 3) // stride + 1
            wts = rng.standard_normal((3, ho, ho))
            yield (f"conv2d[{method},stride={stride}]",
                   lambda m=method, s=stride, q=wts: _project(ops.conv2d(x, w, b, s, 1, m), q), [x, w, b])

    xb = _param(rng, (2, 3, 4, 4))
    w1 = _param(rng, (5, 3, 1, 1))
    b1 = _param(rng, 5)
    q1 = rng.standard_normal((2, 5, 4, 4))
    yield "conv2d[1x1,batched]", lambda: _project(ops.conv2d(xb, w1, b1), q1), [xb, w1, b1]

    v = _param(rng, (2, 4, 4, 4))
    for kernel in ((3, 1, 1), (1, 3, 1), (1, 1, 3)):
        wk = _param(rng, (3, 2, *kernel))
        bk = _param(rng, 3)
        qk = rng.standard_normal((3, 4, 4, 4))
        yield (f"conv3d_flat{kernel}",
               lambda wk=wk, bk=bk, qk=qk: _project(ops.conv3d_flat(v, wk, bk), qk), [v, wk, bk])

    p = _param(rng, (3, 4, 4), away_from_zero=True)
    qp = rng.standard_normal((3, 4, 4))
    for kind in ("relu", "sigmoid"):
        yield f"pointwise[{kind}]", lambda k=kind: _project(ops.pointwise(p, k), qp), [p]

    m = Tensor(rng.permutation(96).reshape(2, 3, 4, 4) / 10.0, requires_grad=True, dtype=np.float64)
    yield "maxpool2", lambda q=rng.standard_normal((2, 3, 2, 2)): _project(ops.maxpool2(m), q), [m]
    u = _param(rng, (2, 3, 2))
    yield "upsample_nearest2", lambda q=rng.standard_normal((2, 6, 4)): _project(ops.upsample_nearest2(u), q), [u]

    a, c = _param(rng, (2, 3, 3)), _param(rng, (2, 3, 3))
    yield "add", lambda q=rng.standard_normal((2, 3, 3)): _project(ops.add(a, c), q), [a, c]
    d = _param(rng, (1, 3, 3))
    yield ("concat_channels",
           lambda q=rng.standard_normal((3, 3, 3)): _project(ops.concat_channels([a, d]), q), [a, d])
    yield "reshape", lambda q=rng.standard_normal((6, 3)): _project(ops.reshape(a, (6, 3)), q), [a]

    xn = _param(rng, (3, 2, 3, 3))
    gamma, beta = _param(rng, 2), _param(rng, 2)
    qn = rng.standard_normal((3, 2, 3, 3))

    def bn_loss():
        mean, var = np.zeros(2), np.ones(2)
        return _project(ops.batchnorm(xn, gamma, beta, mean, var, True, channel_axis=1), qn)

    yield "batchnorm[train]", bn_loss, [xn, gamma, beta]

    pr = Tensor(rng.uniform(0.05, 0.95, (2, 3, 3)), requires_grad=True, dtype=np.float64)
    target = (rng.random((2, 3, 3)) > 0.5).astype(np.float64)
    yield "voxel_bce_loss", lambda: voxel_bce_loss(pr, target), [pr]


def op_gradient_checks(seed=0, step=DEFAULT_STEP, rtol=DEFAULT_RTOL):
    rng = np.random.default_rng(seed)
    entries = []
    for name, loss_fn, tensors in _op_cases(rng):
        results = check_gradients(loss_fn, tensors, step=step, rtol=rtol)
        entries.append(SuiteEntry(name, max(r.max_rel_error for r in results),
                                  sum(r.checked for r in results), rtol))
    return entries


def network_gradient_check(features=16, size=8, samples=50, seed=0, step=NETWORK_STEP,
                           rtol=DEFAULT_RTOL, hourglasses=2):
    """Check a random subsample of a float64 multistack micro-network's parameters."""
    spec = NetworkSpec.for_variant("multistack", volume_dims=(size, size, size),
                                   base_features=features, hourglass_count=hourglasses, seed=seed)
    net = build_network(spec).to_dtype(np.float64)
    rng = np.random.default_rng(seed)
    x = Tensor(rng.random((2, spec.input_channels, size, size)), dtype=np.float64)
    target = (rng.random((2, size, size, size)) > 0.6).astype(np.float64)
    params = net.named_parameters()
    results = check_gradients(lambda: multitap_loss(net(x), target, normalize=False),
                              list(params.values()), names=list(params), step=step, rtol=rtol,
                              max_samples=samples, rng=np.random.default_rng(seed + 1))
    checked = [r for r in results if r.checked]
    worst = max(checked, key=lambda r: r.max_rel_error)
    return SuiteEntry(f"network[multistack,{size}^3,f{features}] worst={worst.name}",
                      worst.max_rel_error, sum(r.checked for r in results), rtol)


def run_gradient_suite(seed=0, features=16, samples=50):
    """Run every check; returns ``(entries, seconds)``."""
    start = time.perf_counter()
    entries = op_gradient_checks(seed)
    entries.append(network_gradient_check(features=features, samples=samples, seed=seed))
    return entries, time.perf_counter() - start
