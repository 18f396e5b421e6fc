"""Floating point operation accounting and FLOP-matched conv3d-flat specs.

Counting convention: a convolution costs ``2 * C_in * C_out * prod(kernel)
* prod(output spatial)`` per sample (multiply + add); relu, sigmoid and add
cost one op per output element; batch normalization costs two (scale and
shift). Pooling, upsampling, reshapes and concatenation are free.
"""

from __future__ import annotations

import numpy as np

from ..autodiff.ops import counting_flops
from ..autodiff.tensor import Tensor


def flop_count(network, input_shape=None):
    """Count the FLOPs of one eval-mode forward pass on an input of ``input_shape``."""
    if input_shape is None:
        w, h, _ = network.spec.volume_dims
        input_shape = (network.spec.input_channels, h, w)
    was_training = network.training
    network.eval()
    try:
        with counting_flops(shape_only=True) as counter:
            network.forward(Tensor(np.zeros(input_shape, np.float32)))
    finally:
        network.train(was_training)
    return counter.total


def flop_breakdown(network, input_shape=None):
    if input_shape is None:
        w, h, _ = network.spec.volume_dims
        input_shape = (network.spec.input_channels, h, w)
    network.eval()
    with counting_flops(shape_only=True) as counter:
        network.forward(Tensor(np.zeros(input_shape, np.float32)))
    return dict(counter.by_kind)


def reference_spec(spec):
    """The multistack spec a conv3d-flat spec is compared against."""
    from .network import DEFAULT_FEATURES, NetworkSpec

    return NetworkSpec.for_variant(
        "multistack",
        volume_dims=spec.volume_dims,
        hourglass_count=spec.hourglass_count,
        residuals_per_location=spec.residuals_per_location,
        base_features=DEFAULT_FEATURES,
        batchnorm=spec.batchnorm,
        levels=spec.levels,
    )


def flop_matched_spec(spec, reference=None, tolerance=0.10, max_features=512):
    """Pick the conv3d-flat feature width whose FLOPs best match ``reference``.

    Counts grow monotonically with width, so a bisection finds the bracketing
    widths; the closer of the two is returned. Raises if no width lands
    within ``tolerance``.
    """
    from .network import Network

    if spec.variant != "conv3d-flat":
        raise ValueError("flop matching applies to conv3d-flat specs only")
    if reference is None:
        reference = reference_spec(spec)
    target = flop_count(Network(reference))

    cache = {}

    def count(f):
        if f not in cache:
            cache[f] = flop_count(Network(spec.replace(base_features=f)))
        return cache[f]

    lo, hi = 1, 2
    while count(hi) < target and hi < max_features:
        lo, hi = hi, min(hi * 2, max_features)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if count(mid) < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda f: abs(count(f) / target - 1))
    ratio = count(best) / target
    if abs(ratio - 1) > tolerance:
        raise ValueError(f"no conv3d-flat width within {tolerance:.0%} of {target} FLOPs "
                         f"(best {best}: ratio {ratio:.3f})")
    return spec.replace(base_features=best)
