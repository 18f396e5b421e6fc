"""Residual blocks and the hourglass (encoder-decoder) module.

All blocks use pre-activation ordering (norm, relu, conv) and add their
branch output to the input, so zeroing the last convolution(s) of a block
turns it into the identity map.
"""

from __future__ import annotations

from ..autodiff import ops
from ..errors import ConfigurationError
from .layers import Conv2d, Conv3dFlat, Module, norm_layer, run_sequence


class BottleneckResidual(Module):
    """1x1 reduce to half width, 3x3, 1x1 expand, plus skip."""

    def __init__(self, features, rng, batchnorm=True):
        super().__init__()
        if features % 2:
            raise ConfigurationError(f"bottleneck residual needs an even feature count, got {features}")
        half = features // 2
        self.features = features
        self.norm1 = norm_layer(features, batchnorm)
        self.conv1 = Conv2d(features, half, 1, rng)
        self.norm2 = norm_layer(half, batchnorm)
        self.conv2 = Conv2d(half, half, 3, rng)
        self.norm3 = norm_layer(half, batchnorm)
        self.conv3 = Conv2d(half, features, 1, rng)

    def forward(self, x):
        h = self.conv1(ops.relu(self.norm1(x)))
        h = self.conv2(ops.relu(self.norm2(h)))
        h = self.conv3(ops.relu(self.norm3(h)))
        return ops.add(x, h)

    def zero_final(self):
        self.conv3.zero_()


class MultiScaleResidual(Module):
    """Hierarchical three-branch block.

    Branch widths are C/2, C/4, C/4; each branch is a 3x3 convolution fed by
    the previous branch, and the three outputs are concatenated back to C
    channels before the skip is added.
    """

    def __init__(self, features, rng, batchnorm=True):
        super().__init__()
        if features % 4:
            raise ConfigurationError(
                f"multi-scale residual needs a feature count divisible by 4, got {features}")
        self.features = features
        self.widths = (features // 2, features // 4, features // 4)
        w1, w2, w3 = self.widths
        self.norm1 = norm_layer(features, batchnorm)
        self.conv1 = Conv2d(features, w1, 3, rng)
        self.norm2 = norm_layer(w1, batchnorm)
        self.conv2 = Conv2d(w1, w2, 3, rng)
        self.norm3 = norm_layer(w2, batchnorm)
        self.conv3 = Conv2d(w2, w3, 3, rng)

    def forward(self, x):
        b1 = self.conv1(ops.relu(self.norm1(x)))
        b2 = self.conv2(ops.relu(self.norm2(b1)))
        b3 = self.conv3(ops.relu(self.norm3(b2)))
        return ops.add(x, ops.concat_channels([b1, b2, b3], axis=1))

    def zero_final(self):
        # every branch feeds the concatenation directly
        for conv in (self.conv1, self.conv2, self.conv3):
            conv.zero_()


class FlatVolumetricResidual(Module):
    """Three flat volumetric convolutions in series (depth, height, width) plus skip."""

    def __init__(self, features, rng, batchnorm=True):
        super().__init__()
        self.features = features
        self.norm1 = norm_layer(features, batchnorm)
        self.conv_d = Conv3dFlat(features, features, (3, 1, 1), rng)
        self.norm2 = norm_layer(features, batchnorm)
        self.conv_h = Conv3dFlat(features, features, (1, 3, 1), rng)
        self.norm3 = norm_layer(features, batchnorm)
        self.conv_w = Conv3dFlat(features, features, (1, 1, 3), rng)

    def forward(self, x):
        if x.ndim not in (4, 5):
            raise ConfigurationError(
                f"flat volumetric residual needs a (N,)C,D,H,W input, got shape {x.shape}")
        h = self.conv_d(ops.relu(self.norm1(x)))
        h = self.conv_h(ops.relu(self.norm2(h)))
        h = self.conv_w(ops.relu(self.norm3(h)))
        return ops.add(x, h)

    def zero_final(self):
        self.conv_w.zero_()


BLOCK_KINDS = {
    "bottleneck": BottleneckResidual,
    "multiscale": MultiScaleResidual,
    "flat-volumetric": FlatVolumetricResidual,
}


def block_factory(kind, features, rng, batchnorm=True):
    try:
        cls = BLOCK_KINDS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown block kind {kind!r}") from None
    return lambda: cls(features, rng, batchnorm)


class Hourglass(Module):
    """Symmetric encoder-decoder with a skip branch at every level.

    Each "location" (skip branch, pre-inner, innermost, post-inner) holds
    ``residuals`` blocks, so the parameter count is linear in ``residuals``.
    Pooling and upsampling act on the last two (height, width) axes.
    """

    def __init__(self, levels, residuals, factory):
        super().__init__()
        if levels < 1:
            raise ConfigurationError(f"hourglass needs at least one level, got {levels}")
        if residuals < 1:
            raise ConfigurationError(f"hourglass needs at least one residual per location, got {residuals}")
        self.levels = levels
        self.skip = [factory() for _ in range(residuals)]
        self.down = [factory() for _ in range(residuals)]
        if levels > 1:
            self.inner = Hourglass(levels - 1, residuals, factory)
        else:
            self.inner = [factory() for _ in range(residuals)]
        self.up = [factory() for _ in range(residuals)]

    def forward(self, x):
        h, w = x.shape[-2:]
        step = 2 ** self.levels
        if h % step or w % step:
            raise ConfigurationError(
                f"hourglass with {self.levels} levels needs extents divisible by {step}, got {h}x{w}")
        skip = run_sequence(self.skip, x)
        low = run_sequence(self.down, ops.maxpool2(x))
        low = self.inner(low) if isinstance(self.inner, Hourglass) else run_sequence(self.inner, low)
        low = run_sequence(self.up, low)
        return ops.add(skip, ops.upsample_nearest2(low))

    def bottleneck_shape(self, shape):
        *lead, h, w = shape
        step = 2 ** self.levels
        return (*lead, h // step, w // step)
