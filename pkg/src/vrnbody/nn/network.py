"""Declarative network specs and the variant factory.

A network maps an input image stack (``C,H,W``) to one occupancy volume per
supervision tap. Each volume comes out as ``D,H,W``: output channel ``d`` is
depth slice ``d`` of the ``W x H x D`` grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..config import format_config, format_dims, parse_bool, parse_config, parse_dims
from ..errors import ConfigurationError, UsageError
from .blocks import Hourglass, block_factory
from .layers import BatchNorm, Conv2d, Conv3dFlat, Identity, Module, norm_layer

VARIANTS = (
    "vrn-guided",
    "multistack",
    "old-residual",
    "image-only",
    "landmarks-only",
    "mask-only",
    "conv3d-flat",
)

INPUT_CHANNELS = {
    "vrn-guided": 19,
    "multistack": 19,
    "old-residual": 19,
    "conv3d-flat": 19,
    "image-only": 3,
    "landmarks-only": 16,
    "mask-only": 1,
}

_VARIANT_DEFAULTS = {
    "vrn-guided": dict(hourglass_count=2, residuals_per_location=4, block_kind="bottleneck"),
    "multistack": dict(hourglass_count=4, residuals_per_location=2, block_kind="multiscale"),
    "old-residual": dict(hourglass_count=4, residuals_per_location=2, block_kind="bottleneck"),
    "image-only": dict(hourglass_count=4, residuals_per_location=2, block_kind="multiscale"),
    "landmarks-only": dict(hourglass_count=4, residuals_per_location=2, block_kind="multiscale"),
    "mask-only": dict(hourglass_count=4, residuals_per_location=2, block_kind="multiscale"),
    "conv3d-flat": dict(hourglass_count=4, residuals_per_location=2, block_kind="flat-volumetric"),
}

DEFAULT_DIMS = (64, 64, 64)
DEFAULT_FEATURES = 32
# depth of the lifted trunk volume relative to the output depth
CONV3D_DEPTH_FACTOR = 8
# output heads start near zero logits, i.e. predictions near 0.5
HEAD_INIT_STD = 0.01


def default_levels(volume_dims):
    w, h, _ = volume_dims
    return max(1, min(4, int(math.log2(min(w, h))) - 1))


@dataclass(frozen=True)
class NetworkSpec:
    variant: str
    input_channels: int
    volume_dims: tuple
    hourglass_count: int
    residuals_per_location: int
    base_features: int | None
    block_kind: str
    batchnorm: bool = True
    seed: int = 0
    levels: int | None = None

    @classmethod
    def for_variant(cls, variant, volume_dims=DEFAULT_DIMS, **overrides):
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
        values = dict(
            variant=variant,
            input_channels=INPUT_CHANNELS[variant],
            volume_dims=tuple(volume_dims),
            base_features=None if variant == "conv3d-flat" else DEFAULT_FEATURES,
            **_VARIANT_DEFAULTS[variant],
        )
        values.update(overrides)
        spec = cls(**values)
        spec.validate()
        return spec

    @property
    def supervised_taps(self):
        """Number of hourglasses whose output is a supervised prediction."""
        return 1 if self.variant == "vrn-guided" else self.hourglass_count

    @property
    def resolved_levels(self):
        return self.levels if self.levels is not None else default_levels(self.volume_dims)

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        want = INPUT_CHANNELS[self.variant]
        if self.input_channels != want:
            raise ConfigurationError(
                f"variant {self.variant} takes {want} input channels, spec says {self.input_channels}")
        if not 1 <= self.hourglass_count <= 4:
            raise ConfigurationError(f"hourglass count must be in [1, 4], got {self.hourglass_count}")
        if self.residuals_per_location < 1:
            raise ConfigurationError("residuals per location must be positive")
        if len(self.volume_dims) != 3 or any(int(d) <= 0 for d in self.volume_dims):
            raise ConfigurationError(f"bad volume dims {self.volume_dims}")
        w, h, d = self.volume_dims
        step = 2 ** self.resolved_levels
        if w % step or h % step:
            raise ConfigurationError(
                f"volume {w}x{h} not divisible by 2^{self.resolved_levels} hourglass levels")
        expected_kind = "flat-volumetric" if self.variant == "conv3d-flat" else None
        if expected_kind and self.block_kind != expected_kind:
            raise ConfigurationError("conv3d-flat networks use flat-volumetric blocks")
        if self.variant != "conv3d-flat" and self.block_kind == "flat-volumetric":
            raise ConfigurationError(f"variant {self.variant} is a 2-D network; flat-volumetric blocks need conv3d-flat")
        if self.variant == "conv3d-flat" and d % CONV3D_DEPTH_FACTOR:
            raise ConfigurationError(f"conv3d-flat needs depth divisible by {CONV3D_DEPTH_FACTOR}, got {d}")
        if self.base_features is not None:
            f = self.base_features
            if f < 1:
                raise ConfigurationError("base features must be positive")
            if self.block_kind == "multiscale" and f % 4:
                raise ConfigurationError(f"multiscale blocks need features divisible by 4, got {f}")
            if self.block_kind == "bottleneck" and f % 2:
                raise ConfigurationError(f"bottleneck blocks need an even feature count, got {f}")
        elif self.variant != "conv3d-flat":
            raise ConfigurationError("only conv3d-flat may leave base_features unset (flop-matched)")

    def replace(self, **changes):
        spec = replace(self, **changes)
        spec.validate()
        return spec

    def to_config(self):
        values = asdict(self)
        values["volume_dims"] = format_dims(self.volume_dims)
        values["base_features"] = "auto" if self.base_features is None else self.base_features
        values["levels"] = "auto" if self.levels is None else self.levels
        values["batchnorm"] = "true" if self.batchnorm else "false"
        return format_config(values)

    @classmethod
    def from_config(cls, text, path=None):
        raw = parse_config(text, path)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigurationError(f"unknown network config keys: {', '.join(unknown)}")
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw):
        if "variant" not in raw:
            raise ConfigurationError("network config needs a variant")
        overrides = {}
        for key, value in raw.items():
            if key == "variant":
                continue
            if key == "volume_dims":
                overrides[key] = parse_dims(value)
            elif key == "batchnorm":
                overrides[key] = parse_bool(value)
            elif key in ("base_features", "levels"):
                overrides[key] = None if str(value) == "auto" else int(value)
            elif key in ("variant", "block_kind"):
                overrides[key] = str(value)
            else:
                overrides[key] = int(value)
        return cls.for_variant(raw["variant"], **overrides)


class Network(Module):
    """Stacked hourglass regressor with one output head per supervised hourglass."""

    def __init__(self, spec):
        super().__init__()
        if spec.base_features is None:
            from .flops import flop_matched_spec

            spec = flop_matched_spec(spec)
        spec.validate()
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self.volumetric = spec.variant == "conv3d-flat"
        if self.volumetric:
            self._build_volumetric(spec, rng)
        else:
            self._build_planar(spec, rng)

    # -- construction

    def _build_planar(self, spec, rng):
        f = spec.base_features
        depth = spec.volume_dims[2]
        bn = spec.batchnorm
        make = block_factory(spec.block_kind, f, rng, bn)
        self.stem = Conv2d(spec.input_channels, f, 3, rng)
        self.stem_norm = norm_layer(f, bn)
        self.stem_block = make()
        n = spec.hourglass_count
        taps = spec.supervised_taps
        hourglasses, posts, lins, lin_norms, heads, remap_f, remap_p = [], [], [], [], [], [], []
        for i in range(n):
            supervised = i >= n - taps
            hourglasses.append(Hourglass(spec.resolved_levels, spec.residuals_per_location, make))
            posts.append(make())
            lins.append(Conv2d(f, f, 1, rng))
            lin_norms.append(norm_layer(f, bn))
            heads.append(Conv2d(f, depth, 1, rng, std=HEAD_INIT_STD) if supervised else Identity())
            last = i == n - 1
            remap_f.append(Identity() if last else Conv2d(f, f, 1, rng))
            remap_p.append(Conv2d(depth, f, 1, rng) if supervised and not last else Identity())
        self.hourglasses = hourglasses
        self.posts = posts
        self.lins = lins
        self.lin_norms = lin_norms
        self.heads = heads
        self.remap_features = remap_f
        self.remap_predictions = remap_p

    def _build_volumetric(self, spec, rng):
        f = spec.base_features
        depth = spec.volume_dims[2]
        self.trunk_depth = depth // CONV3D_DEPTH_FACTOR
        bn = spec.batchnorm
        make = block_factory("flat-volumetric", f, rng, bn)
        self.stem = Conv2d(spec.input_channels, f * self.trunk_depth, 3, rng)
        self.stem_norm = norm_layer(f * self.trunk_depth, bn)
        self.stem_block = make()
        n = spec.hourglass_count
        hourglasses, posts, lins, lin_norms, heads, remap_f = [], [], [], [], [], []
        stages = int(round(math.log2(CONV3D_DEPTH_FACTOR)))
        for i in range(n):
            hourglasses.append(Hourglass(spec.resolved_levels, spec.residuals_per_location, make))
            posts.append(make())
            lins.append(Conv3dFlat(f, f, (1, 1, 1), rng))
            lin_norms.append(norm_layer(f, bn))
            heads.append(DepthDecoder(f, stages, rng))
            remap_f.append(Identity() if i == n - 1 else Conv3dFlat(f, f, (1, 1, 1), rng))
        self.hourglasses = hourglasses
        self.posts = posts
        self.lins = lins
        self.lin_norms = lin_norms
        self.heads = heads
        self.remap_features = remap_f

    # -- evaluation

    @property
    def tap_count(self):
        return self.spec.supervised_taps

    def forward(self, x):
        """Return a list of occupancy probability tensors, one per supervised tap."""
        unbatched = x.ndim == 3
        if unbatched:
            x = ops.reshape(x, (1, *x.shape))
        if x.ndim != 4:
            raise UsageError(f"network input must be C,H,W or N,C,H,W, got shape {x.shape}")
        w, h, d = self.spec.volume_dims
        if x.shape[1] != self.spec.input_channels:
            raise UsageError(
                f"{self.spec.variant} expects {self.spec.input_channels} input channels, got {x.shape[1]}")
        if x.shape[2:] != (h, w):
            raise UsageError(f"input spatial size {x.shape[2:]} does not match volume {h}x{w}")
        n = x.shape[0]

        feat = ops.relu(self.stem_norm(self.stem(x)))
        if self.volumetric:
            feat = ops.reshape(feat, (n, self.spec.base_features, self.trunk_depth, h, w))
        feat = self.stem_block(feat)
        outputs = []
        count = self.spec.hourglass_count
        for i in range(count):
            y = self.posts[i](self.hourglasses[i](feat))
            y = ops.relu(self.lin_norms[i](self.lins[i](y)))
            head = self.heads[i]
            logits = None if isinstance(head, Identity) else head(y)
            if logits is not None:
                outputs.append(ops.sigmoid(logits))
            if i < count - 1:
                feat = ops.add(feat, self.remap_features[i](y))
                if not self.volumetric and logits is not None:
                    feat = ops.add(feat, self.remap_predictions[i](logits))
        if unbatched:
            outputs = [ops.reshape(o, o.shape[1:]) for o in outputs]
        return outputs

    def predict(self, x):
        """Eval-mode forward without recording; returns numpy arrays."""
        was_training = self.training
        self.eval()
        try:
            if not isinstance(x, Tensor):
                x = Tensor(np.asarray(x, np.float32))
            return [o.data for o in self.forward(x)]
        finally:
            self.train(was_training)


class DepthDecoder(Module):
    """Grows a lifted ``f, D/8, H, W`` volume to ``D, H, W`` logits.

    Each stage doubles depth by nearest upsampling followed by a depth-axis
    flat convolution; a final 1x1x1 convolution maps features to a logit.
    """

    def __init__(self, features, stages, rng):
        super().__init__()
        self.stages = [Conv3dFlat(features, features, (3, 1, 1), rng) for _ in range(stages)]
        self.out = Conv3dFlat(features, 1, (1, 1, 1), rng, std=HEAD_INIT_STD)

    def forward(self, x):
        for conv in self.stages:
            x = ops.relu(conv(ops.upsample_nearest2(x, axes=(2,))))
        logits = self.out(x)
        n, _, d, h, w = logits.shape
        return ops.reshape(logits, (n, d, h, w))


def build_network(spec):
    """Instantiate the network described by ``spec`` (deterministic in ``spec.seed``)."""
    if isinstance(spec, str):
        spec = NetworkSpec.for_variant(spec)
    return Network(spec)


def zero_final_convs(network):
    """Zero the last convolution of every residual block (identity blocks)."""
    for block in _walk(network):
        if hasattr(block, "zero_final"):
            block.zero_final()


def _walk(module):
    yield module
    for _, child in module.children():
        yield from _walk(child)


__all__ = [
    "BatchNorm", "DepthDecoder", "Network", "NetworkSpec", "VARIANTS", "INPUT_CHANNELS",
    "build_network", "default_levels", "zero_final_convs",
]
