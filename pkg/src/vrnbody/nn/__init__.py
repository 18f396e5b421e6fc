"""Residual blocks, hourglasses and the network variant factory."""

from .blocks import (
    BottleneckResidual,
    FlatVolumetricResidual,
    Hourglass,
    MultiScaleResidual,
    block_factory,
)
from .flops import flop_count, flop_matched_spec
from .network import (
    INPUT_CHANNELS,
    VARIANTS,
    Network,
    NetworkSpec,
    build_network,
    zero_final_convs,
)

__all__ = [
    "BottleneckResidual", "FlatVolumetricResidual", "Hourglass", "MultiScaleResidual",
    "block_factory", "flop_count", "flop_matched_spec", "INPUT_CHANNELS", "VARIANTS",
    "Network", "NetworkSpec", "build_network", "zero_final_convs",
]
