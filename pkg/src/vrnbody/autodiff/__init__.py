"""Minimal dense-tensor engine with reverse-mode gradients."""

from .checkpoint import load_checkpoint, save_checkpoint
from .ops import (
    add,
    add_all,
    batchnorm,
    concat_channels,
    conv2d,
    conv3d_flat,
    counting_flops,
    maxpool2,
    pointwise,
    relu,
    reshape,
    scale,
    sigmoid,
    sum_all,
    upsample_nearest2,
)
from .optim import OptimizerState, rmsprop_step
from .tensor import Tape, Tensor, backward, make_result

__all__ = [
    "Tape", "Tensor", "backward", "make_result",
    "add", "add_all", "batchnorm", "concat_channels", "conv2d", "conv3d_flat",
    "counting_flops", "maxpool2", "pointwise", "relu", "reshape", "scale",
    "sigmoid", "sum_all", "upsample_nearest2",
    "OptimizerState", "rmsprop_step", "load_checkpoint", "save_checkpoint",
]
