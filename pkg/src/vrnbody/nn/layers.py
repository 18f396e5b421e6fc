"""Parameter containers and the basic parameterized layers."""

from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor


class Module:
    """Minimal parameter container.

    Attributes holding trainable tensors, child modules or lists of child
    modules are registered automatically, in assignment order, which fixes
    the parameter naming and initialization order.
    """

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
            self._children[name] = list(value)
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def children(self):
        for name, child in self._children.items():
            if isinstance(child, list):
                for i, c in enumerate(child):
                    yield f"{name}.{i}", c
            else:
                yield name, child

    def named_parameters(self, prefix=""):
        out = {}
        for name, p in self._params.items():
            out[prefix + name] = p
        for name, child in self.children():
            out.update(child.named_parameters(prefix + name + "."))
        return out

    def named_buffers(self, prefix=""):
        out = {}
        for name in self._buffers:
            out[prefix + name] = getattr(self, name)
        for name, child in self.children():
            out.update(child.named_buffers(prefix + name + "."))
        return out

    def parameter_count(self):
        return sum(p.data.size for p in self.named_parameters().values())

    def state_dict(self):
        state = {k: p.data for k, p in self.named_parameters().items()}
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state, strict=True):
        params = self.named_parameters()
        buffers = self.named_buffers()
        missing = [k for k in list(params) + list(buffers) if k not in state]
        if strict and missing:
            raise KeyError(f"state is missing entries: {missing[:5]}")
        for k, p in params.items():
            if k in state:
                p.data[...] = np.asarray(state[k]).reshape(p.data.shape)
        for k, buf in buffers.items():
            if k in state:
                buf[...] = np.asarray(state[k]).reshape(buf.shape)

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.zero_grad()

    def train(self, mode=True):
        object.__setattr__(self, "training", mode)
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def to_dtype(self, dtype):
        """Cast parameters and buffers in place (float64 for gradient checks)."""
        for p in self.named_parameters().values():
            p.data = p.data.astype(dtype)
            p.grad = None
        self._cast_buffers(dtype)
        return self

    def _cast_buffers(self, dtype):
        for name in list(self._buffers):
            self.register_buffer(name, getattr(self, name).astype(dtype))
        for _, child in self.children():
            child._cast_buffers(dtype)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def kaiming(rng, shape, fan_in):
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(np.float32)


def init_weight(rng, shape, fan_in, std=None):
    if std is None:
        return kaiming(rng, shape, fan_in)
    return (rng.standard_normal(shape) * std).astype(np.float32)


class Conv2d(Module):
    """2-D convolution with same padding; ``std`` overrides the Kaiming scale."""

    def __init__(self, c_in, c_out, k, rng, pad=None, stride=1, std=None):
        super().__init__()
        self.pad = (k - 1) // 2 if pad is None else pad
        self.stride = stride
        self.weight = Tensor(init_weight(rng, (c_out, c_in, k, k), c_in * k * k, std), requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, np.float32), requires_grad=True)

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.pad)

    def zero_(self):
        self.weight.data[...] = 0
        self.bias.data[...] = 0


class Conv3dFlat(Module):
    def __init__(self, c_in, c_out, kernel, rng, std=None):
        super().__init__()
        ops.flat_kernel_axis(kernel)
        fan_in = c_in * int(np.prod(kernel))
        self.weight = Tensor(init_weight(rng, (c_out, c_in, *kernel), fan_in, std), requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, np.float32), requires_grad=True)

    def forward(self, x):
        return ops.conv3d_flat(x, self.weight, self.bias)

    def zero_(self):
        self.weight.data[...] = 0
        self.bias.data[...] = 0


class BatchNorm(Module):
    """Batch normalization over every axis but the channel axis (axis 1)."""

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(channels, np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, np.float32), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(channels, np.float32))
        self.register_buffer("running_var", np.ones(channels, np.float32))

    def forward(self, x):
        return ops.batchnorm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                             self.training, self.momentum, self.eps, channel_axis=1)


class Identity(Module):
    def forward(self, x):
        return x


def norm_layer(channels, enabled):
    return BatchNorm(channels) if enabled else Identity()


def run_sequence(modules, x):
    for m in modules:
        x = m(x)
    return x
