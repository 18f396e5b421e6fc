"""RMSProp, the optimizer used for every network in the ablation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    learning_rate: float = 1e-4
    decay: float = 0.99
    epsilon: float = 1e-8
    accumulators: dict = field(default_factory=dict)

    def set_learning_rate(self, lr):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.learning_rate = float(lr)


def rmsprop_step(params, grads, state):
    """Apply one RMSProp update in place.

    ``params`` maps names to tensors and ``grads`` maps the same names to
    arrays (missing or ``None`` gradients are treated as zero).
    """
    rho = state.decay
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        acc = state.accumulators.get(name)
        if acc is None:
            acc = np.zeros_like(p.data)
            state.accumulators[name] = acc
        acc *= rho
        acc += (1 - rho) * np.square(g, dtype=acc.dtype)
        p.data -= (state.learning_rate * g / (np.sqrt(acc) + state.epsilon)).astype(p.data.dtype)
    return params, state
