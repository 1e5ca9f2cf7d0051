"""Parameter update rules: plain gradient descent and bias-corrected Adam.

Updates are applied in place; the learned initial state tensors ride along
with the weights, one moment slot per tensor in declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Gradients, Parameters


def sgd_step(params: Parameters, grads: Gradients, lr: float) -> Parameters:
    """w <- w - lr * grad for every scalar."""
    for (_, w), (_, g) in zip(params.tensors(), grads.tensors()):
        w -= lr * g
    return params


@dataclass
class AdamState:
    m: Parameters
    v: Parameters
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 0.001

    @classmethod
    def init(cls, params: Parameters, lr: float = 0.001, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        for name, val in (("beta1", beta1), ("beta2", beta2), ("eps", eps)):
            if val <= 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if lr < 0:
            raise ValueError(f"lr must be >= 0, got {lr}")
        return cls(m=params.zeros_like(), v=params.zeros_like(),
                   beta1=beta1, beta2=beta2, eps=eps, lr=lr)


def adam_step(params: Parameters, grads: Gradients,
              state: AdamState) -> tuple[Parameters, AdamState]:
    """One bias-corrected Adam update; increments the step counter."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for (_, w), (_, g), (_, m), (_, v) in zip(
            params.tensors(), grads.tensors(), state.m.tensors(), state.v.tensors()):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        w -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
