"""Adam with decoupled weight decay, operating in place on Tensor params."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 2e-4
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_adam(params: list[Tensor], lr: float = 2e-4,
              weight_decay: float = 5e-4) -> AdamState:
    return AdamState(
        lr=lr,
        weight_decay=weight_decay,
        m=[np.zeros_like(p.data) for p in params],
        v=[np.zeros_like(p.data) for p in params],
    )


def adam_step(params: list[Tensor], grads: list[np.ndarray] | None,
              state: AdamState) -> tuple[list[Tensor], AdamState]:
    """One optimizer step, in place on params. grads=None reads p.grad
    (and clears it); params whose grad is None are only decayed."""
    if grads is None:
        grads = [p.grad for p in params]
        for p in params:
            p.grad = None
    if len(grads) != len(params):
        raise ValueError("params/grads length mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        # decoupled decay: shrink the weight directly, not through the moments
        if state.weight_decay:
            p.data -= state.lr * state.weight_decay * p.data
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.data.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
