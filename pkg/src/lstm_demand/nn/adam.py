from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = BETA1, beta2: float = BETA2, eps: float = EPS):
    """One bias-corrected Adam update; returns new (params, state) without mutating inputs."""
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m[name] = beta1 * state.m.get(name, 0.0) + (1.0 - beta1) * g
        v[name] = beta2 * state.v.get(name, 0.0) + (1.0 - beta2) * g * g
        m_hat = m[name] / c1
        v_hat = v[name] / c2
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(t, m, v)
