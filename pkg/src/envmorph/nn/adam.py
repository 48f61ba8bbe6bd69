"""Adam optimizer with bias correction, updating parameters in place."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument


@dataclass
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgument("betas must lie in [0, 1)")


class AdamState:
    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0


def adam_step(params, grads, state: AdamState, cfg: AdamConfig, lr: float | None = None):
    """One Adam update. `lr` overrides cfg.learning_rate (for schedules)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidArgument("params/grads/state length mismatch")
    lr = cfg.learning_rate if lr is None else lr
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidArgument(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= (lr / bc1) * m / (np.sqrt(v / bc2) + cfg.eps)
