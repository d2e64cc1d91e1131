"""Adaptive-moment (Adam) optimizer over a dict of named numpy parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: OptimizerState) -> None:
    """Apply one bias-corrected Adam update in place and advance ``state.step``.

    p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    """
    for name, g in grads.items():
        if name not in arrays or arrays[name].shape != g.shape:
            raise ConfigurationError(f"gradient {name!r} does not match any parameter shape")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        arrays[name] -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
