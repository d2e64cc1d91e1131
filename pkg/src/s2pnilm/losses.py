"""Training objectives for the two learning schemes.

Both heads assume a Gaussian output with unit variance, so the negative
log-likelihood reduces (up to an additive constant) to half the squared
error. Losses are averaged over every output element rather than summed,
which keeps magnitudes comparable across window lengths.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

LOSS_KINDS = ("point", "seq")


def _check(pred, target, kind):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"{kind} loss: prediction shape {pred.shape} != target shape {target.shape}")
    if pred.ndim != 2 or pred.shape[0] == 0:
        raise ConfigurationError(f"{kind} loss expects a non-empty (batch, width) array, got {pred.shape}")
    return pred, target


def half_mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(0.5 * np.mean((pred - target) ** 2))


def loss_point(pred, target) -> float:
    """Mean over the batch of ``0.5 * (pred - target)**2`` for ``(B, 1)`` arrays."""
    pred, target = _check(pred, target, "point")
    if pred.shape[1] != 1:
        raise ConfigurationError(f"point loss expects (B, 1) arrays, got {pred.shape}")
    return half_mse(pred, target)


def loss_seq(pred, target) -> float:
    """Mean over batch and window positions of ``0.5 * (pred - target)**2``."""
    pred, target = _check(pred, target, "seq")
    return half_mse(pred, target)


def loss_and_grad(kind: str, pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to ``pred``."""
    if kind == "point":
        value = loss_point(pred, target)
    elif kind == "seq":
        value = loss_seq(pred, target)
    else:
        raise ConfigurationError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    diff = np.asarray(pred, dtype=np.float64) - target
    return value, diff / diff.size
