"""Dense numerical primitives: 1-D convolution, fully connected maps, ReLU.

Arrays are float64 numpy arrays. The public single-example API uses
``(channels, length)`` signals; the batched network internals use the
channels-last layout ``(batch, length, channels)`` so that the im2col
product lands in the output layout without a transpose.

Each forward has a matching ``*_backward`` that takes the upstream gradient
and returns gradients for the input and the parameters.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, NumericError

DTYPE = np.float64


def same_padding(width: int) -> tuple[int, int]:
    """Left/right zero padding that keeps the output length equal to the input.

    Even widths put the extra zero on the left.
    """
    if width < 1:
        raise ConfigurationError(f"filter width must be >= 1, got {width}")
    return width // 2, (width - 1) // 2


def check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


def _as_batched_conv(x, kernels):
    x = np.asarray(x, dtype=DTYPE)
    kernels = np.asarray(kernels, dtype=DTYPE)
    squeeze = None
    if x.ndim == 1:
        x = x[None, None, :]
        squeeze = "single"
    elif x.ndim == 2:
        x = x[None]
        squeeze = "batch"
    elif x.ndim != 3:
        raise ConfigurationError(f"conv1d input must be 1-D, 2-D or 3-D, got shape {x.shape}")
    if kernels.ndim == 2:
        kernels = kernels[:, None, :]
    if kernels.ndim != 3:
        raise ConfigurationError(f"kernels must be (filters, width) or (filters, channels, width), got {kernels.shape}")
    return x, kernels, squeeze


def conv1d_forward(x, kernels, bias) -> np.ndarray:
    """Stride-1 'same' cross-correlation.

    ``out[f, i] = bias[f] + sum_{c,k} kernels[f, c, k] * xpad[c, i + k]``
    where ``xpad`` is ``x`` zero-padded by :func:`same_padding`.

    Shapes: ``x`` is ``(len,)``, ``(channels, len)`` or ``(batch, channels, len)``;
    ``kernels`` is ``(filters, width)`` (single input channel) or
    ``(filters, channels, width)``. The output is ``(filters, len)``, with a
    leading batch axis when the input had one.
    """
    x3, k3, squeeze = _as_batched_conv(x, kernels)
    bias = np.asarray(bias, dtype=DTYPE)
    out, _ = conv_forward_nlc(np.ascontiguousarray(x3.transpose(0, 2, 1)), k3, bias)
    out = out.transpose(0, 2, 1)
    if squeeze is not None:
        out = out[0]
    return out


def _kernel_matrix(kernels: np.ndarray) -> np.ndarray:
    # (F, C, K) -> (K*C, F), matching the (k, c) column order of the im2col cache
    nf, nc, width = kernels.shape
    return kernels.transpose(2, 1, 0).reshape(width * nc, nf)


def conv_forward_nlc(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray):
    """Batched convolution on channels-last input ``(B, L, C)``.

    Returns ``(out, cols)``: the ``(B, L, F)`` output and the im2col matrix
    ``(B, L, K*C)`` kept for the backward pass.
    """
    nb, length, nc = x.shape
    nf, kc, width = kernels.shape
    if kc != nc:
        raise ConfigurationError(f"kernels expect {kc} input channels, input has {nc}")
    if bias.shape != (nf,):
        raise ConfigurationError(f"bias shape {bias.shape} does not match {nf} filters")
    if width > length:
        raise ConfigurationError(f"filter width {width} exceeds input length {length}")
    left, right = same_padding(width)
    xpad = np.zeros((nb, length + left + right, nc), dtype=DTYPE)
    xpad[:, left : left + length] = x
    cols = np.empty((nb, length, width * nc), dtype=DTYPE)
    for k in range(width):
        cols[:, :, k * nc : (k + 1) * nc] = xpad[:, k : k + length]
    out = (cols.reshape(nb * length, width * nc) @ _kernel_matrix(kernels)).reshape(nb, length, nf)
    out += bias
    return out, cols


def conv_backward_nlc(grad_out: np.ndarray, cols: np.ndarray, kernels: np.ndarray, input_grad: bool = True):
    """Gradients of :func:`conv_forward_nlc`.

    ``grad_out`` is ``(B, L, F)``. Returns ``(grad_x, grad_kernels, grad_bias)``
    with ``grad_x`` in the channels-last input layout, or None when
    ``input_grad`` is false.
    """
    nb, length, nf = grad_out.shape
    _, nc, width = kernels.shape
    g2 = grad_out.reshape(nb * length, nf)
    gmat = cols.reshape(nb * length, width * nc).T @ g2  # (K*C, F)
    grad_k = gmat.reshape(width, nc, nf).transpose(2, 1, 0)
    grad_b = g2.sum(axis=0)
    if not input_grad:
        return None, grad_k, grad_b
    dcols = (g2 @ _kernel_matrix(kernels).T).reshape(nb, length, width * nc)
    left, right = same_padding(width)
    gpad = np.zeros((nb, length + left + right, nc), dtype=DTYPE)
    for k in range(width):
        gpad[:, k : k + length] += dcols[:, :, k * nc : (k + 1) * nc]
    return gpad[:, left : left + length], grad_k, grad_b


def dense_forward(x, weights, bias) -> np.ndarray:
    """``weights @ x + bias`` for a vector, or row-wise for a ``(batch, n)`` matrix."""
    x = np.asarray(x, dtype=DTYPE)
    weights = np.asarray(weights, dtype=DTYPE)
    bias = np.asarray(bias, dtype=DTYPE)
    if weights.ndim != 2:
        raise ConfigurationError(f"weights must be 2-D, got shape {weights.shape}")
    m, n = weights.shape
    if x.shape[-1] != n or x.ndim not in (1, 2):
        raise ConfigurationError(f"input shape {x.shape} does not conform to weights {weights.shape}")
    if bias.shape != (m,):
        raise ConfigurationError(f"bias shape {bias.shape} does not match output width {m}")
    return x @ weights.T + bias


def dense_backward(grad_out: np.ndarray, x: np.ndarray, weights: np.ndarray):
    """Returns ``(grad_x, grad_weights, grad_bias)`` for a batched dense layer."""
    return grad_out @ weights, grad_out.T @ x, grad_out.sum(axis=0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, grad_out, 0.0)
