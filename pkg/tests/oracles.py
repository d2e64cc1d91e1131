"""Naive reference implementations used as test oracles.

Plain Python loops, deliberately independent of the vectorised code.
"""
import numpy as np


def conv1d_loops(x, kernels, bias):
    """Same-padded cross-correlation, one output at a time. x (C, L), kernels (F, C, K)."""
    C, L = x.shape
    F, _, K = kernels.shape
    left = K // 2
    out = np.zeros((F, L))
    for f in range(F):
        for i in range(L):
            acc = bias[f]
            for c in range(C):
                for k in range(K):
                    j = i + k - left
                    if 0 <= j < L:
                        acc += kernels[f, c, k] * x[c, j]
            out[f, i] = acc
    return out


def dense_loops(x, weights, bias):
    B, n = x.shape
    m = weights.shape[0]
    out = np.zeros((B, m))
    for b in range(B):
        for r in range(m):
            acc = bias[r]
            for j in range(n):
                acc += weights[r, j] * x[b, j]
            out[b, r] = acc
    return out


def overlap_loops(window_preds, length):
    n, W = window_preds.shape
    out = np.zeros(length)
    for t in range(length):
        vals = [window_preds[s, t - s] for s in range(n) if 0 <= t - s < W]
        out[t] = sum(vals) / len(vals)
    return out
