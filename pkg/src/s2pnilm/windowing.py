"""Cut aligned mains/appliance data into training and inference windows.

seq2point: the mains is zero-padded by ``W // 2`` readings at each end so
that every original sample is the midpoint of exactly one window, giving T
windows for T samples. seq2seq: only the ``T - W + 1`` unpadded windows.

Window arrays are strided views of the standardised series; nothing is
copied until a batch is taken.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import AlignedPair, ApplianceProfile, standardize
from .errors import ConfigurationError, WindowingError


@dataclass(frozen=True)
class WindowBatch:
    """Stacked windows.

    ``inputs`` is ``(B, W)`` standardised mains; ``targets`` is ``(B, 1)``
    (seq2point midpoints) or ``(B, W)`` (seq2seq windows); ``indices`` holds
    the midpoint position of each row in the original series.
    """

    inputs: np.ndarray
    targets: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 2 or len(self.inputs) < 1:
            raise WindowingError("a WindowBatch needs at least one (W,) window")
        if len(self.targets) != len(self.inputs) or len(self.indices) != len(self.inputs):
            raise WindowingError("inputs, targets and indices must have the same number of rows")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def window_length(self) -> int:
        return self.inputs.shape[1]

    def take(self, rows) -> "WindowBatch":
        rows = np.asarray(rows)
        return WindowBatch(self.inputs[rows], self.targets[rows], self.indices[rows])

    def split(self, fraction: float = 0.1) -> tuple["WindowBatch", "WindowBatch"]:
        """Temporal split: the last ``fraction`` of rows become the second part."""
        n_val = max(1, int(round(len(self) * fraction)))
        if n_val >= len(self):
            raise WindowingError(f"cannot hold out {n_val} of {len(self)} windows")
        cut = len(self) - n_val
        head = WindowBatch(self.inputs[:cut], self.targets[:cut], self.indices[:cut])
        tail = WindowBatch(self.inputs[cut:], self.targets[cut:], self.indices[cut:])
        return head, tail


def _check_odd(window_length: int) -> None:
    if window_length < 1 or window_length % 2 == 0:
        raise ConfigurationError(f"window length must be odd, got {window_length}")


def pad_series(values, window_length: int, fill: float = 0.0) -> np.ndarray:
    """Pad ``window_length // 2`` copies of ``fill`` on both ends."""
    _check_odd(window_length)
    half = window_length // 2
    return np.pad(np.asarray(values, dtype=np.float64), half, constant_values=fill)


def _checked(pair: AlignedPair):
    if pair.mains.has_gaps or pair.appliance.has_gaps:
        raise WindowingError("unresolved missing readings; align_resample the channels first")
    return pair.mains.values, pair.appliance.values


def point_inputs(mains: np.ndarray, window_length: int, mains_mean: float, mains_std: float) -> np.ndarray:
    """All T padded seq2point input windows of a raw mains array, standardised."""
    padded = pad_series(mains, window_length)  # pads with 0 W
    return sliding_window_view(standardize(padded, mains_mean, mains_std), window_length)


def seq_inputs(mains: np.ndarray, window_length: int, mains_mean: float, mains_std: float,
               stride: int = 1) -> np.ndarray:
    if len(mains) < window_length:
        raise WindowingError(f"series of length {len(mains)} is shorter than the window {window_length}")
    return sliding_window_view(standardize(mains, mains_mean, mains_std), window_length)[::stride]


def make_point_windows(pair: AlignedPair, profile: ApplianceProfile,
                       mains_mean: float, mains_std: float) -> WindowBatch:
    """One window per sample; row i has midpoint i and target ``appliance[i]``."""
    mains, appliance = _checked(pair)
    W = profile.window_length
    inputs = point_inputs(mains, W, mains_mean, mains_std)
    targets = standardize(appliance, profile.mean, profile.std)[:, None]
    return WindowBatch(inputs, targets, np.arange(len(mains)))


def make_seq_windows(pair: AlignedPair, profile: ApplianceProfile, mains_mean: float, mains_std: float,
                     stride: int = 1) -> WindowBatch:
    """Unpadded window pairs starting at ``0, stride, 2*stride, ...``."""
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    mains, appliance = _checked(pair)
    W = profile.window_length
    if len(mains) < W:
        raise WindowingError(f"series of length {len(mains)} is shorter than the window {W}")
    inputs = seq_inputs(mains, W, mains_mean, mains_std, stride)
    targets = sliding_window_view(standardize(appliance, profile.mean, profile.std), W)[::stride]
    starts = np.arange(0, len(mains) - W + 1, stride)
    return WindowBatch(inputs, targets, starts + W // 2)


def shuffle_batches(windows: WindowBatch, batch_size: int, seed) -> Iterator[WindowBatch]:
    """One epoch of minibatches in a seeded random order; the last batch may be short.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if batch_size < 1:
        raise ConfigurationError("batch size must be >= 1")
    order = np.random.default_rng(seed).permutation(len(windows))
    for lo in range(0, len(order), batch_size):
        yield windows.take(order[lo : lo + batch_size])
