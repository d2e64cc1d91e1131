"""Minibatch training with Adam and early stopping on validation loss."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, TrainingError
from .losses import half_mse
from .nn import ModelParameters, NetworkConfig, backprop_gradients, build_network, forward
from .optim import OptimizerState, optimizer_step
from .windowing import WindowBatch, shuffle_batches

log = logging.getLogger(__name__)

EVAL_CHUNK = 4096


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    initial_val_loss: float = math.nan
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_epoch": self.best_epoch,
            "initial_val_loss": self.initial_val_loss,
            "wall_time": self.wall_time,
        }


def predict_batches(params: ModelParameters, inputs: np.ndarray, chunk: int = EVAL_CHUNK) -> np.ndarray:
    """Head outputs for many windows, evaluated in fixed-size chunks."""
    outs = [forward(params, inputs[lo : lo + chunk]) for lo in range(0, len(inputs), chunk)]
    return np.concatenate(outs, axis=0)


def evaluate_loss(params: ModelParameters, windows: WindowBatch) -> float:
    pred = predict_batches(params, windows.inputs)
    return half_mse(pred, windows.targets)


def train(config: NetworkConfig, train_windows: WindowBatch, val_windows: WindowBatch | None = None,
          epochs: int = 50, batch_size: int = 512, patience: int | None = 5,
          learning_rate: float = 1e-3, params: ModelParameters | None = None,
          metadata: dict | None = None) -> tuple[ModelParameters, TrainReport]:
    """Fit ``config`` on the windows and return the best-validation parameters.

    Without ``val_windows`` the last 10% of ``train_windows`` are held out.
    ``params`` resumes from existing weights instead of a fresh build.
    Deterministic for a fixed ``config.seed``.
    """
    if epochs < 1:
        raise ConfigurationError("epochs must be >= 1")
    if len(train_windows) == 0:
        raise ConfigurationError("no training windows")
    if val_windows is None:
        train_windows, val_windows = train_windows.split(0.1)
    width = config.output_width
    for name, w in (("training", train_windows), ("validation", val_windows)):
        if w.window_length != config.window_length or w.targets.shape[1] != width:
            raise ConfigurationError(
                f"{name} windows ({w.window_length}, targets {w.targets.shape[1]}) do not match "
                f"the {config.head} network (W={config.window_length}, output {width})"
            )

    params = build_network(config) if params is None else params.copy()
    if metadata:
        params.metadata.update(metadata)
    state = OptimizerState(learning_rate=learning_rate)
    report = TrainReport()
    t0 = time.perf_counter()
    report.initial_val_loss = evaluate_loss(params, val_windows)
    best = params.copy()
    best_loss = report.initial_val_loss
    stale = 0
    for epoch in range(epochs):
        total, seen = 0.0, 0
        epoch_seed = np.random.SeedSequence([config.seed, epoch])
        for b, batch in enumerate(shuffle_batches(train_windows, batch_size, epoch_seed)):
            try:
                value, grads = backprop_gradients(params, batch)
            except NumericError as exc:
                raise TrainingError(f"diverged at epoch {epoch} batch {b}: {exc}") from exc
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}")
            optimizer_step(params.arrays, grads, state)
            total += value * len(batch)
            seen += len(batch)
        try:
            val = evaluate_loss(params, val_windows)
        except NumericError as exc:
            raise TrainingError(f"diverged at epoch {epoch} (validation): {exc}") from exc
        report.train_loss.append(total / seen)
        report.val_loss.append(val)
        params.metadata["epochs_seen"] = params.metadata.get("epochs_seen", 0) + 1
        log.info("epoch %d: train %.6g val %.6g", epoch, total / seen, val)
        if val < best_loss or report.best_epoch < 0:
            best_loss, report.best_epoch, stale = val, epoch, 0
            best = params.copy()
        else:
            stale += 1
            if patience is not None and stale >= patience:
                break
    report.wall_time = time.perf_counter() - t0
    return best, report
