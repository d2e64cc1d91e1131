"""Full-length disaggregation from trained models, and MAE/SAE scoring."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .data import AlignedPair, ApplianceProfile, TimeSeries, destandardize, save_channel
from .errors import ConfigurationError, InferenceError, UndefinedMetricError
from .nn import ModelParameters
from .synth import SECONDS_PER_DAY
from .training import predict_batches
from .windowing import point_inputs, seq_inputs


@dataclass(frozen=True)
class Prediction:
    appliance: str
    series: TimeSeries


@dataclass
class EvalReport:
    appliance: str
    mae: float
    sae: float | None
    per_day_sae: list[float] = field(default_factory=list)
    days: list[int] = field(default_factory=list)
    window_count: int = 0

    @property
    def mean_daily_sae(self) -> float | None:
        return float(np.mean(self.per_day_sae)) if self.per_day_sae else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_daily_sae"] = self.mean_daily_sae
        return d


def model_profile(model: ModelParameters) -> ApplianceProfile:
    try:
        return ApplianceProfile(**model.metadata["profile"])
    except KeyError:
        raise ConfigurationError("model has no appliance profile in its metadata") from None


def _mains_stats(model: ModelParameters) -> tuple[float, float]:
    try:
        return float(model.metadata["mains_mean"]), float(model.metadata["mains_std"])
    except KeyError:
        raise ConfigurationError("model has no mains normalisation statistics") from None


def _check_model(model: ModelParameters, head: str, mains: TimeSeries):
    if model.config.head != head:
        raise ConfigurationError(f"a {model.config.head}-head model cannot be used for {head} inference")
    if mains.has_gaps:
        raise InferenceError(f"mains has {int(mains.missing.sum())} missing readings; inference refuses gaps")
    profile = model_profile(model)
    if profile.window_length != model.config.window_length:
        raise ConfigurationError("profile window length differs from the network's")
    return profile


def _to_watts(z: np.ndarray, profile: ApplianceProfile) -> np.ndarray:
    return destandardize(z, profile.mean, profile.std, clip=(0.0, profile.max_power))


def predict_point(model: ModelParameters, mains: TimeSeries) -> Prediction:
    """One prediction per sample, from the window centred on it."""
    profile = _check_model(model, "point", mains)
    inputs = point_inputs(mains.values, profile.window_length, *_mains_stats(model))
    z = predict_batches(model, inputs)[:, 0]
    return Prediction(profile.name, mains.with_values(_to_watts(z, profile)))


def overlap_average(window_preds: np.ndarray, length: int) -> np.ndarray:
    """Average the predictions of all windows covering each position.

    ``window_preds[t]`` predicts positions ``t .. t + W - 1``. A running mean
    is used, so positions whose covering predictions agree get that exact
    value back.
    """
    window_preds = np.asarray(window_preds, dtype=np.float64)
    n, W = window_preds.shape
    if n != length - W + 1:
        raise InferenceError(f"{n} windows of width {W} cannot cover {length} positions")
    mean = np.zeros(length)
    count = np.zeros(length)
    for j in range(W):
        sl = slice(j, j + n)
        count[sl] += 1
        mean[sl] += (window_preds[:, j] - mean[sl]) / count[sl]
    return mean


def coverage_counts(length: int, window_length: int) -> np.ndarray:
    i = np.arange(length)
    return np.minimum.reduce([i + 1, np.full(length, window_length),
                              np.full(length, length - window_length + 1), length - i])


def predict_seq_overlap(model: ModelParameters, mains: TimeSeries) -> Prediction:
    profile = _check_model(model, "seq", mains)
    W = profile.window_length
    if len(mains) < W:
        raise InferenceError(f"series of length {len(mains)} is shorter than the window {W}")
    inputs = seq_inputs(mains.values, W, *_mains_stats(model))
    z = overlap_average(predict_batches(model, inputs), len(mains))
    return Prediction(profile.name, mains.with_values(_to_watts(z, profile)))


def predict(model: ModelParameters, mains: TimeSeries) -> Prediction:
    return predict_point(model, mains) if model.config.head == "point" else predict_seq_overlap(model, mains)


def _pair(pred, truth):
    pred = np.asarray(pred.values if isinstance(pred, TimeSeries) else pred, dtype=np.float64)
    truth = np.asarray(truth.values if isinstance(truth, TimeSeries) else truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ConfigurationError(f"length mismatch: prediction {pred.shape} vs truth {truth.shape}")
    return pred, truth


def mae(pred, truth) -> float:
    """Mean absolute error per time step (correctly rounded sum, then divided)."""
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        raise UndefinedMetricError("MAE of an empty series")
    return math.fsum(np.abs(pred - truth).tolist()) / pred.size


def sae(pred, truth) -> float:
    """``|sum(pred) - sum(truth)| / sum(truth)``."""
    pred, truth = _pair(pred, truth)
    r = math.fsum(truth.tolist())
    if not r > 0:
        raise UndefinedMetricError("SAE is undefined when the true energy is zero")
    return abs(math.fsum(pred.tolist()) - r) / r


def day_index(series: TimeSeries, utc_offset: float = 0.0) -> np.ndarray:
    """Calendar day number (days since the epoch) of each reading."""
    return np.floor((series.timestamps() + utc_offset) / SECONDS_PER_DAY).astype(np.int64)


def per_day_sae(pred, truth: TimeSeries, utc_offset: float = 0.0) -> tuple[list[int], list[float]]:
    """SAE for each calendar day on which the appliance used energy.

    Days with zero true energy have no defined SAE and are skipped.
    """
    p, t = _pair(pred, truth)
    days = day_index(truth, utc_offset)
    out_days, out = [], []
    for d in np.unique(days):
        sel = days == d
        if math.fsum(t[sel].tolist()) > 0:
            out_days.append(int(d))
            out.append(sae(p[sel], t[sel]))
    return out_days, out


def evaluate(model: ModelParameters | None, pair: AlignedPair, profile: ApplianceProfile | None = None,
             predictor: Callable[[TimeSeries], object] | None = None, utc_offset: float = 0.0) -> EvalReport:
    """Predict the appliance on ``pair.mains`` and score it against ``pair.appliance``.

    ``predictor`` replaces the model (it maps a mains TimeSeries to a
    Prediction, TimeSeries or array). If the true energy is zero an
    :class:`UndefinedMetricError` is raised whose ``report`` still has the MAE.
    """
    if predictor is None:
        if model is None:
            raise ConfigurationError("evaluate needs a model or a predictor")
        result = predict(model, pair.mains)
        name = result.appliance
        windows = len(pair) if model.config.head == "point" else len(pair) - model.config.window_length + 1
    else:
        result = predictor(pair.mains)
        name = profile.name if profile is not None else "appliance"
        windows = len(pair)
    pred = result.series if isinstance(result, Prediction) else result
    report = EvalReport(name, mae(pred, pair.appliance), None, window_count=windows)
    try:
        report.sae = sae(pred, pair.appliance)
    except UndefinedMetricError as exc:
        raise UndefinedMetricError(str(exc), report=report) from None
    report.days, report.per_day_sae = per_day_sae(pred, pair.appliance, utc_offset)
    return report


def write_report(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_trace(prediction: Prediction, path) -> None:
    """``epoch_seconds,watts`` per line."""
    save_channel(prediction.series, path)
