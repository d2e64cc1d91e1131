"""Synthetic appliance signatures and mains built from the additive load model.

mains_t = sum_i x_it + u_t + eps_t, clamped at 0 W, where x_i are appliance
activations, u is an unknown background load and eps is Gaussian noise.
Appliance truth series are never noisy and never clamped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import TimeSeries, save_channel
from .errors import ConfigurationError, GenerationError, PerturbationError

SECONDS_PER_DAY = 86400
DEFAULT_START = 1_356_998_400  # 2013-01-01T00:00:00Z, a day boundary
SHAPES = ("rectangular", "two-level")


@dataclass(frozen=True)
class SyntheticApplianceSpec:
    """Activation statistics for one appliance.

    Power and duration are drawn uniformly from ``mean +/- jitter``. With
    ``period`` set, activations repeat every ``period`` samples from a random
    phase instead of arriving at ``rate_per_day``. A two-level activation
    drops to ``second_level * power`` for its second half.
    """

    name: str
    on_power: float
    on_duration: float
    power_jitter: float = 0.0
    duration_jitter: float = 0.0
    rate_per_day: float = 0.0
    shape: str = "rectangular"
    period: int | None = None
    second_level: float = 0.5
    min_gap: int = 1

    def __post_init__(self):
        if self.on_power <= 0 or self.on_power - self.power_jitter <= 0:
            raise ConfigurationError(f"{self.name}: on-power must stay > 0")
        if self.on_duration - self.duration_jitter < 1:
            raise ConfigurationError(f"{self.name}: durations must be >= 1 sample")
        if self.rate_per_day < 0:
            raise ConfigurationError(f"{self.name}: negative activation rate")
        if self.shape not in SHAPES:
            raise ConfigurationError(f"{self.name}: unknown shape {self.shape!r}")
        if self.min_gap < 1:
            raise ConfigurationError(f"{self.name}: min_gap must be >= 1")
        if self.period is not None and self.period < 2:
            raise ConfigurationError(f"{self.name}: period must be >= 2 samples")


@dataclass(frozen=True)
class UnknownLoadSpec:
    """Reflected Gaussian random walk confined to ``[low, high]`` Watts."""

    low: float = 50.0
    high: float = 300.0
    step_std: float = 3.0


@dataclass(frozen=True)
class SyntheticScene:
    appliances: tuple[SyntheticApplianceSpec, ...]
    length: int
    unknown: UnknownLoadSpec | None = field(default_factory=UnknownLoadSpec)
    noise_std: float = 10.0
    interval: float = 6.0
    start: float = DEFAULT_START
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigurationError("noise std must be >= 0")
        if self.length < 1:
            raise ConfigurationError("scene length must be >= 1")
        names = [a.name for a in self.appliances]
        if len(set(names)) != len(names):
            raise ConfigurationError("appliance names must be unique")


class Scene(NamedTuple):
    mains: TimeSeries
    truths: dict[str, TimeSeries]
    unknown: TimeSeries


def kettle_like() -> SyntheticApplianceSpec:
    return SyntheticApplianceSpec("kettle", on_power=2500.0, power_jitter=250.0, on_duration=30.0,
                                  duration_jitter=10.0, rate_per_day=20.0)


def fridge_like() -> SyntheticApplianceSpec:
    return SyntheticApplianceSpec("fridge", on_power=120.0, power_jitter=10.0, on_duration=200.0,
                                  duration_jitter=20.0, period=400)


def default_scene(days: float = 7.0, seed: int = 0, interval: float = 6.0,
                  start: float = DEFAULT_START) -> SyntheticScene:
    """Kettle-like and fridge-like appliances over a random-walk background."""
    length = int(round(days * SECONDS_PER_DAY / interval))
    return SyntheticScene((kettle_like(), fridge_like()), length=length, interval=interval,
                          start=start, seed=seed)


def _draw(rng, mean, jitter, n):
    if jitter == 0:
        return np.full(n, float(mean))
    return rng.uniform(mean - jitter, mean + jitter, size=n)


def _render(values, start, duration, power, spec):
    values[start : start + duration] = power
    if spec.shape == "two-level" and duration >= 2:
        values[start + (duration + 1) // 2 : start + duration] = power * spec.second_level


def gen_appliance(spec: SyntheticApplianceSpec, length: int, seed, interval: float = 6.0,
                  start: float = DEFAULT_START, n_activations: int | None = None) -> TimeSeries:
    """Non-overlapping activations of one appliance.

    The activation count is Poisson with mean ``rate_per_day * days`` unless
    ``n_activations`` forces it. Start positions are uniform over all
    placements that keep at least ``min_gap`` OFF samples between activations.
    """
    rng = np.random.default_rng(seed)
    values = np.zeros(length)
    if spec.period is not None and n_activations is None:
        phase = int(rng.integers(0, spec.period))
        starts = np.arange(phase - spec.period, length, spec.period)
        n = len(starts)
        durations = np.maximum(1, np.rint(_draw(rng, spec.on_duration, spec.duration_jitter, n))).astype(int)
        durations = np.minimum(durations, spec.period - spec.min_gap)
        powers = _draw(rng, spec.on_power, spec.power_jitter, n)
        for s, d, p in zip(starts, durations, powers):
            lo, hi = max(s, 0), min(s + d, length)
            if hi > lo:
                seg = np.zeros(d)
                _render(seg, 0, d, p, spec)
                values[lo:hi] = seg[lo - s : hi - s]
        return TimeSeries(start, interval, values)

    if n_activations is None:
        expected = spec.rate_per_day * length * interval / SECONDS_PER_DAY
        n = int(rng.poisson(expected))
    else:
        n = int(n_activations)
    if n == 0:
        return TimeSeries(start, interval, values)
    durations = np.maximum(1, np.rint(_draw(rng, spec.on_duration, spec.duration_jitter, n))).astype(int)
    powers = _draw(rng, spec.on_power, spec.power_jitter, n)
    slack = length - int(durations.sum()) - (n - 1) * spec.min_gap
    if slack < 0:
        raise GenerationError(
            f"{spec.name}: {n} activations ({durations.sum()} samples ON) do not fit in {length} samples"
        )
    offsets = np.sort(rng.integers(0, slack + 1, size=n))
    starts = offsets + np.concatenate([[0], np.cumsum(durations)[:-1]]) + np.arange(n) * spec.min_gap
    for s, d, p in zip(starts, durations, powers):
        _render(values, s, d, p, spec)
    return TimeSeries(start, interval, values)


def gen_unknown(spec: UnknownLoadSpec, length: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    span = spec.high - spec.low
    walk = rng.uniform(0, span) + np.cumsum(rng.normal(0.0, spec.step_std, size=length))
    folded = np.mod(walk, 2 * span)
    return spec.low + span - np.abs(folded - span)


def gen_mains(scene: SyntheticScene) -> Scene:
    """Sum the appliances, the unknown load and the noise into a mains series."""
    seeds = np.random.SeedSequence(scene.seed).spawn(len(scene.appliances) + 2)
    truths = {
        spec.name: gen_appliance(spec, scene.length, seeds[i], scene.interval, scene.start)
        for i, spec in enumerate(scene.appliances)
    }
    total = np.zeros(scene.length)
    for series in truths.values():
        total = total + series.values
    if scene.unknown is not None:
        unknown = gen_unknown(scene.unknown, scene.length, seeds[-2])
        total = total + unknown
    else:
        unknown = np.zeros(scene.length)
    if scene.noise_std > 0:
        total = total + np.random.default_rng(seeds[-1]).normal(0.0, scene.noise_std, size=scene.length)
    mains = np.maximum(total, 0.0)
    return Scene(TimeSeries(scene.start, scene.interval, mains), truths,
                 TimeSeries(scene.start, scene.interval, unknown))


def write_scene(scene: Scene, directory) -> dict[str, Path]:
    """Write ``mains.csv`` and one ``<appliance>.csv`` per truth series."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"mains": directory / "mains.csv"}
    save_channel(scene.mains, paths["mains"])
    for name, series in scene.truths.items():
        paths[name] = directory / f"{name}.csv"
        save_channel(series, paths[name])
    return paths


def find_activations(values, threshold: float = 0.0) -> list[tuple[int, int]]:
    """Half-open ``(start, stop)`` runs where ``values > threshold``."""
    on = np.concatenate([[False], np.asarray(values) > threshold, [False]])
    edges = np.flatnonzero(np.diff(on.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def perturb_window(window, truth, kind: str, factor: float = 1.0) -> np.ndarray:
    """Edit the appliance's contribution inside a raw mains window.

    ``remove``: subtract the truth. ``scale``: add ``(factor - 1) * truth``.
    ``stretch``: replace the activation nearest the window midpoint by one
    ``factor`` times as long, starting at the same sample with the same
    power profile (truncated at the window edge).
    """
    window = np.asarray(window, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if window.shape != truth.shape or window.ndim != 1:
        raise PerturbationError("window and truth must be 1-D arrays of equal length")
    runs = find_activations(truth)
    if not runs:
        raise PerturbationError("no appliance activation inside the window")
    if kind == "remove":
        return window - truth
    if kind == "scale":
        if factor < 0:
            raise PerturbationError("scale factor must be >= 0")
        return window + (factor - 1.0) * truth
    if kind == "stretch":
        if factor <= 0:
            raise PerturbationError("stretch factor must be > 0")
        mid = len(window) // 2
        s, e = min(runs, key=lambda r: 0 if r[0] <= mid < r[1] else min(abs(r[0] - mid), abs(r[1] - 1 - mid)))
        d = e - s
        new_d = max(1, int(round(d * factor)))
        old = np.zeros_like(truth)
        old[s:e] = truth[s:e]
        new = np.zeros_like(truth)
        src = s + np.minimum((np.arange(new_d) * d) // new_d, d - 1)
        hi = min(s + new_d, len(truth))
        new[s:hi] = truth[src[: hi - s]]
        return window + (new - old)
    raise PerturbationError(f"unknown perturbation {kind!r}")
