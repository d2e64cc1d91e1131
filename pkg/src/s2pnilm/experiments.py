"""Fitting helpers and the seq2point-versus-seq2seq midpoint comparison.

These glue the data, windowing and training modules together on
:class:`~s2pnilm.data.AlignedPair` inputs, so the same code serves the CLI
and the acceptance suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AlignedPair, ApplianceProfile, mains_stats
from .errors import ConfigurationError
from .nn import LayerSpec, ModelParameters, NetworkConfig, build_network, small_trunk
from .synth import DEFAULT_START, SECONDS_PER_DAY, Scene, default_scene, gen_mains
from .training import TrainReport, predict_batches, train
from .windowing import WindowBatch, make_point_windows, make_seq_windows

TEST_SEED_OFFSET = 1_000_000


def synthetic_split(seed: int = 0, train_days: float = 7.0, test_days: float = 1.0,
                    interval: float = 6.0) -> tuple[Scene, Scene]:
    """Training scene and an independently drawn test scene that follows it in time."""
    train_scene = gen_mains(default_scene(train_days, seed=seed, interval=interval))
    test_start = DEFAULT_START + int(round(train_days * SECONDS_PER_DAY))
    test_scene = gen_mains(default_scene(test_days, seed=seed + TEST_SEED_OFFSET, interval=interval,
                                         start=test_start))
    return train_scene, test_scene


def scene_pair(scene: Scene, appliance: str) -> AlignedPair:
    if appliance not in scene.truths:
        raise ConfigurationError(f"scene has no appliance {appliance!r}")
    return AlignedPair(scene.mains, scene.truths[appliance])


def training_windows(pair: AlignedPair, profile: ApplianceProfile, scheme: str,
                     mains_mean: float, mains_std: float, stride: int = 1) -> WindowBatch:
    """Windows for one scheme; ``stride`` keeps every stride-th window."""
    if scheme == "point":
        windows = make_point_windows(pair, profile, mains_mean, mains_std)
        return windows if stride == 1 else windows.take(np.arange(0, len(windows), stride))
    if scheme == "seq":
        return make_seq_windows(pair, profile, mains_mean, mains_std, stride=stride)
    raise ConfigurationError(f"scheme must be 'point' or 'seq', got {scheme!r}")


def model_metadata(profile: ApplianceProfile, mains_mean: float, mains_std: float) -> dict:
    return {"profile": profile.to_dict(), "mains_mean": mains_mean, "mains_std": mains_std}


def fit_model(pair: AlignedPair, profile: ApplianceProfile, scheme: str = "point",
              trunk: tuple[LayerSpec, ...] | None = None, seed: int = 0, epochs: int = 10,
              batch_size: int = 64, stride: int = 1, patience: int | None = 5,
              learning_rate: float = 1e-3) -> tuple[ModelParameters, TrainReport]:
    """Train one appliance model; the last 10% of windows (in time) validate."""
    mm, ms = mains_stats(pair.mains)
    windows = training_windows(pair, profile, scheme, mm, ms, stride)
    trn, val = windows.split(0.1)
    config = NetworkConfig(profile.window_length, trunk or small_trunk(), scheme, seed)
    return train(config, trn, val, epochs=epochs, batch_size=batch_size, patience=patience,
                 learning_rate=learning_rate, metadata=model_metadata(profile, mm, ms))


def midpoint_predictions(model: ModelParameters, windows: np.ndarray) -> np.ndarray:
    """Standardised prediction for each window's midpoint sample, for either head."""
    out = predict_batches(model, windows)
    return out[:, 0] if model.config.head == "point" else out[:, model.config.window_length // 2]


@dataclass
class ComparisonResult:
    seed: int
    point_mse: float
    seq_mse: float
    trunk_checksum: str
    point_report: TrainReport
    seq_report: TrainReport
    point_model: ModelParameters
    seq_model: ModelParameters

    @property
    def point_wins(self) -> bool:
        return self.point_mse <= self.seq_mse

    def row(self) -> dict:
        return {"seed": self.seed, "point_mse": self.point_mse, "seq_mse": self.seq_mse,
                "point_wins": self.point_wins, "trunk_checksum": self.trunk_checksum}


def compare_schemes(train_pair: AlignedPair, test_pair: AlignedPair, profile: ApplianceProfile,
                    trunk: tuple[LayerSpec, ...] | None = None, seed: int = 0, epochs: int = 5,
                    batch_size: int = 64, stride: int = 5, patience: int | None = 5) -> ComparisonResult:
    """Train both heads from one trunk initialisation and score their midpoints.

    Both schemes see the same unpadded input windows (starts ``0, stride,
    ...``); the score is the held-out mean squared error of the midpoint
    output over every window of the test pair, in standardised units.
    """
    trunk = trunk or small_trunk()
    mm, ms = mains_stats(train_pair.mains)
    seq_windows = make_seq_windows(train_pair, profile, mm, ms, stride=stride)
    point_windows = make_point_windows(train_pair, profile, mm, ms).take(seq_windows.indices)
    W = profile.window_length
    inits = {head: build_network(NetworkConfig(W, trunk, head, seed)) for head in ("point", "seq")}
    checksum = inits["point"].trunk_checksum()
    if inits["seq"].trunk_checksum() != checksum:
        raise ConfigurationError("point and seq networks did not start from the same trunk")
    meta = model_metadata(profile, mm, ms)
    fitted = {}
    for head, windows in (("point", point_windows), ("seq", seq_windows)):
        trn, val = windows.split(0.1)
        fitted[head] = train(inits[head].config, trn, val, epochs=epochs, batch_size=batch_size,
                             patience=patience, params=inits[head], metadata=meta)
    test = make_seq_windows(test_pair, profile, mm, ms)
    truth_mid = test.targets[:, W // 2]
    mse = {h: float(np.mean((midpoint_predictions(fitted[h][0], test.inputs) - truth_mid) ** 2))
           for h in fitted}
    return ComparisonResult(seed, mse["point"], mse["seq"], checksum, fitted["point"][1], fitted["seq"][1],
                            fitted["point"][0], fitted["seq"][0])
