"""Sequence-to-point and sequence-to-sequence neural energy disaggregation.

The subpackages follow the pipeline: :mod:`data` (channels, alignment,
profiles), :mod:`windowing`, :mod:`nn`/:mod:`ops`/:mod:`optim` (the numerical
engine), :mod:`training`, :mod:`checkpoint`, :mod:`inference` (prediction and
MAE/SAE), :mod:`synth` (synthetic scenes), :mod:`introspect` (feature maps
and perturbations) and :mod:`cli`.
"""
from .data import AlignedPair, ApplianceProfile, TimeSeries, align_resample, load_channel, load_profiles
from .errors import S2PError
from .inference import evaluate, mae, predict_point, predict_seq_overlap, sae
from .nn import LayerSpec, ModelParameters, NetworkConfig, build_network
from .training import TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "AlignedPair", "ApplianceProfile", "TimeSeries", "align_resample", "load_channel", "load_profiles",
    "S2PError", "evaluate", "mae", "predict_point", "predict_seq_overlap", "sae",
    "LayerSpec", "ModelParameters", "NetworkConfig", "build_network", "TrainReport", "train",
]
