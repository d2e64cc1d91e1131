"""Feature-map extraction and the window-perturbation study.

Feature maps are the post-activation outputs of one conv layer for a single
window. Grids are exported as text (header ``filters positions`` then the
row-major values) and as 8-bit binary PGM images, min-max scaled per grid.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import TimeSeries, standardize
from .errors import ConfigurationError, PerturbationError
from .inference import model_profile
from .nn import ModelParameters, forward
from .synth import Scene, find_activations, perturb_window

CASES = ("original", "remove", "scale2", "scale0.5", "stretch2", "no_activation_midpoint")


@dataclass
class FeatureMapGrid:
    layer: int
    grid: np.ndarray  # (filters, positions)
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def conv_layer_indices(model: ModelParameters) -> list[int]:
    return [i for i, s in enumerate(model.config.layers()) if s.kind == "conv1d"]


def feature_maps(model: ModelParameters, window, layer: int | None = None,
                 provenance: dict | None = None) -> FeatureMapGrid:
    """Activations of conv layer ``layer`` (default: the last one) for one standardised window.

    If a ReLU directly follows the conv layer its output is returned.
    """
    layers = model.config.layers()
    convs = conv_layer_indices(model)
    if layer is None:
        if not convs:
            raise ConfigurationError("the network has no conv layers")
        layer = convs[-1]
    if layer not in convs:
        raise ConfigurationError(f"layer {layer} is not a conv layer (conv layers: {convs})")
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.config.window_length,):
        raise ConfigurationError(f"window must have length {model.config.window_length}, got {window.shape}")
    pick = layer + 1 if layer + 1 < len(layers) and layers[layer + 1].kind == "relu" else layer
    _, outputs, _ = forward(model, window[None], record=True, stop_after=pick)
    grid = outputs[pick][0].T.copy()  # (L, F) -> (F, L)
    return FeatureMapGrid(layer, grid, dict(provenance or {}))


def write_grid_text(grid: np.ndarray, path) -> None:
    grid = np.asarray(grid, dtype=np.float64)
    rows = [f"{grid.shape[0]} {grid.shape[1]}"]
    rows += [" ".join(f"{v:.17g}" for v in row) for row in grid]
    Path(path).write_text("\n".join(rows) + "\n")


def read_grid_text(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing grid header")
    n_rows, n_cols = int(tokens[0]), int(tokens[1])
    values = np.array([float(t) for t in tokens[2:]])
    if values.size != n_rows * n_cols:
        raise ValueError(f"{path}: expected {n_rows * n_cols} values, found {values.size}")
    return values.reshape(n_rows, n_cols)


def grid_to_gray(grid: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..255; a constant grid maps to mid-gray."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = float(grid.min()), float(grid.max())
    if hi == lo:
        return np.full(grid.shape, 128, dtype=np.uint8)
    return np.rint((grid - lo) / (hi - lo) * 255).astype(np.uint8)


def write_pgm(grid: np.ndarray, path) -> None:
    pixels = grid_to_gray(grid)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.find(b"\n", pos) + 1 or len(data)
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    raster = data[pos + 1 : pos + 1 + width * height]  # exactly one whitespace byte ends the header
    if len(raster) != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def export_heatmap(grid: FeatureMapGrid | np.ndarray, path) -> tuple[Path, Path]:
    """Write ``<path>.txt`` and ``<path>.pgm``; returns both paths."""
    arr = grid.grid if isinstance(grid, FeatureMapGrid) else grid
    stem = Path(path)
    if stem.suffix in (".txt", ".pgm"):
        stem = stem.with_suffix("")
    txt, pgm = stem.with_name(stem.name + ".txt"), stem.with_name(stem.name + ".pgm")
    write_grid_text(arr, txt)
    write_pgm(arr, pgm)
    return txt, pgm


@dataclass
class CaseResult:
    case: str
    midpoint: int
    prediction: float
    grid: FeatureMapGrid
    mains: np.ndarray


@dataclass
class PerturbationReport:
    appliance: str
    on_threshold: float
    windows: list[dict[str, CaseResult]] = field(default_factory=list)

    def predictions(self, case: str) -> np.ndarray:
        return np.array([w[case].prediction for w in self.windows])

    def fraction_below_threshold(self, case: str) -> float:
        return float(np.mean(self.predictions(case) < self.on_threshold))

    def summary(self) -> dict:
        return {
            "appliance": self.appliance,
            "on_threshold": self.on_threshold,
            "windows": len(self.windows),
            "fraction_below_threshold": {c: self.fraction_below_threshold(c) for c in CASES},
            "mean_prediction": {c: float(self.predictions(c).mean()) for c in CASES},
        }


def activation_windows(truth: np.ndarray, window_length: int, n: int | None, seed: int = 0) -> list[tuple[int, int]]:
    """Pick up to ``n`` activations whose centred window lies inside the series.

    The choice is a seeded sample without replacement, returned in time order.
    """
    half = window_length // 2
    runs = [(s, e) for s, e in find_activations(truth)
            if (s + e - 1) // 2 - half >= 0 and (s + e - 1) // 2 + half < len(truth)]
    if n is not None and len(runs) > n:
        rows = np.sort(np.random.default_rng(seed).choice(len(runs), size=n, replace=False))
        runs = [runs[i] for i in rows]
    return runs


def _off_activation_centre(truth: np.ndarray, run: tuple[int, int], half: int) -> int | None:
    """A centre whose window still holds the activation but whose midpoint is OFF."""
    s, e = run
    shift = max(1, (half - (e - s)) // 2)
    for c in (e - 1 + shift, s - shift, e, s - 1):
        if c - half >= 0 and c + half < len(truth) and truth[c] == 0 and c - half <= s and e - 1 <= c + half:
            return c
    return None


def perturbation_experiment(model: ModelParameters, scene: Scene, appliance: str | None = None,
                            n_windows: int | None = 100, seed: int = 0,
                            selector: Callable[[np.ndarray, int], Sequence[tuple[int, int]]] | None = None,
                            layer: int | None = None) -> PerturbationReport:
    """Run every case of the perturbation study on activation-centred windows.

    Cases: the original window, the activation removed, its power doubled
    and halved, its duration doubled, and a window whose midpoint falls
    outside the activation. Each case yields the midpoint prediction (W)
    and the feature-map grid of ``layer``.
    """
    if model.config.head != "point":
        raise ConfigurationError("the perturbation study needs a point-head model")
    profile = model_profile(model)
    name = appliance or profile.name
    if name not in scene.truths:
        raise ConfigurationError(f"scene has no appliance {name!r}")
    W = model.config.window_length
    half = W // 2
    mains = scene.mains.values
    truth = scene.truths[name].values
    mm, ms = float(model.metadata["mains_mean"]), float(model.metadata["mains_std"])
    runs = selector(truth, W) if selector is not None else activation_windows(truth, W, n_windows, seed)
    if not runs:
        raise PerturbationError(f"no {name} activation fits a centred window")
    report = PerturbationReport(name, profile.on_threshold)

    def case(label, centre, window):
        z = standardize(window, mm, ms)
        grid = feature_maps(model, z, layer, {"appliance": name, "midpoint": centre, "case": label})
        zp = forward(model, z[None])[0, 0]
        watts = float(np.clip(zp * profile.std + profile.mean, 0.0, profile.max_power))
        return CaseResult(label, centre, watts, grid, window)

    for s, e in runs:
        c = (s + e - 1) // 2
        win = mains[c - half : c + half + 1].copy()
        tw = truth[c - half : c + half + 1]
        cases = {
            "original": case("original", c, win),
            "remove": case("remove", c, perturb_window(win, tw, "remove")),
            "scale2": case("scale2", c, perturb_window(win, tw, "scale", 2.0)),
            "scale0.5": case("scale0.5", c, perturb_window(win, tw, "scale", 0.5)),
            "stretch2": case("stretch2", c, perturb_window(win, tw, "stretch", 2.0)),
        }
        c_off = _off_activation_centre(truth, (s, e), half)
        if c_off is None:
            c_off = c
        cases["no_activation_midpoint"] = case(
            "no_activation_midpoint", c_off, mains[c_off - half : c_off + half + 1].copy()
        )
        report.windows.append(cases)
    return report


def write_perturbation_report(report: PerturbationReport, directory, grids: bool = True) -> Path:
    """Write ``perturbation.json``, ``perturbation.csv`` and optionally every grid."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "perturbation.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    with (directory / "perturbation.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "case", "midpoint", "prediction_watts"])
        for i, cases in enumerate(report.windows):
            for label in CASES:
                r = cases[label]
                w.writerow([i, label, r.midpoint, f"{r.prediction:.17g}"])
    if grids:
        gdir = directory / "grids"
        gdir.mkdir(exist_ok=True)
        for i, cases in enumerate(report.windows):
            for label in CASES:
                export_heatmap(cases[label].grid, gdir / f"w{i:03d}_{label}")
    return directory
