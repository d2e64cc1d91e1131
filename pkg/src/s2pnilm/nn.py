"""The convolutional trunk, its two output heads, and reverse-mode gradients.

A network is a flat chain of layers described by :class:`LayerSpec`. The
trunk (conv1d / relu / dense layers) is shared by both learning schemes; the
head is a single linear layer whose width is 1 for seq2point and the window
length for seq2seq. Conv activations are kept channels-last ``(B, L, C)``
and flattened position-major before the first dense layer.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import ops
from .errors import ConfigurationError, NumericError
from .losses import loss_and_grad

LAYER_KINDS = ("conv1d", "dense", "relu", "output-linear")
HEADS = ("point", "seq")
DEFAULT_LOSS = "gaussian-nll-unit-variance"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int | None = None
    width: int | None = None
    units: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv1d":
            if not self.filters or self.filters < 1:
                raise ConfigurationError("conv1d needs filters >= 1")
            if not self.width or self.width < 1:
                raise ConfigurationError("conv1d needs width >= 1")
        if self.kind == "dense" and (not self.units or self.units < 1):
            raise ConfigurationError("dense needs units >= 1")

    @classmethod
    def conv(cls, filters: int, width: int) -> "LayerSpec":
        return cls("conv1d", filters=filters, width=width)

    @classmethod
    def dense(cls, units: int) -> "LayerSpec":
        return cls("dense", units=units)

    @classmethod
    def relu(cls) -> "LayerSpec":
        return cls("relu")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def default_trunk() -> tuple[LayerSpec, ...]:
    """Five conv layers (30, 30, 40, 50, 50 filters) and a 1024-unit dense layer, ReLU after each."""
    layers: list[LayerSpec] = []
    for filters, width in [(30, 10), (30, 8), (40, 6), (50, 5), (50, 5)]:
        layers += [LayerSpec.conv(filters, width), LayerSpec.relu()]
    layers += [LayerSpec.dense(1024), LayerSpec.relu()]
    return tuple(layers)


def small_trunk() -> tuple[LayerSpec, ...]:
    """A desk-scale trunk used by the synthetic experiments and the CLI default."""
    return (
        LayerSpec.conv(8, 9), LayerSpec.relu(),
        LayerSpec.conv(8, 7), LayerSpec.relu(),
        LayerSpec.conv(8, 5), LayerSpec.relu(),
        LayerSpec.dense(32), LayerSpec.relu(),
    )


@dataclass(frozen=True)
class NetworkConfig:
    window_length: int
    trunk: tuple[LayerSpec, ...] = field(default_factory=default_trunk)
    head: str = "point"
    seed: int = 0
    loss: str = DEFAULT_LOSS

    def __post_init__(self):
        object.__setattr__(self, "trunk", tuple(
            s if isinstance(s, LayerSpec) else LayerSpec(**s) for s in self.trunk
        ))
        if self.window_length < 1:
            raise ConfigurationError("window_length must be >= 1")
        if self.head not in HEADS:
            raise ConfigurationError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.loss != DEFAULT_LOSS:
            raise ConfigurationError(f"unsupported loss {self.loss!r}")
        if any(s.kind == "output-linear" for s in self.trunk):
            raise ConfigurationError("the output layer is added by the head; do not list it in the trunk")

    @property
    def output_width(self) -> int:
        return 1 if self.head == "point" else self.window_length

    def with_head(self, head: str) -> "NetworkConfig":
        return NetworkConfig(self.window_length, self.trunk, head, self.seed, self.loss)

    def layers(self) -> tuple[LayerSpec, ...]:
        return self.trunk + (LayerSpec("output-linear", units=self.output_width),)

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "trunk": [s.to_dict() for s in self.trunk],
            "head": self.head,
            "seed": self.seed,
            "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        trunk = d.get("trunk")
        return cls(
            window_length=int(d["window_length"]),
            trunk=default_trunk() if trunk is None else tuple(LayerSpec(**s) for s in trunk),
            head=d.get("head", "point"),
            seed=int(d.get("seed", 0)),
            loss=d.get("loss", DEFAULT_LOSS),
        )

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).digest()


@dataclass
class ModelParameters:
    """Ordered parameter arrays plus training metadata.

    ``metadata`` holds JSON-serialisable values: ``epochs_seen``,
    ``mains_mean``/``mains_std`` and the appliance ``profile`` dict.
    """

    config: NetworkConfig
    arrays: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            self.config,
            {k: v.copy() for k, v in self.arrays.items()},
            json.loads(json.dumps(self.metadata)),
        )

    def count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def trunk_names(self) -> list[str]:
        head = f"layer{len(self.config.trunk)}."
        return [k for k in self.arrays if not k.startswith(head)]

    def checksum(self, names=None) -> str:
        h = hashlib.sha256()
        for name in names if names is not None else self.arrays:
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.arrays[name], dtype="<f8").tobytes())
        return h.hexdigest()

    def trunk_checksum(self) -> str:
        return self.checksum(self.trunk_names())


def _plan(config: NetworkConfig):
    """Walk the layer chain and return per-layer (spec, input shape, param shapes)."""
    channels, length = 1, config.window_length
    flat: int | None = None
    plan = []
    for i, spec in enumerate(config.layers()):
        shapes: dict[str, tuple[int, ...]] = {}
        in_shape = (channels, length) if flat is None else (flat,)
        if spec.kind == "conv1d":
            if flat is not None:
                raise ConfigurationError(f"layer {i}: conv1d cannot follow a dense layer")
            if spec.width > length:
                raise ConfigurationError(f"layer {i}: filter width {spec.width} exceeds window length {length}")
            shapes = {"kernel": (spec.filters, channels, spec.width), "bias": (spec.filters,)}
            channels = spec.filters
        elif spec.kind in ("dense", "output-linear"):
            n_in = channels * length if flat is None else flat
            shapes = {"weight": (spec.units, n_in), "bias": (spec.units,)}
            flat = spec.units
        plan.append((spec, in_shape, shapes))
    return plan


def build_network(config: NetworkConfig) -> ModelParameters:
    """Seeded Glorot-uniform weights, zero biases.

    The head is initialised last, so two configs that differ only in head
    share bit-identical trunk parameters.
    """
    rng = np.random.default_rng(config.seed)
    arrays: dict[str, np.ndarray] = {}
    for i, (spec, in_shape, shapes) in enumerate(_plan(config)):
        if not shapes:
            continue
        wname = "kernel" if spec.kind == "conv1d" else "weight"
        wshape = shapes[wname]
        if spec.kind == "conv1d":
            fan_in, fan_out = wshape[1] * wshape[2], wshape[0] * wshape[2]
        else:
            fan_out, fan_in = wshape
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        arrays[f"layer{i}.{wname}"] = rng.uniform(-limit, limit, size=wshape)
        arrays[f"layer{i}.bias"] = np.zeros(shapes["bias"])
    return ModelParameters(config, arrays, {"epochs_seen": 0})


def parameter_count(config: NetworkConfig) -> int:
    return sum(math.prod(s) for _, _, shapes in _plan(config) for s in shapes.values())


def _layer_label(i: int, spec: LayerSpec) -> str:
    return f"layer {i} ({spec.kind})"


def forward(params: ModelParameters, inputs: np.ndarray, record: bool = False, stop_after: int | None = None):
    """Run the network on a ``(B, W)`` batch of standardised windows.

    Returns the ``(B, out)`` head output, and with ``record=True`` also the
    list of per-layer outputs and the cache needed by :func:`backward`.
    ``stop_after`` ends the pass after that layer index (recorded outputs
    only; the returned activation is then that layer's output).
    """
    x = np.asarray(inputs, dtype=ops.DTYPE)
    if x.ndim == 1:
        x = x[None]
    config = params.config
    if x.ndim != 2 or x.shape[1] != config.window_length:
        raise ConfigurationError(f"expected (batch, {config.window_length}) inputs, got {x.shape}")
    h = x[:, :, None]
    outputs, cache = [], []
    for i, (spec, _, _) in enumerate(_plan(config)):
        if spec.kind == "conv1d":
            k = params.arrays[f"layer{i}.kernel"]
            b = params.arrays[f"layer{i}.bias"]
            h, cols = ops.conv_forward_nlc(h, k, b)
            cache.append(cols)
        elif spec.kind == "relu":
            cache.append(h)
            h = ops.relu(h)
        else:
            if h.ndim == 3:
                h = h.reshape(h.shape[0], -1)
            cache.append(h)
            h = ops.dense_forward(h, params.arrays[f"layer{i}.weight"], params.arrays[f"layer{i}.bias"])
        if not np.all(np.isfinite(h)):
            raise NumericError(f"non-finite activations at {_layer_label(i, spec)}")
        if record:
            outputs.append(h)
        if stop_after is not None and i >= stop_after:
            break
    if record:
        return h, outputs, cache
    return h


def backward(params: ModelParameters, cache, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    g = grad_out
    plan = _plan(params.config)
    for i in range(len(plan) - 1, -1, -1):
        spec, in_shape, _ = plan[i]
        c = cache[i]
        if spec.kind == "conv1d":
            k = params.arrays[f"layer{i}.kernel"]
            if g.ndim == 2:
                g = g.reshape(g.shape[0], -1, spec.filters)
            g, gk, gb = ops.conv_backward_nlc(g, c, k, input_grad=i > 0)
            grads[f"layer{i}.kernel"] = gk
            grads[f"layer{i}.bias"] = gb
        elif spec.kind == "relu":
            if g.shape != c.shape:
                g = g.reshape(c.shape)
            g = ops.relu_backward(g, c)
        else:
            g, gw, gb = ops.dense_backward(g, c, params.arrays[f"layer{i}.weight"])
            grads[f"layer{i}.weight"] = gw
            grads[f"layer{i}.bias"] = gb
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient at {_layer_label(i, spec)}")
    return {k: grads[k] for k in params.arrays}


def backprop_gradients(params: ModelParameters, batch, loss: str | None = None, loss_scale: float = 1.0):
    """Loss value and ``dL/dp`` for every parameter on one batch.

    ``batch`` is anything with ``inputs`` and ``targets`` arrays (normally a
    :class:`~s2pnilm.windowing.WindowBatch`). ``loss`` defaults to the
    config's head kind.
    """
    inputs = np.asarray(batch.inputs)
    if inputs.shape[0] == 0:
        raise ConfigurationError("empty batch")
    pred, _, cache = forward(params, inputs, record=True)
    targets = np.asarray(batch.targets, dtype=ops.DTYPE)
    value, g = loss_and_grad(loss or params.config.head, pred, targets)
    if not math.isfinite(value):
        raise NumericError(f"non-finite loss at {_layer_label(len(cache) - 1, params.config.layers()[-1])}")
    if loss_scale != 1.0:
        value *= loss_scale
        g = g * loss_scale
    return value, backward(params, cache, g)
