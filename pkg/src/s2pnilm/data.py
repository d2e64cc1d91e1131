"""Channel ingestion, grid alignment, appliance profiles and standardisation.

Channel files are plain text, one ``epoch_seconds<delim>watts`` reading per
line. Gaps in a channel are kept as explicit missing markers (a boolean mask
next to the values) and are resolved by :func:`align_resample`; NaN never
appears in a :class:`TimeSeries`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ConfigurationError, IngestionError

DEFAULT_GAP_LIMIT = 30.0  # seconds of forward fill before a gap is zeroed


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled power readings in Watts.

    ``values[i]`` is the reading at ``start + i * interval``. Where
    ``missing[i]`` is true the reading is absent and ``values[i]`` is 0.
    """

    start: float
    interval: float
    values: np.ndarray
    missing: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.interval <= 0:
            raise ConfigurationError(f"interval must be > 0, got {self.interval}")
        if values.ndim != 1 or len(values) < 1:
            raise ConfigurationError("a TimeSeries needs at least one reading")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("TimeSeries values must be finite; use the missing mask for gaps")
        if self.missing is not None:
            missing = np.array(self.missing, dtype=bool)
            if missing.shape != values.shape:
                raise ConfigurationError("missing mask must match values")
            if not missing.any():
                missing = None
            else:
                missing.setflags(write=False)
                if values[missing].any():
                    values = values.copy()
                    values[missing] = 0.0
                    values.setflags(write=False)
                    object.__setattr__(self, "values", values)
            object.__setattr__(self, "missing", missing)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> float:
        """Timestamp of the last reading."""
        return self.start + (len(self.values) - 1) * self.interval

    @property
    def has_gaps(self) -> bool:
        return self.missing is not None

    def timestamps(self) -> np.ndarray:
        return self.start + self.interval * np.arange(len(self.values))

    def slice(self, lo: int, hi: int) -> "TimeSeries":
        missing = None if self.missing is None else self.missing[lo:hi]
        return TimeSeries(self.start + lo * self.interval, self.interval, self.values[lo:hi], missing)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.start, self.interval, values)

    def same_grid(self, other: "TimeSeries") -> bool:
        return self.start == other.start and self.interval == other.interval and len(self) == len(other)


@dataclass(frozen=True)
class AlignedPair:
    mains: TimeSeries
    appliance: TimeSeries

    def __post_init__(self):
        if not self.mains.same_grid(self.appliance):
            raise AlignmentError("mains and appliance are not on the same grid")

    def __len__(self) -> int:
        return len(self.mains)

    def slice(self, lo: int, hi: int) -> "AlignedPair":
        return AlignedPair(self.mains.slice(lo, hi), self.appliance.slice(lo, hi))


@dataclass(frozen=True)
class FormatDescriptor:
    """How to read a channel file.

    ``interval`` is the nominal sampling period; when None it is inferred as
    the median spacing of the timestamps. ``negative`` is ``"reject"`` or
    ``"clamp"``.
    """

    delimiter: str | None = None  # None: comma or any whitespace
    time_column: int = 0
    value_column: int = 1
    interval: float | None = None
    negative: str = "reject"
    skip_header: bool = False


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.replace(",", " ").split()
    return [p.strip() for p in line.split(delimiter)]


def load_channel(path, fmt: FormatDescriptor | None = None) -> TimeSeries:
    """Read one channel file onto its nominal grid.

    Readings are snapped to the nearest grid slot; empty slots between two
    readings become missing markers. Blank lines and ``#`` comments are skipped.
    """
    fmt = fmt or FormatDescriptor()
    if fmt.negative not in ("reject", "clamp"):
        raise ConfigurationError(f"negative policy must be 'reject' or 'clamp', got {fmt.negative!r}")
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{path}: no such file")
    times: list[float] = []
    watts: list[float] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if fmt.skip_header and not times and lineno == 1:
                continue
            parts = _split(line, fmt.delimiter)
            try:
                t = float(parts[fmt.time_column])
                w = float(parts[fmt.value_column])
            except (IndexError, ValueError):
                raise IngestionError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if not (math.isfinite(t) and math.isfinite(w)):
                raise IngestionError(f"{path}:{lineno}: non-finite field in {line!r}")
            if w < 0:
                if fmt.negative == "reject":
                    raise IngestionError(f"{path}:{lineno}: negative power reading {w}")
                w = 0.0
            if times and t <= times[-1]:
                raise IngestionError(f"{path}:{lineno}: timestamp {t} is not after {times[-1]}")
            times.append(t)
            watts.append(w)
    if not times:
        raise IngestionError(f"{path}: no readings")

    t_arr = np.asarray(times)
    interval = fmt.interval
    if interval is None:
        if len(t_arr) < 2:
            raise IngestionError(f"{path}: cannot infer the interval from a single reading")
        interval = float(np.median(np.diff(t_arr)))
    if interval <= 0:
        raise IngestionError(f"{path}: interval must be positive")
    slots = np.rint((t_arr - t_arr[0]) / interval).astype(np.int64)
    if np.any(np.diff(slots) == 0):
        dup = int(np.flatnonzero(np.diff(slots) == 0)[0]) + 1
        raise IngestionError(f"{path}: reading at t={t_arr[dup]} falls in an already filled slot")
    values = np.zeros(slots[-1] + 1)
    missing = np.ones(slots[-1] + 1, dtype=bool)
    values[slots] = watts
    missing[slots] = False
    return TimeSeries(float(t_arr[0]), float(interval), values, missing)


def save_channel(series: TimeSeries, path, delimiter: str = ",") -> None:
    """Write a channel in the line format; missing slots are omitted."""
    ts = series.timestamps()
    keep = np.ones(len(series), dtype=bool) if series.missing is None else ~series.missing
    with Path(path).open("w") as fh:
        for t, w in zip(ts[keep], series.values[keep]):
            fh.write(f"{t:.17g}{delimiter}{w:.17g}\n")


def _gap_durations(missing: np.ndarray, interval: float) -> np.ndarray:
    """For each missing slot, the span in seconds between the readings around its gap."""
    padded = np.concatenate([[False], missing, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    out = np.zeros(len(missing))
    for lo, hi in zip(edges[::2], edges[1::2]):
        out[lo:hi] = (hi - lo + 1) * interval
    return out


def _sample_on_grid(series: TimeSeries, grid: np.ndarray, gap_limit: float):
    """Nearest-slot sampling with forward fill across short gaps.

    A gap is the span between the readings on either side of a run of
    missing slots. Returns (values, unresolved) where unresolved marks grid
    points inside a gap longer than ``gap_limit`` seconds.
    """
    idx = np.clip(np.rint((grid - series.start) / series.interval).astype(np.int64), 0, len(series) - 1)
    values = series.values[idx].copy()
    if series.missing is None:
        return values, np.zeros(len(grid), dtype=bool)
    present = ~series.missing
    # index of the most recent present reading at or before each slot
    last = np.maximum.accumulate(np.where(present, np.arange(len(series)), -1))[idx]
    short = _gap_durations(series.missing, series.interval)[idx] <= gap_limit
    fill = series.missing[idx] & short & (last >= 0)
    values[fill] = series.values[last[fill]]
    unresolved = series.missing[idx] & ~fill
    values[unresolved] = 0.0
    return values, unresolved


def align_resample(mains: TimeSeries, appliance: TimeSeries, interval: float | None = None,
                   gap_limit: float = DEFAULT_GAP_LIMIT) -> AlignedPair:
    """Put mains and appliance on one grid over their overlap.

    Each grid point takes the nearest reading of each channel. Gaps up to
    ``gap_limit`` seconds are forward-filled; longer appliance gaps are set
    to 0 W, longer mains gaps stay marked as missing (inference and
    windowing refuse them).
    """
    interval = float(interval or max(mains.interval, appliance.interval))
    if interval <= 0:
        raise ConfigurationError("interval must be positive")
    lo = max(mains.start, appliance.start)
    hi = min(mains.end, appliance.end)
    if hi < lo:
        raise AlignmentError(
            f"no temporal overlap: mains [{mains.start}, {mains.end}], appliance [{appliance.start}, {appliance.end}]"
        )
    n = int(math.floor((hi - lo) / interval + 1e-9)) + 1
    grid = lo + interval * np.arange(n)
    m_vals, m_missing = _sample_on_grid(mains, grid, gap_limit)
    a_vals, _ = _sample_on_grid(appliance, grid, gap_limit)
    return AlignedPair(TimeSeries(lo, interval, m_vals, m_missing), TimeSeries(lo, interval, a_vals))


def standardize(values, mean: float, std: float) -> np.ndarray:
    """``(x - mean) / std`` for a TimeSeries or array."""
    if not std > 0:
        raise ConfigurationError(f"std must be > 0, got {std}")
    if isinstance(values, TimeSeries):
        values = values.values
    return (np.asarray(values, dtype=np.float64) - mean) / std


def destandardize(z, mean: float, std: float, clip: tuple[float, float] | None = None) -> np.ndarray:
    """Inverse of :func:`standardize`, optionally clipped to ``clip = (lo, hi)``."""
    if not std > 0:
        raise ConfigurationError(f"std must be > 0, got {std}")
    x = np.asarray(z, dtype=np.float64) * std + mean
    if clip is not None:
        x = np.clip(x, *clip)
    return x


def mains_stats(series: TimeSeries | np.ndarray) -> tuple[float, float]:
    """Mean and standard deviation of the (non-missing) mains readings."""
    if isinstance(series, TimeSeries):
        vals = series.values if series.missing is None else series.values[~series.missing]
    else:
        vals = np.asarray(series, dtype=np.float64)
    std = float(np.std(vals))
    return float(np.mean(vals)), std if std > 0 else 1.0


@dataclass(frozen=True)
class ApplianceProfile:
    name: str
    window_length: int
    max_power: float
    on_threshold: float
    mean: float
    std: float

    def __post_init__(self):
        if self.window_length < 3 or self.window_length % 2 == 0:
            raise ConfigurationError(f"{self.name}: window length must be odd and >= 3, got {self.window_length}")
        if not self.std > 0:
            raise ConfigurationError(f"{self.name}: std must be > 0")
        if not self.on_threshold < self.max_power:
            raise ConfigurationError(f"{self.name}: on-threshold must be below max power")

    def with_window(self, window_length: int) -> "ApplianceProfile":
        return replace(self, window_length=window_length)

    def to_dict(self) -> dict:
        return asdict(self)


# Window length, max power, on threshold, mean and std (Watts) per appliance.
BUILTIN_PROFILES = {
    "kettle": ApplianceProfile("kettle", 599, 3948, 2000, 700, 1000),
    "microwave": ApplianceProfile("microwave", 599, 3138, 200, 500, 800),
    "fridge": ApplianceProfile("fridge", 599, 2572, 50, 200, 400),
    "dishwasher": ApplianceProfile("dishwasher", 599, 3230, 10, 700, 1000),
    "washingmachine": ApplianceProfile("washingmachine", 599, 3962, 20, 400, 700),
}


def load_profiles(path=None) -> dict[str, ApplianceProfile]:
    """Read a JSON profile file ``{"appliances": [{name, window_length, ...}, ...]}``.

    With no path, returns the five built-in rows.
    """
    if path is None:
        return dict(BUILTIN_PROFILES)
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        rows = doc["appliances"] if isinstance(doc, dict) else doc
        return {r["name"]: ApplianceProfile(**r) for r in rows}
    except FileNotFoundError:
        raise ConfigurationError(f"{path}: no such profile file") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: malformed profile file ({exc})") from None


def save_profiles(profiles, path) -> None:
    rows = [p.to_dict() for p in (profiles.values() if isinstance(profiles, dict) else profiles)]
    Path(path).write_text(json.dumps({"appliances": rows}, indent=2) + "\n")
