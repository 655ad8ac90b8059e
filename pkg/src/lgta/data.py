"""Panels of aligned univariate series: CSV I/O, preprocessing, synthetic corpora.

CSV layout is wide: a header row, an optional leading timestamp column and
one column per series. A header cell ``name|group`` attaches a group label
to the series; group labels become one-hot condition vectors.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

TIMESTAMP_HEADERS = {"date", "timestamp", "time", "ds", "datetime"}


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class TimeSeriesDataset:
    values: np.ndarray                     # (S, T)
    names: list[str]
    timestamps: np.ndarray | None = None   # (T,) datetime64[D]
    groups: list[str] | None = None
    minimum: np.ndarray | None = None      # per-series, set when normalized
    maximum: np.ndarray | None = None
    constant: np.ndarray | None = None     # per-series flag for zero-range series

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"values must be (series, time), got shape {self.values.shape}")
        S, T = self.values.shape
        if len(self.names) != S:
            raise DataError(f"{len(self.names)} names for {S} series")
        if len(set(self.names)) != S:
            raise DataError("series names must be unique")
        if self.timestamps is not None and len(self.timestamps) != T:
            raise DataError(f"{len(self.timestamps)} timestamps for length {T}")
        if self.groups is not None and len(self.groups) != S:
            raise DataError(f"{len(self.groups)} group labels for {S} series")

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def normalized(self) -> bool:
        return self.minimum is not None

    @property
    def group_levels(self) -> list[str]:
        return sorted(set(self.groups)) if self.groups is not None else []

    @property
    def conditions(self) -> np.ndarray:
        """One-hot group labels, (S, n_groups); (S, 0) when ungrouped."""
        levels = self.group_levels
        out = np.zeros((self.n_series, len(levels)))
        for i, g in enumerate(self.groups or []):
            out[i, levels.index(g)] = 1.0
        return out

    def with_values(self, values: np.ndarray) -> "TimeSeriesDataset":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise DataError(f"shape {values.shape} does not match panel {self.values.shape}")
        return replace(self, values=values)

    def subset(self, index) -> "TimeSeriesDataset":
        index = list(index)
        pick = lambda a: None if a is None else np.asarray(a)[index]
        return TimeSeriesDataset(
            self.values[index], [self.names[i] for i in index], self.timestamps,
            None if self.groups is None else [self.groups[i] for i in index],
            pick(self.minimum), pick(self.maximum), pick(self.constant))


# CSV ---------------------------------------------------------------------

def _parse_date(text: str):
    try:
        return np.datetime64(dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        return None


def load_csv(path, layout: str = "wide", timestamps: bool | None = None) -> TimeSeriesDataset:
    """Read a wide CSV panel.

    ``timestamps=None`` detects a leading date column from its header name
    or from every cell parsing as an ISO date. Missing cells, ragged rows,
    non-numeric cells and duplicate names raise :class:`DataError` naming
    the 1-based (row, column) position.
    """
    if layout != "wide":
        raise DataError(f"unsupported layout {layout!r}; only 'wide' is implemented")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header, body = rows[0], rows[1:]
    width = len(header)
    for r, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {width}")
    if not body:
        raise DataError(f"{path}: no data rows")

    if timestamps is None:
        timestamps = header[0].strip().lower() in TIMESTAMP_HEADERS or all(
            _parse_date(row[0]) is not None for row in body)
    first = 1 if timestamps else 0
    if width - first < 1:
        raise DataError(f"{path}: no series columns")

    stamps = None
    if timestamps:
        parsed = []
        for r, row in enumerate(body, start=2):
            d = _parse_date(row[0])
            if d is None:
                raise DataError(f"{path}: row {r}, column 1: bad date {row[0]!r}")
            parsed.append(d)
        stamps = np.array(parsed, dtype="datetime64[D]")

    names, groups = [], []
    for col in range(first, width):
        cell = header[col].strip()
        name, sep, group = cell.partition("|")
        if not name:
            raise DataError(f"{path}: row 1, column {col + 1}: empty series name")
        if name in names:
            raise DataError(f"{path}: row 1, column {col + 1}: duplicate series name {name!r}")
        names.append(name)
        groups.append(group if sep else None)
    if any(g is None for g in groups) and not all(g is None for g in groups):
        raise DataError(f"{path}: group labels must be given for all series or none")

    values = np.empty((width - first, len(body)))
    for r, row in enumerate(body, start=2):
        for col in range(first, width):
            cell = row[col].strip()
            if not cell:
                raise DataError(f"{path}: row {r}, column {col + 1}: missing value")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r}, column {col + 1}: non-numeric {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {r}, column {col + 1}: non-finite {cell!r}")
            values[col - first, r - 2] = v
    return TimeSeriesDataset(values, names, stamps, None if groups[0] is None else groups)


def save_csv(dataset: TimeSeriesDataset, path) -> None:
    """Write the wide layout with 12 significant digits."""
    header = [f"{n}|{g}" if dataset.groups else n
              for n, g in zip(dataset.names, dataset.groups or dataset.names)]
    if dataset.timestamps is not None:
        header = ["date"] + header
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(dataset.length):
            row = [f"{v:.12g}" for v in dataset.values[:, t]]
            if dataset.timestamps is not None:
                row = [str(dataset.timestamps[t])] + row
            writer.writerow(row)


# preprocessing -----------------------------------------------------------

def resample_weekly(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Sum non-overlapping 7-day blocks from the first day; drop a partial tail."""
    if dataset.timestamps is None:
        raise DataError("weekly resampling needs daily timestamps")
    if dataset.normalized:
        raise DataError("resample before normalizing")
    steps = np.diff(dataset.timestamps).astype(int)
    if np.any(steps != 1):
        raise DataError("timestamps are not consecutive days")
    weeks = dataset.length // 7
    if weeks == 0:
        raise DataError("fewer than 7 daily observations")
    kept = dataset.values[:, :weeks * 7]
    summed = kept.reshape(dataset.n_series, weeks, 7).sum(axis=2)
    return TimeSeriesDataset(summed, list(dataset.names), dataset.timestamps[:weeks * 7:7],
                             dataset.groups and list(dataset.groups))


def select_top_k(dataset: TimeSeriesDataset, k: int) -> TimeSeriesDataset:
    """Keep the k series with the largest mean, ties by name; ranked order."""
    if not 1 <= k <= dataset.n_series:
        raise DataError(f"k={k} outside 1..{dataset.n_series}")
    means = dataset.values.mean(axis=1)
    order = sorted(range(dataset.n_series), key=lambda i: (-means[i], dataset.names[i]))
    return dataset.subset(order[:k])


def normalize(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Per-series min-max scaling to [0, 1]; constant series become zeros."""
    if dataset.normalized:
        raise DataError("dataset is already normalized")
    lo = dataset.values.min(axis=1)
    hi = dataset.values.max(axis=1)
    constant = hi <= lo
    span = np.where(constant, 1.0, hi - lo)
    scaled = (dataset.values - lo[:, None]) / span[:, None]
    scaled[constant] = 0.0
    return replace(dataset, values=scaled, minimum=lo, maximum=hi, constant=constant)


def denormalize(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    if not dataset.normalized:
        raise DataError("dataset is not normalized")
    span = np.where(dataset.constant, 0.0, dataset.maximum - dataset.minimum)
    values = dataset.values * span[:, None] + dataset.minimum[:, None]
    return replace(dataset, values=values, minimum=None, maximum=None, constant=None)


# synthetic corpus --------------------------------------------------------

SYNTH_PERIODS = (8, 12, 24)


@dataclass
class SynthParams:
    slope: np.ndarray
    amplitude: np.ndarray
    period: np.ndarray
    phase: np.ndarray
    level: np.ndarray = field(repr=False)


def synth_corpus(n_series: int, length: int, seed: int = 0, sigma: float = 0.05,
                 start: str = "2020-01-06", return_params: bool = False):
    """Trend + sinusoid + Gaussian noise panel with daily timestamps.

    Series i is ``level + slope*t + amplitude*sin(2*pi*t/period + phase) + noise``
    with per-series parameters drawn from ``seed``. The group label is the
    period class.
    """
    if n_series < 1 or length < 1:
        raise ValueError("n_series and length must be positive")
    rng = np.random.default_rng(seed)
    period = rng.choice(np.array(SYNTH_PERIODS), size=n_series)
    slope = rng.uniform(-2.0, 2.0, n_series) / length
    amplitude = rng.uniform(0.5, 1.5, n_series)
    phase = rng.uniform(0.0, 2 * np.pi, n_series)
    level = rng.uniform(2.0, 10.0, n_series)
    t = np.arange(length, dtype=np.float64)
    values = (level[:, None] + slope[:, None] * t
              + amplitude[:, None] * np.sin(2 * np.pi * t / period[:, None] + phase[:, None]))
    noise = rng.standard_normal((n_series, length))
    values = values + sigma * noise
    stamps = np.datetime64(start, "D") + np.arange(length)
    width = len(str(n_series - 1))
    ds = TimeSeriesDataset(values, [f"s{i:0{width}d}" for i in range(n_series)], stamps,
                           [f"p{p}" for p in period])
    if return_params:
        return ds, SynthParams(slope, amplitude, period, phase, level)
    return ds
