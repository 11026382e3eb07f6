"""Monthly time series, min-max scaling, supervised windows and splits."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from functools import total_ordering
from typing import TextIO

import numpy as np

from .errors import UsageError


@total_ordering
@dataclass(frozen=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    def __lt__(self, other: MonthStamp) -> bool:
        return (self.year, self.month) < (other.year, other.month)

    @property
    def ordinal(self) -> int:
        """Months since year 0, January."""
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, n: int) -> MonthStamp:
        return cls(n // 12, n % 12 + 1)

    def shift(self, months: int) -> MonthStamp:
        return MonthStamp.from_ordinal(self.ordinal + months)

    def succ(self) -> MonthStamp:
        return self.shift(1)

    def months_until(self, other: MonthStamp) -> int:
        return other.ordinal - self.ordinal

    @classmethod
    def parse(cls, text: str) -> MonthStamp:
        """Parse ``YYYY-MM`` (a trailing ``-DD`` is accepted and ignored)."""
        parts = text.strip().split("-")
        if len(parts) < 2:
            raise ValueError(f"not a YYYY-MM stamp: {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


class Unit(str, enum.Enum):
    RAW_KG = "raw_kg"
    SCALED = "scaled"


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Values on a gap-free monthly grid; ``values[i]`` belongs to ``start + i``."""

    start: MonthStamp
    values: np.ndarray
    unit: Unit = Unit.RAW_KG

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a time series needs a non-empty 1-d value vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("time series values must be finite")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", Unit(self.unit))

    def __len__(self) -> int:
        return self.values.size

    def stamp(self, i: int) -> MonthStamp:
        return self.start.shift(i)

    @property
    def stamps(self) -> list[MonthStamp]:
        return [self.stamp(i) for i in range(len(self))]

    @property
    def end(self) -> MonthStamp:
        return self.stamp(len(self) - 1)

    def slice(self, lo: int, hi: int | None = None) -> TimeSeries:
        hi = len(self) if hi is None else hi
        return TimeSeries(self.stamp(lo), self.values[lo:hi], self.unit)

    def with_values(self, values, unit: Unit | None = None) -> TimeSeries:
        return TimeSeries(self.start, values, self.unit if unit is None else unit)

    def to_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value"])
        for i, v in enumerate(self.values):
            writer.writerow([str(self.stamp(i)), repr(float(v))])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fh: TextIO, unit: Unit = Unit.RAW_KG) -> TimeSeries:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestamp", "value"]:
            raise UsageError("series CSV must start with header 'timestamp,value'")
        stamps, values = [], []
        for row in reader:
            if not row:
                continue
            stamps.append(MonthStamp.parse(row[0]))
            values.append(float(row[1]))
        if not stamps:
            raise UsageError("series CSV has no rows")
        for a, b in zip(stamps, stamps[1:]):
            if a.months_until(b) != 1:
                raise UsageError(f"series CSV is not a contiguous monthly grid at {b}")
        return cls(stamps[0], values, unit)


@dataclass(frozen=True)
class Scaler:
    min: float
    max: float
    target_lo: float = 0.0
    target_hi: float = 1.0

    def __post_init__(self):
        if not self.max >= self.min:
            raise ValueError("scaler max must be >= min")
        if not self.target_hi > self.target_lo:
            raise ValueError("scaler target_hi must exceed target_lo")

    @property
    def degenerate(self) -> bool:
        return self.max == self.min

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            # constant training data: everything collapses onto target_lo
            return np.full_like(x, self.target_lo)
        span = self.max - self.min
        return self.target_lo + (x - self.min) * (self.target_hi - self.target_lo) / span

    def inverse(self, z):
        z = np.asarray(z, dtype=float)
        if self.degenerate:
            return np.full_like(z, self.min)
        width = self.target_hi - self.target_lo
        return self.min + (z - self.target_lo) * (self.max - self.min) / width

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max,
                "target_lo": self.target_lo, "target_hi": self.target_hi}

    @classmethod
    def from_dict(cls, d: dict) -> Scaler:
        return cls(float(d["min"]), float(d["max"]),
                   float(d["target_lo"]), float(d["target_hi"]))


def fit_scaler(series: TimeSeries | np.ndarray, target: tuple[float, float] = (0.0, 1.0)) -> Scaler:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, float)
    if values.size == 0:
        raise ValueError("cannot fit a scaler on an empty series")
    return Scaler(float(values.min()), float(values.max()), float(target[0]), float(target[1]))


def scale(scaler: Scaler, series: TimeSeries) -> TimeSeries:
    if series.unit is not Unit.RAW_KG:
        raise UsageError("scale expects a raw_kg series")
    out = scaler.transform(series.values)
    if not scaler.degenerate:
        # pin the extrema to the endpoints exactly
        out[series.values == scaler.min] = scaler.target_lo
        out[series.values == scaler.max] = scaler.target_hi
    return series.with_values(out, Unit.SCALED)


def unscale(scaler: Scaler, series: TimeSeries) -> TimeSeries:
    if series.unit is not Unit.SCALED:
        raise UsageError("unscale expects a scaled series")
    return series.with_values(scaler.inverse(series.values), Unit.RAW_KG)


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    """Sliding windows: ``inputs[i] = x[i:i+w]`` and ``targets[i] = x[i+w]``.

    ``first_target`` is the series index of ``targets[0]``, so sample ``i``
    predicts index ``first_target + i`` of the source series.
    """

    window_len: int
    inputs: np.ndarray
    targets: np.ndarray
    first_target: int = field(default=0)

    def __len__(self) -> int:
        return self.targets.size

    def target_indices(self) -> np.ndarray:
        return np.arange(self.first_target, self.first_target + len(self))

    def subset(self, lo: int, hi: int) -> WindowedDataset:
        return WindowedDataset(self.window_len, self.inputs[lo:hi], self.targets[lo:hi],
                               self.first_target + lo)


def make_windows(series: TimeSeries | np.ndarray, w: int) -> WindowedDataset:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, float)
    n = values.size
    if w < 1:
        raise ValueError("window length must be positive")
    if n <= w:
        raise ValueError(f"series of length {n} is too short for window {w}; "
                         f"need at least {w + 1} points")
    inputs = np.lib.stride_tricks.sliding_window_view(values, w)[: n - w].copy()
    targets = values[w:].copy()
    inputs.setflags(write=False)
    targets.setflags(write=False)
    return WindowedDataset(w, inputs, targets, w)


def split_chronological(data, train_fraction: float):
    """Split a series or windowed dataset into (train, validation), in order.

    The training part holds the first ``floor(train_fraction * len(data))``
    items.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    count = len(data)
    n_train = math.floor(train_fraction * count)
    if n_train == 0 or n_train == count:
        raise ValueError(f"fraction {train_fraction} on {count} items leaves an empty part")
    if isinstance(data, TimeSeries):
        return data.slice(0, n_train), data.slice(n_train)
    if isinstance(data, WindowedDataset):
        return data.subset(0, n_train), data.subset(n_train, count)
    raise TypeError(f"cannot split {type(data).__name__}")
