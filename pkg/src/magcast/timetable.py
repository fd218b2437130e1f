"""Hourly (or finer) multivariate time tables and their canonical CSV form.

A ``TimeTable`` stores timestamps as integer minutes since 1970-01-01T00:00Z so
that 5-minute radar series and hourly OMNI series share one representation.
Hour-aligned tables serialize with an ``epoch_hour`` key column; anything finer
uses ``epoch_minute``.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

MINUTES_PER_HOUR = 60
NA = "NA"


@dataclass(frozen=True)
class Timestamp:
    """Whole hours since the Unix epoch."""

    epoch_hour: int

    def __post_init__(self):
        if self.epoch_hour < 0:
            raise ValueError(f"epoch_hour must be >= 0, got {self.epoch_hour}")

    @classmethod
    def from_calendar(cls, year: int, day_of_year: int, hour: int) -> "Timestamp":
        return cls(int(calendar_to_epoch_hour(year, day_of_year, hour)))

    def calendar(self) -> tuple[int, int, int]:
        y, d, h = epoch_hour_to_calendar(np.array([self.epoch_hour]))
        return int(y[0]), int(d[0]), int(h[0])


def calendar_to_epoch_hour(year, day_of_year, hour):
    """Vectorised (year, 1-based day of year, hour) -> epoch hour."""
    year = np.asarray(year, dtype=np.int64)
    day_of_year = np.asarray(day_of_year, dtype=np.int64)
    hour = np.asarray(hour, dtype=np.int64)
    start = (year - 1970).astype("datetime64[Y]").astype("datetime64[D]").astype(np.int64)
    return (start + day_of_year - 1) * 24 + hour


def epoch_hour_to_calendar(epoch_hour):
    epoch_hour = np.asarray(epoch_hour, dtype=np.int64)
    days = np.floor_divide(epoch_hour, 24)
    hour = epoch_hour - days * 24
    dt_day = days.astype("datetime64[D]")
    year_start = dt_day.astype("datetime64[Y]")
    doy = (dt_day - year_start.astype("datetime64[D]")).astype(np.int64) + 1
    year = year_start.astype(np.int64) + 1970
    return year, doy, hour


@dataclass(frozen=True, eq=False)
class TimeTable:
    """Timestamp-indexed table with a per-cell missing mask.

    ``values`` holds NaN wherever ``missing`` is set; the mask is authoritative.
    """

    times: np.ndarray  # int64 epoch minutes, strictly increasing
    columns: tuple[str, ...]
    values: np.ndarray  # (rows, columns) float64
    missing: np.ndarray  # (rows, columns) bool

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(len(times), len(self.columns))
        missing = np.asarray(self.missing, dtype=bool).reshape(values.shape) | np.isnan(values)
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"duplicate column names in {self.columns}")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        values = np.where(missing, np.nan, values)
        for arr in (times, values, missing):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_hours(cls, hours, columns: Sequence[str], values, missing=None) -> "TimeTable":
        hours = np.asarray(hours, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64).reshape(len(hours), len(columns))
        if missing is None:
            missing = np.isnan(values)
        return cls(hours * MINUTES_PER_HOUR, tuple(columns), values, missing)

    @classmethod
    def empty(cls, columns: Sequence[str] = ()) -> "TimeTable":
        return cls(np.zeros(0, np.int64), tuple(columns), np.zeros((0, len(columns))), np.zeros((0, len(columns)), bool))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def hour_aligned(self) -> bool:
        return bool(np.all(self.times % MINUTES_PER_HOUR == 0))

    @property
    def hours(self) -> np.ndarray:
        if not self.hour_aligned:
            raise ValueError("table has sub-hourly timestamps")
        return self.times // MINUTES_PER_HOUR

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"unknown column {name!r}; table has {list(self.columns)}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "TimeTable":
        idx = [self.index(n) for n in names]
        return TimeTable(self.times, tuple(names), self.values[:, idx], self.missing[:, idx])

    def take(self, rows) -> "TimeTable":
        """Rows by position (slice, index array or boolean mask)."""
        return TimeTable(self.times[rows], self.columns, self.values[rows], self.missing[rows])

    def restrict(self, times: Iterable[int]) -> "TimeTable":
        """Keep only rows whose minute timestamps are in ``times``."""
        return self.take(np.isin(self.times, np.fromiter(times, np.int64)))

    def shift(self, minutes: int) -> "TimeTable":
        return TimeTable(self.times + minutes, self.columns, self.values, self.missing)

    def with_columns(self, names: Sequence[str], values, missing=None) -> "TimeTable":
        """Append columns (same row count)."""
        values = np.asarray(values, dtype=np.float64).reshape(len(self), len(names))
        if missing is None:
            missing = np.isnan(values)
        return TimeTable(
            self.times,
            self.columns + tuple(names),
            np.hstack([self.values, values]),
            np.hstack([self.missing, missing]),
        )

    def replace_values(self, names: Sequence[str], values) -> "TimeTable":
        """Copy with the named columns overwritten; missing cells stay missing."""
        out = self.values.copy()
        idx = [self.index(n) for n in names]
        out[:, idx] = values
        return TimeTable(self.times, self.columns, out, self.missing)

    def equals(self, other: "TimeTable") -> bool:
        return (
            self.columns == other.columns
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self) -> str:
        return f"TimeTable(rows={len(self)}, columns={list(self.columns)})"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(table: TimeTable, dest: str | os.PathLike | TextIO) -> None:
    """Canonical CSV: ``epoch_hour,<col>...`` with literal ``NA`` for missing cells."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            write_csv(table, fh)
        return
    hourly = table.hour_aligned
    key = table.hours if hourly else table.times
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["epoch_hour" if hourly else "epoch_minute", *table.columns])
    for k, row, miss in zip(key, table.values, table.missing):
        writer.writerow([int(k), *(NA if m else _fmt(v) for v, m in zip(row, miss))])


def to_csv_string(table: TimeTable) -> str:
    buf = io.StringIO()
    write_csv(table, buf)
    return buf.getvalue()


def read_csv(src: str | os.PathLike | TextIO) -> TimeTable:
    if isinstance(src, (str, os.PathLike)):
        with open(src, newline="") as fh:
            return read_csv(fh)
    reader = csv.reader(src)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV: missing header") from None
    key, columns = header[0], tuple(header[1:])
    if key not in ("epoch_hour", "epoch_minute"):
        raise ValueError(f"first CSV column must be epoch_hour or epoch_minute, got {key!r}")
    scale = MINUTES_PER_HOUR if key == "epoch_hour" else 1
    times, rows = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            times.append(int(rec[0]) * scale)
            rows.append([np.nan if f == NA else float(f) for f in rec[1:]])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    values = np.array(rows, dtype=np.float64).reshape(len(times), len(columns))
    return TimeTable(np.array(times, dtype=np.int64), columns, values, np.isnan(values))
