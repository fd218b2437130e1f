"""Calendar sinusoids and train-set standardization."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .timetable import TimeTable, Timestamp, epoch_hour_to_calendar

SOLAR_CYCLE_YEARS = 11
YEAR_ORIGIN = 2000
DAYS_PER_YEAR = 365
HOURS_PER_DAY = 24

CALENDAR_COLUMNS = ("year_sin", "year_cos", "doy_sin", "doy_cos", "hour_sin", "hour_cos")


@dataclass(frozen=True)
class CalendarSignals:
    year_sin: float
    year_cos: float
    doy_sin: float
    doy_cos: float
    hour_sin: float
    hour_cos: float


def _phases(epoch_hours) -> np.ndarray:
    year, doy, hour = epoch_hour_to_calendar(epoch_hours)
    two_pi = 2.0 * np.pi
    return np.stack(
        [
            two_pi * np.mod(year - YEAR_ORIGIN, SOLAR_CYCLE_YEARS) / SOLAR_CYCLE_YEARS,
            two_pi * (doy - 1) / DAYS_PER_YEAR,
            two_pi * hour / HOURS_PER_DAY,
        ],
        axis=-1,
    )


def calendar_matrix(epoch_hours) -> np.ndarray:
    """(N, 6) array of calendar signals in ``CALENDAR_COLUMNS`` order."""
    ph = _phases(np.asarray(epoch_hours, dtype=np.int64).reshape(-1))
    out = np.empty((ph.shape[0], 6))
    out[:, 0::2] = np.sin(ph)
    out[:, 1::2] = np.cos(ph)
    return out


def calendar_signals(ts: Timestamp | int) -> CalendarSignals:
    hour = ts.epoch_hour if isinstance(ts, Timestamp) else int(ts)
    return CalendarSignals(*calendar_matrix([hour])[0])


def add_calendar(table: TimeTable) -> TimeTable:
    """Append the six calendar columns (computed from each row's hour)."""
    return table.with_columns(CALENDAR_COLUMNS, calendar_matrix(table.hours))


class ZeroVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class Scaler:
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    fitted_range: tuple[int, int]  # inclusive epoch hours

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(len(self.columns))
        std = np.asarray(self.std, dtype=np.float64).reshape(len(self.columns))
        if np.any(~(std > 0)):
            raise ValueError("scaler std must be strictly positive")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def stats(self, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        idx = []
        for n in names:
            if n not in self.columns:
                raise KeyError(f"scaler has no column {n!r}")
            idx.append(self.columns.index(n))
        return self.mean[idx], self.std[idx]

    def to_json(self) -> dict:
        return {
            "columns": [{"name": n, "mean": float(m), "std": float(s)} for n, m, s in zip(self.columns, self.mean, self.std)],
            "fitted_range": [int(self.fitted_range[0]), int(self.fitted_range[1])],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Scaler":
        cols = d["columns"]
        return cls(
            tuple(c["name"] for c in cols),
            np.array([c["mean"] for c in cols]),
            np.array([c["std"] for c in cols]),
            tuple(d["fitted_range"]),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Scaler":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def fit_scaler(table: TimeTable, columns: Sequence[str], hour_range: tuple[int, int] | None = None) -> Scaler:
    """Per-column mean and population std over non-missing cells in ``hour_range`` (inclusive)."""
    hours = table.hours
    if hour_range is None:
        if len(table) == 0:
            raise ValueError("cannot fit a scaler on an empty table")
        hour_range = (int(hours[0]), int(hours[-1]))
    lo, hi = hour_range
    rows = (hours >= lo) & (hours <= hi)
    if not rows.any():
        raise ValueError(f"no rows in fit range {hour_range}")
    means, stds = [], []
    for name in columns:
        col = table.column(name)[rows]
        col = col[~np.isnan(col)]
        if col.size < 2:
            raise ValueError(f"column {name!r} has fewer than 2 values in the fit range")
        m = col.mean()
        s = np.sqrt(np.mean((col - m) ** 2))
        if not s > 0:
            raise ZeroVarianceError(f"column {name!r} has zero variance in the fit range")
        means.append(m)
        stds.append(s)
    return Scaler(tuple(columns), np.array(means), np.array(stds), (int(lo), int(hi)))


def standardize(table: TimeTable, scaler: Scaler) -> TimeTable:
    mean, std = scaler.stats(scaler.columns)
    idx = [table.index(n) for n in scaler.columns]
    return table.replace_values(scaler.columns, (table.values[:, idx] - mean) / std)


def destandardize(table: TimeTable, scaler: Scaler) -> TimeTable:
    mean, std = scaler.stats(scaler.columns)
    idx = [table.index(n) for n in scaler.columns]
    return table.replace_values(scaler.columns, table.values[:, idx] * std + mean)


def destandardize_array(x: np.ndarray, scaler: Scaler, names: Sequence[str]) -> np.ndarray:
    """Invert scaling on an array whose last axis follows ``names``."""
    mean, std = scaler.stats(names)
    return x * std + mean
