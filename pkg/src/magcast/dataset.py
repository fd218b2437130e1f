"""Sliding-window assembly and causal train/val/test splitting."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .features import CALENDAR_COLUMNS
from .timetable import TimeTable

SOLAR_WIND = ("V", "n", "Bx", "By", "Bz")
INDICES = ("AE", "AU", "AL", "Dst", "F10.7", "Kp")
SUPERDARN = ("cpp", "pcr")

PRESETS = {
    "base": SOLAR_WIND + INDICES + CALENDAR_COLUMNS,
    "sdrn": SOLAR_WIND + SUPERDARN + CALENDAR_COLUMNS,
    "sw": SOLAR_WIND + CALENDAR_COLUMNS,
}


@dataclass(frozen=True)
class FeatureSpec:
    input_columns: tuple[str, ...]
    target_columns: tuple[str, ...] = INDICES
    preset: str = "custom"

    def __post_init__(self):
        if not self.input_columns or not self.target_columns:
            raise ValueError("input and target column lists must be non-empty")
        object.__setattr__(self, "input_columns", tuple(self.input_columns))
        object.__setattr__(self, "target_columns", tuple(self.target_columns))

    @classmethod
    def from_preset(cls, name: str, targets: Sequence[str] = INDICES) -> "FeatureSpec":
        if name not in PRESETS:
            raise ValueError(f"unknown feature preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(PRESETS[name], tuple(targets), name)

    @property
    def scaled_columns(self) -> tuple[str, ...]:
        """Columns that get standardized: every input and target except calendar signals."""
        out: list[str] = []
        for c in self.input_columns + self.target_columns:
            if c not in CALENDAR_COLUMNS and c not in out:
                out.append(c)
        return tuple(out)

    def without_calendar(self) -> "FeatureSpec":
        """Same spec minus the calendar inputs (for data with no seasonal or diurnal structure)."""
        cols = tuple(c for c in self.input_columns if c not in CALENDAR_COLUMNS)
        return FeatureSpec(cols, self.target_columns, self.preset)

    def to_json(self) -> dict:
        return {"input_columns": list(self.input_columns), "target_columns": list(self.target_columns), "preset": self.preset}

    @classmethod
    def from_json(cls, d: dict) -> "FeatureSpec":
        return cls(tuple(d["input_columns"]), tuple(d["target_columns"]), d.get("preset", "custom"))


@dataclass(frozen=True)
class WindowConfig:
    history: int = 6  # T_h: past samples before the anchor; input spans history + 1 rows
    lead: int = 6  # T_p: future samples predicted

    def __post_init__(self):
        if self.history < 0:
            raise ValueError("history (T_h) must be >= 0")
        if self.lead < 1:
            raise ValueError("lead (T_p) must be >= 1")

    @property
    def input_length(self) -> int:
        return self.history + 1


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.6
    val: float = 0.1
    test: float = 0.3

    def __post_init__(self):
        fr = (self.train, self.val, self.test)
        if any(not 0 < f < 1 for f in fr):
            raise ValueError(f"split fractions must lie in (0, 1), got {fr}")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must sum to 1, got {sum(fr)!r}")


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Input/target window pairs keyed by anchor hour, ordered by anchor."""

    anchors: np.ndarray  # (N,) epoch hours
    inputs: np.ndarray  # (N, T_h + 1, D)
    targets: np.ndarray  # (N, T_p, K)
    input_columns: tuple[str, ...]
    target_columns: tuple[str, ...]
    window: WindowConfig = field(default_factory=WindowConfig)

    def __len__(self) -> int:
        return len(self.anchors)

    def take(self, idx) -> "WindowSet":
        return WindowSet(self.anchors[idx], self.inputs[idx], self.targets[idx], self.input_columns, self.target_columns, self.window)

    def equals(self, other: "WindowSet") -> bool:
        return (
            self.input_columns == other.input_columns
            and self.target_columns == other.target_columns
            and np.array_equal(self.anchors, other.anchors)
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.targets, other.targets)
        )

    def write_csv(self, dest: str | os.PathLike | TextIO) -> None:
        """Flat debug dump: anchor, then row-major input and target cells."""
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", newline="") as fh:
                return self.write_csv(fh)
        w = csv.writer(dest, lineterminator="\n")
        lag_names = [f"{c}@t-{self.window.history - i}" for i in range(self.window.input_length) for c in self.input_columns]
        lead_names = [f"{c}@t+{h + 1}" for h in range(self.window.lead) for c in self.target_columns]
        w.writerow(["anchor", *lag_names, *lead_names])
        for a, x, y in zip(self.anchors, self.inputs, self.targets):
            w.writerow([int(a), *map(repr, x.ravel().tolist()), *map(repr, y.ravel().tolist())])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    val = _round_half_up(n * spec.val)
    test = _round_half_up(n * spec.test)
    return n - val - test, val, test


def sequential_split(table: TimeTable, spec: SplitSpec = SplitSpec()) -> tuple[TimeTable, TimeTable, TimeTable]:
    """Contiguous train/val/test blocks by row position; train absorbs rounding."""
    if len(table) == 0:
        raise ValueError("cannot split an empty table")
    n_train, n_val, n_test = split_sizes(len(table), spec)
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError(f"split of {len(table)} rows gives an empty block: {(n_train, n_val, n_test)}")
    return (
        table.take(slice(0, n_train)),
        table.take(slice(n_train, n_train + n_val)),
        table.take(slice(n_train + n_val, None)),
    )


def _run_ok(ok: np.ndarray, start: np.ndarray, length: int) -> np.ndarray:
    """ok[start:start+length].all() for each start (indices assumed in range)."""
    if length == 0:
        return np.ones(len(start), bool)
    csum = np.r_[0, np.cumsum(ok, dtype=np.int64)]
    return csum[start + length] - csum[start] == length


def assemble_windows(table: TimeTable, features: FeatureSpec, window: WindowConfig = WindowConfig()) -> WindowSet:
    """Every anchor t whose hours t-T_h .. t+T_p exist with no missing needed cell.

    Inputs cover [t - T_h, t] on the input columns; targets cover (t, t + T_p] on
    the target columns.
    """
    in_idx = [table.index(c) for c in features.input_columns]
    out_idx = [table.index(c) for c in features.target_columns]
    th, tp = window.history, window.lead
    d_in, k = len(in_idx), len(out_idx)
    empty = WindowSet(
        np.zeros(0, np.int64), np.zeros((0, th + 1, d_in)), np.zeros((0, tp, k)),
        features.input_columns, features.target_columns, window,
    )
    if len(table) == 0:
        return empty
    hours = table.hours
    pos = hours - hours[0]
    grid = int(pos[-1]) + 1
    in_ok = np.zeros(grid, bool)
    out_ok = np.zeros(grid, bool)
    in_ok[pos] = ~table.missing[:, in_idx].any(axis=1)
    out_ok[pos] = ~table.missing[:, out_idx].any(axis=1)
    anchors = np.arange(th, grid - tp)
    if anchors.size == 0:
        return empty
    valid = _run_ok(in_ok, anchors - th, th + 1) & _run_ok(out_ok, anchors + 1, tp)
    anchors = anchors[valid]
    if anchors.size == 0:
        return empty
    row_of = np.full(grid, -1, np.int64)
    row_of[pos] = np.arange(len(table))
    rows = row_of[anchors]
    vals = table.values
    in_rows = rows[:, None] + np.arange(-th, 1)[None, :]
    out_rows = rows[:, None] + np.arange(1, tp + 1)[None, :]
    inputs = vals[:, in_idx][in_rows]
    targets = vals[:, out_idx][out_rows]
    return WindowSet(anchors + hours[0], inputs, targets, features.input_columns, features.target_columns, window)


def split_then_window(
    table: TimeTable,
    features: FeatureSpec,
    window: WindowConfig = WindowConfig(),
    split: SplitSpec = SplitSpec(),
) -> tuple[WindowSet, WindowSet, WindowSet]:
    """Split sequentially, then window each partition on its own (no straddling windows)."""
    parts = sequential_split(table, split)
    sets = tuple(assemble_windows(p, features, window) for p in parts)
    for name, ws in zip(("train", "validation", "test"), sets):
        if len(ws) == 0:
            raise ValueError(f"{name} partition yields zero windows")
    return sets


def intersect_windows(sets: Sequence[WindowSet]) -> list[WindowSet]:
    """Restrict each set to the anchors present in all of them."""
    if not sets:
        return []
    common = sets[0].anchors
    for ws in sets[1:]:
        common = np.intersect1d(common, ws.anchors, assume_unique=True)
    return [ws.take(np.isin(ws.anchors, common)) for ws in sets]
