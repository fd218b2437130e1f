"""Readers for OMNI-style hourly text exports and SuperDARN CPP/PCR series."""
from __future__ import annotations

import io
import json
import os
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence, TextIO

import numpy as np

from .timetable import MINUTES_PER_HOUR, TimeTable, calendar_to_epoch_hour


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class ColumnSpec:
    position: int  # 0-based whitespace field index; fields 0-2 are year, doy, hour
    name: str
    sentinels: tuple[float, ...] = ()

    def __post_init__(self):
        if self.position < 0:
            raise ValueError(f"column {self.name!r}: position must be non-negative")
        object.__setattr__(self, "sentinels", tuple(float(s) for s in self.sentinels))


@dataclass(frozen=True)
class ColumnMap:
    columns: tuple[ColumnSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate target column names: {sorted(dupes)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @classmethod
    def from_json(cls, src: str | os.PathLike | list) -> "ColumnMap":
        """Load ``[{"position": 24, "name": "V", "sentinels": [9999.0]}, ...]``."""
        if isinstance(src, (str, os.PathLike)):
            with open(src) as fh:
                src = json.load(fh)
        return cls(tuple(ColumnSpec(int(d["position"]), str(d["name"]), tuple(d.get("sentinels", ()))) for d in src))

    def to_json(self) -> list[dict]:
        return [{"position": c.position, "name": c.name, "sentinels": list(c.sentinels)} for c in self.columns]


def _lines(text: str | TextIO | Iterable[str]) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(lineno, f"malformed numeric field {tok!r}") from None


def _build(times: list[int], values: list[list[float]], columns: Sequence[str]) -> TimeTable:
    """Sort by time and drop duplicate timestamps, keeping the last occurrence."""
    if not times:
        return TimeTable.empty(columns)
    t = np.array(times, dtype=np.int64)
    v = np.array(values, dtype=np.float64).reshape(len(t), len(columns))
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    last = np.r_[t[1:] != t[:-1], True]
    if not last.all():
        for i in np.flatnonzero(~last):
            # group of equal timestamps ends at the next True in `last`
            j = i + 1 + int(np.argmax(last[i + 1:]))
            if not np.array_equal(v[i], v[j], equal_nan=True):
                warnings.warn(
                    f"duplicate timestamp (epoch minute {t[i]}) with conflicting values; keeping the last",
                    stacklevel=3,
                )
                break
    t, v = t[last], v[last]
    return TimeTable(t, tuple(columns), v, np.isnan(v))


def parse_columnar(text: str | TextIO | Iterable[str], colmap: ColumnMap) -> TimeTable:
    """Parse whitespace-delimited ``year doy hour ...`` rows into an hourly table.

    Blank lines and lines starting with ``#`` are skipped. Any field equal to one
    of its column's sentinels is marked missing.
    """
    times: list[int] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(_lines(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        need = max([2, *(c.position for c in colmap.columns)]) + 1
        if len(fields) < need:
            raise ParseError(lineno, f"expected at least {need} fields, got {len(fields)}")
        year, doy, hour = (_float(f, lineno) for f in fields[:3])
        if not (year.is_integer() and doy.is_integer() and hour.is_integer()):
            raise ParseError(lineno, "year, day-of-year and hour must be integers")
        if not 1 <= doy <= 366 or not 0 <= hour <= 23:
            raise ParseError(lineno, f"day-of-year {doy:g} / hour {hour:g} out of range")
        times.append(int(calendar_to_epoch_hour(int(year), int(doy), int(hour))) * MINUTES_PER_HOUR)
        row = []
        for spec in colmap.columns:
            x = _float(fields[spec.position], lineno)
            row.append(np.nan if x in spec.sentinels else x)
        rows.append(row)
    return _build(times, rows, colmap.names)


_NA_TOKENS = {"na", "nan", "-", ""}


def _parse_minute(tok: str, lineno: int) -> int:
    try:
        dt = datetime.fromisoformat(tok)
    except ValueError:
        raise ParseError(lineno, f"malformed timestamp {tok!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    if dt.second or dt.microsecond:
        raise ParseError(lineno, f"timestamp {tok!r} is not on a whole minute")
    return int(dt.timestamp()) // 60


def parse_superdarn(
    text: str | TextIO | Iterable[str],
    sentinels: Sequence[float] = (999.9, 9999.9),
) -> TimeTable:
    """Parse ``<ISO timestamp> <cpp kV> <pcr deg>`` rows (5-minute cadence).

    The timestamp may be one token (``2014-01-01T00:05``) or a date and a time
    token (``2014-01-01 00:05``). ``NA``/``NaN`` tokens and sentinel values are
    marked missing.
    """
    sentinels = {float(s) for s in sentinels}
    times: list[int] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(_lines(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) == 4:
            fields = [fields[0] + "T" + fields[1], *fields[2:]]
        if len(fields) != 3:
            raise ParseError(lineno, f"expected timestamp, cpp, pcr; got {len(fields)} fields")
        times.append(_parse_minute(fields[0], lineno))
        row = []
        for tok in fields[1:]:
            x = np.nan if tok.lower() in _NA_TOKENS else _float(tok, lineno)
            row.append(np.nan if x in sentinels else x)
        rows.append(row)
    return _build(times, rows, ("cpp", "pcr"))


def infer_cadence(table: TimeTable) -> int:
    """Sampling interval in minutes (smallest spacing between rows)."""
    if len(table) < 2:
        return MINUTES_PER_HOUR
    return int(np.diff(table.times).min())


def resample_hourly(table: TimeTable, cadence_minutes: int | None = None) -> TimeTable:
    """Average sub-hourly samples into left-closed [H:00, H+1:00) bins.

    A cell is missing when fewer than half of the expected samples for that
    hour are present. Hours without any input row are omitted.
    """
    cadence = cadence_minutes or infer_cadence(table)
    if cadence <= 0 or MINUTES_PER_HOUR % cadence:
        raise ValueError(f"cadence of {cadence} min does not divide one hour")
    expected = MINUTES_PER_HOUR // cadence
    if len(table) == 0:
        return TimeTable.empty(table.columns)
    hour = np.floor_divide(table.times, MINUTES_PER_HOUR)
    starts = np.flatnonzero(np.r_[True, hour[1:] != hour[:-1]])
    present = ~table.missing
    filled = np.where(present, table.values, 0.0)
    sums = np.add.reduceat(filled, starts, axis=0)
    counts = np.add.reduceat(present.astype(np.int64), starts, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    missing = 2 * counts < expected
    return TimeTable(hour[starts] * MINUTES_PER_HOUR, table.columns, np.where(missing, np.nan, means), missing)


def align(tables: Sequence[TimeTable]) -> TimeTable:
    """Inner-join tables on timestamp; column names must be disjoint."""
    if not tables:
        raise ValueError("align needs at least one table")
    seen: set[str] = set()
    for t in tables:
        clash = seen.intersection(t.columns)
        if clash:
            raise ValueError(f"duplicate column name(s) across tables: {sorted(clash)}")
        seen.update(t.columns)
    common = tables[0].times
    for t in tables[1:]:
        common = np.intersect1d(common, t.times, assume_unique=True)
    parts = [t.take(np.isin(t.times, common)) for t in tables]
    return TimeTable(
        common,
        tuple(c for t in parts for c in t.columns),
        np.hstack([t.values for t in parts]) if parts else np.zeros((len(common), 0)),
        np.hstack([t.missing for t in parts]) if parts else np.zeros((len(common), 0), bool),
    )
