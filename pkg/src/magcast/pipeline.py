"""Table -> standardized train/val/test windows, and model bundles on disk."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

from .dataset import FeatureSpec, SplitSpec, WindowConfig, WindowSet, sequential_split, split_then_window
from .features import CALENDAR_COLUMNS, Scaler, add_calendar, fit_scaler, standardize
from .nn import LstmParams
from .optim import HyperParams
from .timetable import TimeTable


class Prepared(NamedTuple):
    train: WindowSet
    val: WindowSet
    test: WindowSet
    scaler: Scaler


def with_calendar(table: TimeTable) -> TimeTable:
    if all(c in table.columns for c in CALENDAR_COLUMNS):
        return table
    return add_calendar(table)


def prepare(
    table: TimeTable,
    features: FeatureSpec,
    window: WindowConfig = WindowConfig(),
    split: SplitSpec = SplitSpec(),
) -> Prepared:
    """Fit the scaler on the training block only, standardize, then window each block."""
    table = with_calendar(table)
    train_block = sequential_split(table, split)[0]
    hours = train_block.hours
    scaler = fit_scaler(table, features.scaled_columns, (int(hours[0]), int(hours[-1])))
    train, val, test = split_then_window(standardize(table, scaler), features, window, split)
    return Prepared(train, val, test, scaler)


@dataclass
class ModelBundle:
    """Everything ``predict``/``evaluate`` need: weights, scaler and data layout."""

    params: LstmParams
    scaler: Scaler
    features: FeatureSpec
    window: WindowConfig
    hyperparams: HyperParams | None = None

    def save(self, directory: str | os.PathLike) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        extra = {
            "features": self.features.to_json(),
            "window": asdict(self.window),
            "hyperparams": asdict(self.hyperparams) if self.hyperparams else None,
        }
        seed = self.hyperparams.seed if self.hyperparams else None
        _atomic(d / "model.bin", lambda p: self.params.save(p, seed=seed, extra=extra), sidecar=True)
        _atomic(d / "scaler.json", self.scaler.save)

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "ModelBundle":
        d = Path(directory)
        params = LstmParams.load(d / "model.bin")
        with open(d / "model.bin.json") as fh:
            meta = json.load(fh)
        hp = meta.get("hyperparams")
        return cls(
            params,
            Scaler.load(d / "scaler.json"),
            FeatureSpec.from_json(meta["features"]),
            WindowConfig(**meta["window"]),
            HyperParams(**hp) if hp else None,
        )


def _atomic(path: Path, write, sidecar: bool = False) -> None:
    """Write via a temp name in the same directory, then rename into place."""
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)
    if sidecar:
        os.replace(f"{tmp}.json", f"{path}.json")
