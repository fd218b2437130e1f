"""Persistence baseline, Pearson / R^2 metrics and Table-style reports."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from typing import Mapping, TextIO

import numpy as np

from .dataset import WindowSet
from .features import Scaler, destandardize_array
from .nn import LstmParams
from .optim import predict


class UndefinedMetricError(ValueError):
    pass


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise UndefinedMetricError("need at least 2 points")
    return a, b


def pearson(a, b) -> float:
    a, b = _pair(a, b)
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.mean(da * da)), np.sqrt(np.mean(db * db))
    if sa == 0 or sb == 0:
        raise UndefinedMetricError("pearson undefined for a zero-variance input")
    return float(np.mean(da * db) / (sa * sb))


def r_squared(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    ss_tot = np.sum((actual - actual.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 undefined for constant actual values")
    return float(1.0 - np.sum((actual - pred) ** 2) / ss_tot)


def persistence_forecast(windows: WindowSet) -> np.ndarray:
    """Repeat each target's value at the anchor hour across all lead times.

    Works on whatever units ``windows`` holds; output is (N, T_p, K).
    """
    missing = [c for c in windows.target_columns if c not in windows.input_columns]
    if missing:
        raise ValueError(
            f"persistence needs the historical targets {missing} among the inputs; "
            "build the baseline from the 'base' feature preset"
        )
    idx = [windows.input_columns.index(c) for c in windows.target_columns]
    last = windows.inputs[:, -1, idx]  # (N, K)
    return np.repeat(last[:, None, :], windows.window.lead, axis=1)


@dataclass
class EvalReport:
    """Metrics indexed [target, horizon - 1]."""

    targets: tuple[str, ...]
    model_pearson: np.ndarray
    model_r2: np.ndarray
    persistence_pearson: np.ndarray | None
    persistence_r2: np.ndarray | None
    n_points: int

    @property
    def horizons(self) -> int:
        return self.model_pearson.shape[1]

    def table_rows(self) -> list[list]:
        """Rows ``Hrs, <idx>_mnet, <idx>_pers, ...`` like the published layout."""
        rows = []
        for h in range(self.horizons):
            row: list = [h + 1]
            for k in range(len(self.targets)):
                row.append(float(self.model_pearson[k, h]))
                row.append(float(self.persistence_pearson[k, h]) if self.persistence_pearson is not None else None)
            rows.append(row)
        return rows

    def header(self) -> list[str]:
        return ["hrs", *(f"{t}_{m}" for t in self.targets for m in ("mnet", "pers"))]

    def write_csv(self, dest: str | os.PathLike | TextIO) -> None:
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", newline="") as fh:
                return self.write_csv(fh)
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(self.header())
        for row in self.table_rows():
            w.writerow([row[0], *("NA" if v is None else f"{v:.6f}" for v in row[1:])])

    def to_json(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "targets": list(self.targets),
            "n_points": self.n_points,
            "model_pearson": arr(self.model_pearson),
            "model_r2": arr(self.model_r2),
            "persistence_pearson": arr(self.persistence_pearson),
            "persistence_r2": arr(self.persistence_r2),
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        def arr(x):
            return None if x is None else np.asarray(x, dtype=float)

        return cls(tuple(d["targets"]), arr(d["model_pearson"]), arr(d["model_r2"]),
                   arr(d["persistence_pearson"]), arr(d["persistence_r2"]), int(d["n_points"]))

    def format(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def metric_grid(pred: np.ndarray, actual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson and R^2 for each (target, horizon) over the window axis."""
    _, tp, k = actual.shape
    rho = np.empty((k, tp))
    r2 = np.empty((k, tp))
    for j in range(k):
        for h in range(tp):
            rho[j, h] = pearson(pred[:, h, j], actual[:, h, j])
            r2[j, h] = r_squared(pred[:, h, j], actual[:, h, j])
    return rho, r2


def evaluate(model: LstmParams | None, test: WindowSet, scaler: Scaler | None, predictions: np.ndarray | None = None) -> EvalReport:
    """Score model and persistence forecasts in physical units.

    ``test`` holds standardized windows; ``scaler`` undoes that for targets and
    for the anchor-hour inputs used by persistence. Precomputed standardized
    ``predictions`` may be supplied instead of a model. Persistence columns are
    None when the targets are not among the inputs.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    if predictions is None:
        if model.dims.n_input != len(test.input_columns) or model.dims.lead != test.window.lead or model.dims.n_target != len(test.target_columns):
            raise ValueError(f"model dims {model.dims} do not match the window set")
        predictions = predict(model, test)

    def phys(x):
        return x if scaler is None else destandardize_array(x, scaler, test.target_columns)

    actual = phys(test.targets)
    rho, r2 = metric_grid(phys(predictions), actual)
    p_rho = p_r2 = None
    if all(c in test.input_columns for c in test.target_columns):
        p_rho, p_r2 = metric_grid(phys(persistence_forecast(test)), actual)
    return EvalReport(test.target_columns, rho, r2, p_rho, p_r2, len(test))


def comparison_rows(reports: Mapping[str, EvalReport]) -> tuple[list[str], list[list]]:
    """Model Pearson per horizon for several feature sets (one column per set x target)."""
    names = list(reports)
    targets = reports[names[0]].targets
    header = ["hrs", *(f"{t}_{n}" for t in targets for n in names)]
    horizons = reports[names[0]].horizons
    rows = []
    for h in range(horizons):
        row: list = [h + 1]
        for k, t in enumerate(targets):
            for n in names:
                rep = reports[n]
                row.append(float(rep.model_pearson[rep.targets.index(t), h]))
        rows.append(row)
    return header, rows


def write_comparison_csv(reports: Mapping[str, EvalReport], dest: str | os.PathLike) -> None:
    header, rows = comparison_rows(reports)
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0], *(f"{v:.6f}" for v in row[1:])])


def save_report(report: EvalReport, stem: str | os.PathLike) -> None:
    """Write ``<stem>.csv`` and ``<stem>.json``."""
    stem = os.fspath(stem)
    report.write_csv(stem + ".csv")
    with open(stem + ".json", "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
