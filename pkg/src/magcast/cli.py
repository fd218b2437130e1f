"""``magcast`` command line: ingest, synth, search, train, evaluate, predict, compare."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import ingest
from .dataset import PRESETS, FeatureSpec, SplitSpec, WindowConfig, split_then_window
from .evaluation import EvalReport, evaluate, save_report, write_comparison_csv
from .features import destandardize_array, standardize
from .nn import forward
from .optim import MAX_EPOCHS, HyperParams, train_from_hyperparams
from .pipeline import ModelBundle, prepare, with_calendar
from .search import GRACE_EPOCHS, N_TRIALS, SearchSpace, run_search
from .synthetic import SynthConfig, generate_synthetic
from .timetable import TimeTable, read_csv, write_csv

log = logging.getLogger("magcast")


def _atomic_write(path: str | os.PathLike, write) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def _features(args) -> FeatureSpec:
    targets = tuple(args.targets.split(",")) if args.targets else None
    spec = FeatureSpec.from_preset(args.features, targets) if targets else FeatureSpec.from_preset(args.features)
    return spec.without_calendar() if getattr(args, "no_calendar", False) else spec


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="canonical CSV table")
    p.add_argument("--features", choices=sorted(PRESETS), default="base")
    p.add_argument("--no-calendar", action="store_true", help="drop the year/day/hour sinusoid inputs")
    p.add_argument("--targets", help="comma-separated target columns (default: AE,AU,AL,Dst,F10.7,Kp)")
    p.add_argument("--history", type=int, default=6, help="T_h, past samples before the anchor")
    p.add_argument("--lead", type=int, default=6, help="T_p, hours predicted")
    p.add_argument("--split", type=float, nargs=3, default=(0.6, 0.1, 0.3), metavar=("TRAIN", "VAL", "TEST"))


def cmd_ingest(args) -> None:
    tables = []
    if args.omni:
        if not args.colmap:
            raise ValueError("--omni needs --colmap")
        colmap = ingest.ColumnMap.from_json(args.colmap)
        with open(args.omni) as fh:
            tables.append(ingest.parse_columnar(fh, colmap))
    if args.sdarn:
        with open(args.sdarn) as fh:
            tables.append(ingest.resample_hourly(ingest.parse_superdarn(fh)))
    if not tables:
        raise ValueError("nothing to ingest: pass --omni and/or --sdarn")
    if len(tables) > 1 and not args.align:
        raise ValueError("several sources given; pass --align to intersect them")
    table = ingest.align(tables) if len(tables) > 1 else tables[0]
    _atomic_write(args.out, lambda p: write_csv(table, p))
    log.info("wrote %d rows x %d columns to %s", len(table), len(table.columns), args.out)


def cmd_synth(args) -> None:
    table = generate_synthetic(SynthConfig(length=args.length, noise_std=args.noise_std, seed=args.seed))
    _atomic_write(args.out, lambda p: write_csv(table, p))


def cmd_search(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    features = _features(args)
    prep = prepare(read_csv(args.data), features, WindowConfig(args.history, args.lead), SplitSpec(*args.split))
    log.info("windows: train %d, val %d, test %d", len(prep.train), len(prep.val), len(prep.test))
    space = SearchSpace.from_json(args.space) if isinstance(args.space, dict) else SearchSpace()
    ledger_tmp = out / "ledger.jsonl.tmp"
    result = run_search(
        prep.train, prep.val, space,
        n_trials=args.trials, seed=args.seed, max_epochs=args.max_epochs,
        grace_epochs=args.grace_epochs, workers=args.workers, ledger_path=ledger_tmp,
    )
    os.replace(ledger_tmp, out / "ledger.jsonl")
    ModelBundle(result.params, prep.scaler, features, prep.train.window, result.hyperparams).save(out / "model")
    _atomic_write(out / "best.json", lambda p: Path(p).write_text(json.dumps({"trial": result.trial, **asdict(result.hyperparams)}, indent=2)))
    report = evaluate(result.params, prep.test, prep.scaler)
    _write_report(report, out / "report")
    print(report.format(), end="")


def cmd_train(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    features = _features(args)
    prep = prepare(read_csv(args.data), features, WindowConfig(args.history, args.lead), SplitSpec(*args.split))
    hp = HyperParams(args.lr, args.weight_decay, args.batch_size, args.hidden_dim, args.num_layers, args.seed)
    hist_tmp = out / "history.csv.tmp"
    params, hist = train_from_hyperparams(prep.train, prep.val, hp, max_epochs=args.max_epochs, history_out=hist_tmp)
    os.replace(hist_tmp, out / "history.csv")
    ModelBundle(params, prep.scaler, features, prep.train.window, hp).save(out / "model")
    report = evaluate(params, prep.test, prep.scaler)
    _write_report(report, out / "report")
    print(report.format(), end="")


def _write_report(report: EvalReport, stem: Path) -> None:
    tmp = stem.with_name(stem.name + ".tmp")
    save_report(report, tmp)
    for ext in (".csv", ".json"):
        os.replace(f"{tmp}{ext}", f"{stem}{ext}")


def cmd_evaluate(args) -> None:
    bundle = ModelBundle.load(args.model)
    table = standardize(with_calendar(read_csv(args.data)), bundle.scaler)
    _, _, test = split_then_window(table, bundle.features, bundle.window, SplitSpec(*args.split))
    report = evaluate(bundle.params, test, bundle.scaler)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _write_report(report, Path(args.out))
    print(report.format(), end="")


def forecast_latest(bundle: ModelBundle, table: TimeTable) -> TimeTable:
    """Forecast the T_p hours after the table's last row."""
    need = bundle.window.input_length
    table = with_calendar(table)
    if len(table) < need:
        raise ValueError(f"need at least {need} trailing hourly rows (T_h + 1), table has {len(table)}")
    tail = table.take(slice(len(table) - need, None))
    hours = tail.hours
    if np.any(np.diff(hours) != 1):
        raise ValueError(f"the last {need} rows must be consecutive hours")
    cols = bundle.features.input_columns
    window = tail.select(cols)
    if window.missing.any():
        bad = sorted({cols[j] for j in np.flatnonzero(window.missing.any(axis=0))})
        raise ValueError(f"missing values in the trailing {need}-row window (columns {bad})")
    x = standardize(tail, bundle.scaler).select(cols).values
    pred, _ = forward(x, bundle.params)
    phys = destandardize_array(pred, bundle.scaler, bundle.features.target_columns)
    lead_hours = hours[-1] + np.arange(1, bundle.window.lead + 1)
    return TimeTable.from_hours(lead_hours, bundle.features.target_columns, phys)


def cmd_predict(args) -> None:
    bundle = ModelBundle.load(args.model)
    forecast = forecast_latest(bundle, read_csv(args.data))
    if args.out:
        _atomic_write(args.out, lambda p: write_csv(forecast, p))
    else:
        write_csv(forecast, sys.stdout)


def cmd_compare(args) -> None:
    reports = {}
    for item in args.report:
        name, _, path = item.partition("=")
        if not path:
            raise ValueError(f"--report expects NAME=PATH, got {item!r}")
        with open(path) as fh:
            reports[name] = EvalReport.from_json(json.load(fh))
    _atomic_write(args.out, lambda p: write_comparison_csv(reports, p))


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="magcast", description="Geomagnetic index forecasting with an LSTM.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--config", help="JSON file of option defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["ingest"] = sub.add_parser("ingest", help="parse raw text sources into a canonical CSV")
    p.add_argument("--omni", help="whitespace-delimited year/doy/hour text file")
    p.add_argument("--colmap", help="JSON column map for --omni")
    p.add_argument("--sdarn", help="5-minute CPP/PCR text file (resampled to hourly)")
    p.add_argument("--align", action="store_true", help="keep only hours present in every source")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = subs["synth"] = sub.add_parser("synth", help="write a synthetic coupled dataset")
    p.add_argument("--length", type=int, default=5000)
    p.add_argument("--noise-std", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = subs["search"] = sub.add_parser("search", help="random search, select by validation loss, report on test")
    _add_data_args(p)
    p.add_argument("--trials", type=int, default=N_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grace-epochs", type=int, default=GRACE_EPOCHS)
    p.add_argument("--max-epochs", type=int, default=MAX_EPOCHS)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_search, space=None)

    p = subs["train"] = sub.add_parser("train", help="train one configuration")
    _add_data_args(p)
    p.add_argument("--lr", type=float, default=3.68e-3)
    p.add_argument("--weight-decay", type=float, default=9.7e-8)
    p.add_argument("--batch-size", type=int, default=502)
    p.add_argument("--hidden-dim", type=int, default=58)
    p.add_argument("--num-layers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=MAX_EPOCHS)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = subs["evaluate"] = sub.add_parser("evaluate", help="score a saved model on the test block")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", type=float, nargs=3, default=(0.6, 0.1, 0.3), metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--out", help="report path stem (writes .csv and .json)")
    p.set_defaults(func=cmd_evaluate)

    p = subs["predict"] = sub.add_parser("predict", help="forecast the hours after the latest row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="forecast CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = subs["compare"] = sub.add_parser("compare", help="tabulate model Pearson across feature sets")
    p.add_argument("--report", action="append", required=True, help="NAME=report.json (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        subs[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except OSError as exc:
        print(f"magcast: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"magcast: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
