"""Random hyperparameter search with the median stopping rule."""
from __future__ import annotations

import json
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .dataset import WindowSet
from .nn import LstmParams
from .optim import MAX_EPOCHS, HyperParams, TrainingDiverged, train_from_hyperparams

log = logging.getLogger(__name__)

GRACE_EPOCHS = 50
N_TRIALS = 100


@dataclass(frozen=True)
class SearchSpace:
    lr: tuple[float, float] = (1e-6, 1e-1)  # log-uniform
    weight_decay: tuple[float, float] = (1e-9, 1e-1)  # log-uniform
    batch_size: tuple[int, int] = (64, 2048)
    hidden_dim: tuple[int, int] = (16, 128)
    num_layers: tuple[int, int] = (1, 3)

    def __post_init__(self):
        for name in ("lr", "weight_decay", "batch_size", "hidden_dim", "num_layers"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} bounds out of order: {(lo, hi)}")
        if self.lr[0] <= 0 or self.weight_decay[0] <= 0:
            raise ValueError("log-uniform bounds must be positive")
        if min(self.batch_size[0], self.hidden_dim[0], self.num_layers[0]) < 1:
            raise ValueError("integer bounds must be >= 1")

    def contains(self, hp: HyperParams) -> bool:
        return all(
            lo <= getattr(hp, name) <= hi
            for name, (lo, hi) in asdict(self).items()
        )

    @classmethod
    def from_json(cls, d: dict) -> "SearchSpace":
        return cls(**{k: tuple(v) for k, v in d.items()})


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(10.0 ** rng.uniform(math.log10(lo), math.log10(hi)))


def sample_hyperparams(space: SearchSpace, rng: np.random.Generator, seed: int = 0) -> HyperParams:
    """Draw one configuration; lr and weight decay are uniform in log10."""
    lr = _log_uniform(rng, *space.lr)
    wd = _log_uniform(rng, *space.weight_decay)
    batch = int(rng.integers(space.batch_size[0], space.batch_size[1], endpoint=True))
    hidden = int(rng.integers(space.hidden_dim[0], space.hidden_dim[1], endpoint=True))
    layers = int(rng.integers(space.num_layers[0], space.num_layers[1], endpoint=True))
    # clamp so degenerate spaces return exactly their bound
    lr = min(max(lr, space.lr[0]), space.lr[1])
    wd = min(max(wd, space.weight_decay[0]), space.weight_decay[1])
    return HyperParams(lr, wd, batch, hidden, layers, seed)


def seed_for_trial(master_seed: int, trial: int) -> int:
    """Pure map from (master seed, trial index) to the trial's own seed."""
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1, np.uint32)[0])


_FINAL = {"completed", "stopped", "diverged"}


@dataclass
class TrialRecord:
    hyperparams: HyperParams
    status: str = "running"
    val_losses: list[float] = field(default_factory=list)
    running_avg: list[float] = field(default_factory=list)
    best_val_loss: float = math.inf


class TrialLedger:
    """Cross-trial state shared by the stopping rule; optionally mirrored to JSON lines.

    Every mutation is one event: ``start``, ``epoch`` or ``end``.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.trials: dict[int, TrialRecord] = {}
        self.events: list[dict] = []
        self.path = path
        self._lock = threading.Lock()
        if path is not None:
            open(path, "w").close()

    def _emit(self, event: dict) -> None:
        self.events.append(event)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(event) + "\n")

    def start(self, trial: int, hp: HyperParams) -> None:
        with self._lock:
            if trial in self.trials:
                raise ValueError(f"trial {trial} already started")
            self.trials[trial] = TrialRecord(hp)
            self._emit({"event": "start", "trial": trial, "hyperparams": asdict(hp)})

    def record_epoch(self, trial: int, val_loss: float) -> int:
        with self._lock:
            rec = self.trials[trial]
            if rec.status != "running":
                raise ValueError(f"trial {trial} is already {rec.status}")
            n = len(rec.val_losses)
            prev = rec.running_avg[-1] if n else 0.0
            rec.val_losses.append(float(val_loss))
            rec.running_avg.append((prev * n + float(val_loss)) / (n + 1))
            rec.best_val_loss = min(rec.best_val_loss, float(val_loss))
            return n + 1

    def note_decision(self, trial: int, epoch: int, decision: str) -> None:
        with self._lock:
            rec = self.trials[trial]
            self._emit({
                "event": "epoch", "trial": trial, "epoch": epoch,
                "val_loss": rec.val_losses[epoch - 1], "running_avg": rec.running_avg[epoch - 1],
                "decision": decision,
            })

    def finish(self, trial: int, status: str) -> None:
        if status not in _FINAL:
            raise ValueError(f"bad final status {status!r}")
        with self._lock:
            rec = self.trials[trial]
            if rec.status != "running":
                raise ValueError(f"trial {trial} is already {rec.status}")
            rec.status = status
            best = rec.best_val_loss if math.isfinite(rec.best_val_loss) else None
            self._emit({"event": "end", "trial": trial, "status": status, "best_val_loss": best})

    def running_averages_at(self, epoch: int, exclude: int) -> list[float]:
        with self._lock:
            return [
                r.running_avg[epoch - 1]
                for t, r in self.trials.items()
                if t != exclude and len(r.running_avg) >= epoch
            ]

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TrialLedger":
        """Rebuild a ledger from its JSON-lines file (the file is not rewritten)."""
        ledger = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    ledger.apply(json.loads(line))
        ledger.path = path
        return ledger

    def apply(self, ev: dict) -> None:
        kind, trial = ev["event"], ev["trial"]
        if kind == "start":
            self.start(trial, HyperParams(**ev["hyperparams"]))
        elif kind == "epoch":
            self.record_epoch(trial, ev["val_loss"])
            self.note_decision(trial, ev["epoch"], ev["decision"])
        elif kind == "end":
            self.finish(trial, ev["status"])
        else:
            raise ValueError(f"unknown ledger event {kind!r}")


def median_stop_decision(ledger: TrialLedger, trial: int, epoch: int, grace_epochs: int = GRACE_EPOCHS) -> str:
    """``"stop"`` iff past the grace period and this trial's running-average
    validation loss is strictly above the median of the other trials' running
    averages at the same epoch; otherwise ``"continue"``."""
    if epoch < grace_epochs:
        return "continue"
    others = ledger.running_averages_at(epoch, exclude=trial)
    if not others:
        return "continue"
    current = ledger.trials[trial].running_avg[epoch - 1]
    return "stop" if current > float(np.median(others)) else "continue"


class SearchResult(NamedTuple):
    params: LstmParams
    hyperparams: HyperParams
    ledger: TrialLedger
    trial: int


Trainer = Callable[..., tuple]


def run_search(
    train_set: WindowSet,
    val_set: WindowSet,
    space: SearchSpace = SearchSpace(),
    n_trials: int = N_TRIALS,
    seed: int = 0,
    max_epochs: int = MAX_EPOCHS,
    grace_epochs: int = GRACE_EPOCHS,
    workers: int = 1,
    ledger_path: str | os.PathLike | None = None,
    trainer: Optional[Trainer] = None,
) -> SearchResult:
    """Train ``n_trials`` sampled configurations and keep the best by validation loss.

    Trials run in index order when ``workers == 1`` (bitwise reproducible);
    otherwise concurrently, each consulting whatever the ledger holds.
    ``trainer(train_set, val_set, hp, stopper=..., max_epochs=...)`` defaults to
    ``train_from_hyperparams``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trainer = trainer or train_from_hyperparams
    ledger = TrialLedger(ledger_path)
    results: dict[int, tuple[LstmParams, float]] = {}

    def run_trial(i: int) -> None:
        trial_seed = seed_for_trial(seed, i)
        hp = sample_hyperparams(space, np.random.default_rng(trial_seed), seed=trial_seed)
        ledger.start(i, hp)

        def stopper(epoch: int, val_losses: list) -> bool:
            ledger.record_epoch(i, val_losses[-1])
            decision = median_stop_decision(ledger, i, epoch, grace_epochs)
            ledger.note_decision(i, epoch, decision)
            return decision == "stop"

        try:
            params, hist = trainer(train_set, val_set, hp, stopper=stopper, max_epochs=max_epochs)
        except TrainingDiverged as exc:
            ledger.finish(i, "diverged")
            log.info("trial %d diverged: %s", i, exc)
            return
        ledger.finish(i, hist.status)
        results[i] = (params, hist.best_val_loss)
        log.info("trial %d %s after %d epochs, best val %.5g (%s)", i, hist.status, len(hist), hist.best_val_loss, hp)

    if workers <= 1:
        for i in range(n_trials):
            run_trial(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_trial, range(n_trials)))

    if not results:
        raise RuntimeError(f"all {n_trials} trials diverged")
    best = min(results, key=lambda i: (results[i][1], i))
    return SearchResult(results[best][0], ledger.trials[best].hyperparams, ledger, best)
