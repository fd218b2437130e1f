"""MSE loss, Adam with coupled L2 weight decay, and the epoch training loop."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from .dataset import WindowSet
from .nn import Dims, LstmParams, backward, forward, init_params

log = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
MAX_EPOCHS = 1350


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


class NonFiniteError(FloatingPointError):
    pass


def _check_finite(g, params):
    if np.all(np.isfinite(g)):
        return
    if isinstance(params, LstmParams):
        for name, sl in params.slices().items():
            if not np.all(np.isfinite(g[sl])):
                raise NonFiniteError(f"non-finite gradient in {name}")
    raise NonFiniteError("non-finite gradient")


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """One Adam update; returns ``(new_params, new_state)`` and leaves inputs untouched.

    ``params``/``grads`` are either ``LstmParams`` or plain arrays. Weight decay
    is added to the gradient before the moment updates.
    """
    if lr <= 0 or weight_decay < 0:
        raise ValueError(f"need lr > 0 and weight_decay >= 0, got {lr}, {weight_decay}")
    is_model = isinstance(params, LstmParams)
    p = params.vector if is_model else np.asarray(params, float)
    g = grads.vector if isinstance(grads, LstmParams) else np.asarray(grads, float)
    if g.shape != p.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
    _check_finite(g, params)
    if weight_decay:
        g = g + weight_decay * p
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_p = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.beta1, state.beta2, state.eps)
    return (params.like(new_p) if is_model else new_p), new_state


@dataclass(frozen=True)
class HyperParams:
    lr: float
    weight_decay: float
    batch_size: int
    hidden_dim: int
    num_layers: int
    seed: int

    def __post_init__(self):
        if not self.lr > 0 or self.weight_decay < 0:
            raise ValueError(f"invalid lr/weight_decay in {self}")
        if self.batch_size < 1 or self.hidden_dim < 1 or self.num_layers < 1:
            raise ValueError(f"invalid integer hyperparameter in {self}")

    def dims(self, data: WindowSet) -> Dims:
        return Dims(len(data.input_columns), self.hidden_dim, self.num_layers, data.window.lead, len(data.target_columns))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    status: str = "running"  # running | completed | stopped | diverged
    best_epoch: int = 0  # 1-based; 0 until the first epoch finishes

    def __len__(self) -> int:
        return len(self.val_loss)

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else float("inf")


class TrainingDiverged(FloatingPointError):
    def __init__(self, message: str, history: TrainHistory, best: Optional[LstmParams]):
        super().__init__(message)
        self.history = history
        self.best = best


def predict(params: LstmParams, data: WindowSet, chunk: int = 4096) -> np.ndarray:
    out = [forward(data.inputs[i:i + chunk], params)[0] for i in range(0, len(data), chunk)]
    return np.concatenate(out) if out else np.zeros((0, params.dims.lead, params.dims.n_target))


def batch_gradient(params: LstmParams, inputs: np.ndarray, targets: np.ndarray) -> tuple[float, LstmParams]:
    """Batch-mean MSE and its gradient."""
    pred, cache = forward(inputs, params)
    diff = pred - targets
    loss = float(np.mean(diff * diff))
    return loss, backward(cache, (2.0 / diff.size) * diff, params)


Stopper = Callable[[int, list], bool]


def train(
    model: LstmParams,
    train_set: WindowSet,
    val_set: WindowSet,
    hp: HyperParams,
    stopper: Optional[Stopper] = None,
    rng: Optional[np.random.Generator] = None,
    max_epochs: int = MAX_EPOCHS,
    history_out: str | os.PathLike | TextIO | None = None,
) -> tuple[LstmParams, TrainHistory]:
    """Mini-batch Adam on batch-mean MSE; returns the best-validation snapshot.

    ``stopper(epoch, val_losses)`` is consulted after every epoch and ends the
    run when it returns True. A non-finite loss raises ``TrainingDiverged``.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = rng if rng is not None else np.random.default_rng(hp.seed)
    params = model.copy()
    state = AdamState.zeros(len(params))
    hist = TrainHistory()
    best = params.copy()
    fh, writer = _history_writer(history_out)
    try:
        n = len(train_set)
        for epoch in range(1, max_epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, hp.batch_size):
                idx = order[start:start + hp.batch_size]
                loss, grads = batch_gradient(params, train_set.inputs[idx], train_set.targets[idx])
                if not np.isfinite(loss):
                    break
                total += loss * len(idx)
                try:
                    params, state = adam_step(params, grads, state, hp.lr, hp.weight_decay)
                except NonFiniteError:
                    loss = float("nan")
                    break
            train_loss = total / n if np.isfinite(loss) else float("nan")
            val_loss = mse(predict(params, val_set), val_set.targets) if np.isfinite(train_loss) else float("nan")
            if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
                hist.status = "diverged"
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", hist, best if hist.best_epoch else None)
            hist.train_loss.append(train_loss)
            hist.val_loss.append(val_loss)
            if writer:
                writer.writerow([epoch, repr(train_loss), repr(val_loss)])
            if val_loss < hist.best_val_loss:
                hist.best_epoch = epoch
                best = params.copy()
            if stopper is not None and stopper(epoch, hist.val_loss):
                hist.status = "stopped"
                log.debug("stopped at epoch %d (val %.5g)", epoch, val_loss)
                return best, hist
        hist.status = "completed"
        return best, hist
    finally:
        if fh is not None and fh is not history_out:
            fh.close()


def _history_writer(dest):
    if dest is None:
        return None, None
    fh = open(dest, "w", newline="") if isinstance(dest, (str, os.PathLike)) else dest
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_loss"])
    return fh, w


def train_from_hyperparams(train_set: WindowSet, val_set: WindowSet, hp: HyperParams, **kw):
    """Initialise from ``hp.seed`` and train; shuffling draws from the same seeded stream."""
    rng = np.random.default_rng(hp.seed)
    model = init_params(hp.dims(train_set), int(rng.integers(2**63 - 1)))
    return train(model, train_set, val_set, hp, rng=rng, **kw)
