"""Seeded coupled series for desk-scale checks.

Inputs are independent stationary AR(1) processes; each target at hour t is a
fixed linear combination of the inputs at t-1, t-2, t-3 plus Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import INDICES, SOLAR_WIND
from .timetable import TimeTable, calendar_to_epoch_hour

AR_COEF = 0.8
N_LAGS = 3


@dataclass(frozen=True)
class SynthConfig:
    length: int = 5000
    # (K, N_LAGS * D); column (lag - 1) * D + d weights input d at lag `lag`
    lag_coefficients: Optional[np.ndarray] = None
    noise_std: float = 0.2
    seed: int = 0
    input_columns: tuple[str, ...] = SOLAR_WIND
    target_columns: tuple[str, ...] = INDICES
    start_hour: int = field(default_factory=lambda: int(calendar_to_epoch_hour(2000, 1, 0)))

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.length < 1:
            raise ValueError("length must be positive")
        if self.lag_coefficients is not None:
            shape = np.shape(self.lag_coefficients)
            want = (len(self.target_columns), N_LAGS * len(self.input_columns))
            if shape != want:
                raise ValueError(f"lag_coefficients shape {shape} != {want}")


def lag_covariance(n_inputs: int, phi: float = AR_COEF) -> np.ndarray:
    """Covariance of the stacked lag vector [x_{t-1}; x_{t-2}; x_{t-3}] for unit innovations."""
    var = 1.0 / (1.0 - phi * phi)
    lags = np.arange(N_LAGS)
    block = var * phi ** np.abs(lags[:, None] - lags[None, :])
    return np.kron(block, np.eye(n_inputs))


def default_coefficients(n_targets: int, n_inputs: int, seed: int = 0) -> np.ndarray:
    """Random couplings scaled so each target's noiseless signal has unit variance."""
    c = np.random.default_rng(seed).normal(size=(n_targets, N_LAGS * n_inputs))
    var = np.einsum("ki,ij,kj->k", c, lag_covariance(n_inputs), c)
    return c / np.sqrt(var)[:, None]


def signal_std(coefficients: np.ndarray, n_inputs: int) -> np.ndarray:
    return np.sqrt(np.einsum("ki,ij,kj->k", coefficients, lag_covariance(n_inputs), coefficients))


def coefficients_for(cfg: SynthConfig) -> np.ndarray:
    if cfg.lag_coefficients is not None:
        return np.asarray(cfg.lag_coefficients, dtype=np.float64)
    return default_coefficients(len(cfg.target_columns), len(cfg.input_columns), cfg.seed)


def generate_synthetic(cfg: SynthConfig) -> TimeTable:
    rng = np.random.default_rng(cfg.seed)
    d = len(cfg.input_columns)
    coef = coefficients_for(cfg)
    n = cfg.length + N_LAGS
    x = np.empty((n, d))
    x[0] = rng.normal(size=d) / np.sqrt(1.0 - AR_COEF**2)  # stationary start
    eps = rng.normal(size=(n - 1, d))
    for t in range(1, n):
        x[t] = AR_COEF * x[t - 1] + eps[t - 1]
    # lagged[t] = [x[t-1], x[t-2], x[t-3]] for t >= N_LAGS
    lagged = np.hstack([x[N_LAGS - lag:n - lag] for lag in range(1, N_LAGS + 1)])
    y = lagged @ coef.T + cfg.noise_std * rng.normal(size=(cfg.length, len(cfg.target_columns)))
    hours = cfg.start_hour + np.arange(cfg.length)
    return TimeTable.from_hours(hours, cfg.input_columns + cfg.target_columns, np.hstack([x[N_LAGS:], y]))
