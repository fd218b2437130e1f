"""Multi-index geomagnetic forecasting with a from-scratch LSTM."""
from .dataset import FeatureSpec, SplitSpec, WindowConfig, WindowSet, assemble_windows, sequential_split, split_then_window
from .evaluation import EvalReport, evaluate, pearson, persistence_forecast, r_squared
from .features import Scaler, calendar_signals, destandardize, fit_scaler, standardize
from .ingest import ColumnMap, ColumnSpec, align, parse_columnar, parse_superdarn, resample_hourly
from .nn import Dims, LstmParams, backward, cell_forward, forward, init_params
from .optim import AdamState, HyperParams, TrainHistory, adam_step, mse, train
from .search import SearchSpace, TrialLedger, median_stop_decision, run_search, sample_hyperparams
from .synthetic import SynthConfig, generate_synthetic
from .timetable import TimeTable, Timestamp, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ColumnMap", "ColumnSpec", "Dims", "EvalReport", "FeatureSpec", "HyperParams", "LstmParams",
    "Scaler", "SearchSpace", "SplitSpec", "SynthConfig", "TimeTable", "Timestamp", "TrainHistory", "TrialLedger",
    "WindowConfig", "WindowSet", "adam_step", "align", "assemble_windows", "backward", "calendar_signals",
    "cell_forward", "destandardize", "evaluate", "fit_scaler", "forward", "generate_synthetic", "init_params",
    "median_stop_decision", "mse", "parse_columnar", "parse_superdarn", "pearson", "persistence_forecast",
    "r_squared", "read_csv", "resample_hourly", "run_search", "sample_hyperparams", "sequential_split",
    "split_then_window", "standardize", "train", "write_csv",
]
