"""Forecasting monthly import volumes with an additive changepoint model and an LSTM."""

from .errors import (BacktestError, ConfigError, ConvergenceError, ImportcastError,
                     InfeasiblePlanError, NumericError, RowError, SchemaError, UsageError)
from .series import MonthStamp, Scaler, TimeSeries, Unit, WindowedDataset

__all__ = [
    "BacktestError", "ConfigError", "ConvergenceError", "ImportcastError",
    "InfeasiblePlanError", "NumericError", "RowError", "SchemaError", "UsageError",
    "MonthStamp", "Scaler", "TimeSeries", "Unit", "WindowedDataset",
]
__version__ = "0.1.0"
