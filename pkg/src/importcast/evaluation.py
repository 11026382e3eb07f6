"""MSE/RMSE metrics and rolling-origin backtesting."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Protocol, Sequence, TextIO

import numpy as np

from .errors import BacktestError, InfeasiblePlanError, UsageError
from .series import TimeSeries


def _pair(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float).reshape(-1)
    a = np.asarray(actual, dtype=float).reshape(-1)
    if p.size != a.size:
        raise UsageError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise UsageError("cannot score empty vectors")
    return p, a


def mse(predicted, actual) -> float:
    p, a = _pair(predicted, actual)
    return float(np.mean((p - a) ** 2))


def rmse(predicted, actual) -> float:
    return math.sqrt(mse(predicted, actual))


@dataclass(frozen=True)
class MetricPair:
    mse: float
    rmse: float

    @classmethod
    def of(cls, predicted, actual) -> MetricPair:
        m = mse(predicted, actual)
        return cls(m, math.sqrt(m))

    @classmethod
    def from_squared_errors(cls, sq: np.ndarray) -> MetricPair:
        m = float(np.mean(sq))
        return cls(m, math.sqrt(m))


class Forecaster(Protocol):
    """Anything the backtest can drive.

    ``fit`` only ever sees the history before the cutoff; ``forecast``
    returns ``horizon`` values in the series' own units.
    """

    name: str

    def fit(self, history: TimeSeries) -> Any: ...

    def forecast(self, state: Any, horizon: int) -> np.ndarray: ...


class NaiveForecaster:
    """Repeats the last observed value."""

    name = "naive"

    def fit(self, history: TimeSeries) -> float:
        return float(history.values[-1])

    def forecast(self, state: float, horizon: int) -> np.ndarray:
        return np.full(horizon, state)


def default_min_train(horizon: int) -> int:
    return max(2 * horizon, 12)


def plan_cutoffs(n_points: int, K: int, horizon: int, min_train: int | None = None) -> list[int]:
    """``K`` evenly spaced cutoffs; the last one leaves exactly ``horizon`` points.

    A cutoff ``c`` means: fit on indices ``[0, c)``, forecast ``[c, c+horizon)``.
    """
    if K < 1:
        raise UsageError("K must be at least 1")
    if horizon < 1:
        raise UsageError("horizon must be at least 1")
    min_train = default_min_train(horizon) if min_train is None else min_train
    if min_train < 1:
        raise UsageError("min_train must be at least 1")
    last = n_points - horizon
    if last < min_train:
        raise InfeasiblePlanError(K, 0)
    span = last - min_train
    if K > span + 1:
        raise InfeasiblePlanError(K, span + 1)
    if K == 1:
        return [last]
    # anchored at the last cutoff, stepping back by span/(K-1) rounded down
    return [last - ((K - 1 - i) * span) // (K - 1) for i in range(K)]


@dataclass(frozen=True, eq=False)
class CutoffResult:
    cutoff: int
    forecast: np.ndarray
    actual: np.ndarray
    metrics: MetricPair

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.cutoff, self.cutoff + self.forecast.size)

    @property
    def squared_errors(self) -> np.ndarray:
        return (self.forecast - self.actual) ** 2


@dataclass(frozen=True, eq=False)
class BacktestReport:
    model_name: str
    horizon: int
    cutoffs: list[int]
    per_cutoff: list[CutoffResult]
    aggregate: MetricPair
    n_points: int

    def pooled_squared_errors(self) -> np.ndarray:
        return np.concatenate([r.squared_errors for r in self.per_cutoff])

    def check_no_leakage(self) -> bool:
        """Every forecast index lies at or after its cutoff and inside the series."""
        if any(b <= a for a, b in zip(self.cutoffs, self.cutoffs[1:])):
            return False
        for r in self.per_cutoff:
            idx = r.indices
            if idx.size != self.horizon or idx.min() < r.cutoff or idx.max() >= self.n_points:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "horizon": self.horizon,
            "n_points": self.n_points,
            "cutoffs": list(self.cutoffs),
            "per_cutoff": [
                {
                    "cutoff": r.cutoff,
                    "forecast": r.forecast.tolist(),
                    "actual": r.actual.tolist(),
                    "mse": r.metrics.mse,
                    "rmse": r.metrics.rmse,
                }
                for r in self.per_cutoff
            ],
            "aggregate": {"mse": self.aggregate.mse, "rmse": self.aggregate.rmse},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> BacktestReport:
        per = [
            CutoffResult(int(r["cutoff"]), np.array(r["forecast"], float),
                         np.array(r["actual"], float), MetricPair(r["mse"], r["rmse"]))
            for r in d["per_cutoff"]
        ]
        agg = MetricPair(d["aggregate"]["mse"], d["aggregate"]["rmse"])
        return cls(d["model_name"], int(d["horizon"]), [int(c) for c in d["cutoffs"]],
                   per, agg, int(d["n_points"]))

    def write_flat_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cutoff", "step", "forecast", "actual", "sq_error"])
        for r in self.per_cutoff:
            for step, (f, a, e) in enumerate(zip(r.forecast, r.actual, r.squared_errors), 1):
                writer.writerow([r.cutoff, step, repr(float(f)), repr(float(a)), repr(float(e))])


def _evaluate_cutoff(series: TimeSeries, model: Forecaster, cutoff: int,
                     horizon: int) -> CutoffResult:
    history = series.slice(0, cutoff)
    try:
        state = model.fit(history)
        fc = np.asarray(model.forecast(state, horizon), dtype=float).reshape(-1)
    except Exception as exc:
        raise BacktestError(getattr(model, "name", type(model).__name__), cutoff, exc) from exc
    if fc.size != horizon:
        raise BacktestError(model.name, cutoff,
                            ValueError(f"returned {fc.size} values for horizon {horizon}"))
    actual = series.values[cutoff:cutoff + horizon].copy()
    return CutoffResult(cutoff, fc, actual, MetricPair.of(fc, actual))


def backtest(series: TimeSeries, model: Forecaster, K: int, horizon: int,
             min_train: int | None = None, executor=None) -> BacktestReport:
    """Fit on each growing prefix and score ``horizon`` steps ahead.

    ``executor`` may be any object with an order-preserving ``map`` (e.g. a
    ``concurrent.futures`` pool); cutoffs are independent of each other.
    """
    cutoffs = plan_cutoffs(len(series), K, horizon, min_train)

    def run(c):
        return _evaluate_cutoff(series, model, c, horizon)

    results = list(executor.map(run, cutoffs) if executor is not None else map(run, cutoffs))
    pooled = np.concatenate([r.squared_errors for r in results])
    return BacktestReport(model.name, horizon, cutoffs, results,
                          MetricPair.from_squared_errors(pooled), len(series))


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    mse: float
    rmse: float
    winner: bool


@dataclass(frozen=True)
class ComparisonSummary:
    rows: list[ComparisonRow]

    @property
    def winner(self) -> str:
        return next(r.model for r in self.rows if r.winner)

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "mse", "rmse", "winner_flag"])
        for r in self.rows:
            writer.writerow([r.model, repr(r.mse), repr(r.rmse), int(r.winner)])


def compare(reports: Sequence[BacktestReport]) -> ComparisonSummary:
    """Rank reports by aggregate RMSE, then MSE, then model name."""
    reports = list(reports)
    if len(reports) < 2:
        raise UsageError("need at least two reports to compare")
    ref = reports[0]
    for r in reports[1:]:
        if r.cutoffs != ref.cutoffs or r.horizon != ref.horizon:
            raise UsageError(f"report {r.model_name!r} uses different cutoffs or horizon")
    names = [r.model_name for r in reports]
    if len(set(names)) != len(names):
        raise UsageError("model names must be unique")
    best = min(reports, key=lambda r: (r.aggregate.rmse, r.aggregate.mse, r.model_name))
    rows = [ComparisonRow(r.model_name, r.aggregate.mse, r.aggregate.rmse, r is best)
            for r in reports]
    return ComparisonSummary(rows)


def load_reports(paths: Iterable[str]) -> list[BacktestReport]:
    out = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            out.append(BacktestReport.from_dict(json.load(fh)))
    return out
