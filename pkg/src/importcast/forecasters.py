"""Backtest adapters for the two learned models.

Both scale the history they are given with a min-max scaler fitted on that
history alone, work in scaled units, and hand back kilograms.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import lstm, prophet
from .series import Scaler, TimeSeries, fit_scaler, make_windows, scale


@dataclass(frozen=True)
class ProphetState:
    params: prophet.ProphetParams
    scaler: Scaler
    last_index: int


class ProphetForecaster:
    name = "prophet"

    def __init__(self, config: prophet.ProphetConfig | None = None,
                 target_range: tuple[float, float] = (0.0, 1.0)):
        self.config = config or prophet.ProphetConfig()
        self.config.validate()
        self.target_range = target_range

    def fit(self, history: TimeSeries) -> ProphetState:
        scaler = fit_scaler(history, self.target_range)
        config = self.config
        if config.growth == "logistic":
            # capacity is given in kilograms
            cap = float(scaler.transform(config.capacity))
            config = replace(config, capacity=cap)
        params = prophet.fit(scale(scaler, history), config)
        return ProphetState(params, scaler, len(history) - 1)

    def forecast(self, state: ProphetState, horizon: int) -> np.ndarray:
        fc = prophet.predict(state.params, horizon, state.last_index)
        return state.scaler.inverse(fc.yhat)


@dataclass(frozen=True)
class LstmState:
    params: lstm.LstmParams
    scaler: Scaler
    seed_window: np.ndarray
    loss_history: tuple[float, ...]


class LstmForecaster:
    name = "lstm"

    def __init__(self, config: lstm.LstmConfig | None = None,
                 target_range: tuple[float, float] = (0.0, 1.0)):
        self.config = config or lstm.LstmConfig()
        self.config.validate()
        self.target_range = target_range

    def fit(self, history: TimeSeries) -> LstmState:
        scaler = fit_scaler(history, self.target_range)
        scaled = scale(scaler, history)
        data = make_windows(scaled, self.config.window_len)
        params, losses = lstm.train(data, self.config)
        return LstmState(params, scaler, scaled.values[-self.config.window_len:].copy(),
                         tuple(losses))

    def forecast(self, state: LstmState, horizon: int) -> np.ndarray:
        z = lstm.forecast_recursive(state.params, state.seed_window, horizon)
        return state.scaler.inverse(z)
