"""Additive trend + seasonality model with changepoints.

The forecast is ``y(t) = g(t) + s(t)``: ``g`` is a piecewise linear or
piecewise logistic trend whose growth rate changes at fixed changepoints,
``s`` is a truncated Fourier series with period ``P``.  Time is the integer
month index of the training series (0 for the first observation).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .errors import ConfigError, ConvergenceError, NumericError
from .series import MonthStamp, TimeSeries

GROWTH_MODES = ("linear", "logistic")


@dataclass(frozen=True)
class ProphetConfig:
    growth: str = "linear"
    n_changepoints: int | None = None  # None -> min(25, n // 4)
    changepoint_range: float = 0.8
    seasonality_period: float = 12.0
    fourier_order: int = 3
    ridge_lambda_trend: float = 0.1
    ridge_lambda_seasonal: float = 1.0
    capacity: float | None = None
    # logistic fitting only
    max_rounds: int = 10
    round_tol: float = 1e-8
    max_iter: int = 500

    def validate(self) -> None:
        if self.growth not in GROWTH_MODES:
            raise ConfigError(f"growth must be one of {GROWTH_MODES}, got {self.growth!r}")
        if self.n_changepoints is not None and self.n_changepoints < 0:
            raise ConfigError("n_changepoints must be non-negative")
        if not 0.0 < self.changepoint_range <= 1.0:
            raise ConfigError("changepoint_range must lie in (0, 1]")
        if not self.seasonality_period > 0:
            raise ConfigError("seasonality_period must be positive")
        if self.fourier_order < 1:
            raise ConfigError("fourier_order must be at least 1")
        if self.ridge_lambda_trend < 0 or self.ridge_lambda_seasonal < 0:
            raise ConfigError("ridge penalties must be non-negative")
        if self.growth == "logistic" and not (self.capacity and self.capacity > 0):
            raise ConfigError("logistic growth needs a positive capacity")

    def changepoints_for(self, n_points: int) -> int:
        if self.n_changepoints is None:
            return min(25, n_points // 4)
        return self.n_changepoints

    @classmethod
    def from_dict(cls, d: dict) -> ProphetConfig:
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass(frozen=True, eq=False)
class ProphetParams:
    k: float
    m: float
    changepoints: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    growth: str = "linear"
    period: float = 12.0
    fourier_order: int = 3
    capacity: float | None = None

    def __post_init__(self):
        for name in ("changepoints", "delta", "gamma", "beta"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.delta.size != self.changepoints.size or self.gamma.size != self.changepoints.size:
            raise ValueError("delta and gamma need one entry per changepoint")
        if np.any(np.diff(self.changepoints) <= 0):
            raise ValueError("changepoints must be strictly ascending")
        if self.beta.size != 2 * self.fourier_order:
            raise ValueError("beta needs 2 * fourier_order coefficients")

    def trend(self, t) -> np.ndarray:
        if self.growth == "logistic":
            return trend_logistic(t, self.capacity, self.k, self.m, self.changepoints, self.delta)
        return trend_linear(t, self.k, self.m, self.changepoints, self.delta)

    def seasonal(self, t) -> np.ndarray:
        return fourier_features(np.atleast_1d(t), self.period, self.fourier_order) @ self.beta

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "changepoints": self.changepoints.tolist(),
            "delta": self.delta.tolist(),
            "gamma": self.gamma.tolist(),
            "beta": self.beta.tolist(),
            "growth": self.growth,
            "P": self.period,
            "N": self.fourier_order,
            "C": self.capacity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ProphetParams:
        return cls(d["k"], d["m"], d["changepoints"], d["delta"], d["gamma"], d["beta"],
                   d["growth"], d["P"], d["N"], d["C"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, eq=False)
class Forecast:
    t: np.ndarray
    yhat: np.ndarray
    trend_component: np.ndarray
    seasonal_component: np.ndarray
    timestamps: list[MonthStamp] = field(default_factory=list)

    def __len__(self) -> int:
        return self.yhat.size

    def to_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "yhat", "trend", "seasonal"])
        labels = [str(s) for s in self.timestamps] or [str(int(t)) for t in self.t]
        for lab, y, g, s in zip(labels, self.yhat, self.trend_component, self.seasonal_component):
            writer.writerow([lab, repr(float(y)), repr(float(g)), repr(float(s))])


# ---------------------------------------------------------------- building blocks

def place_changepoints(n_points: int, S: int, range_fraction: float = 0.8) -> list[int]:
    """Spread ``S`` changepoints uniformly over the first part of the history.

    Index ``j`` (1-based) lands at ``floor(j * H / (S + 1))`` where
    ``H = floor(range_fraction * n_points)``; index 0 is never used.
    """
    if S < 0:
        raise ConfigError("number of changepoints must be non-negative")
    if not 0.0 < range_fraction <= 1.0:
        raise ConfigError("changepoint range must lie in (0, 1]")
    if S == 0:
        return []
    if S >= n_points:
        raise ConfigError(f"{S} changepoints need more than {n_points} points")
    hist = math.floor(range_fraction * n_points)
    if hist < S + 1:
        raise ConfigError(
            f"only {hist} eligible points for {S} changepoints; "
            "lower n_changepoints or raise changepoint_range"
        )
    return [(j * hist) // (S + 1) for j in range(1, S + 1)]


def indicator_vector(t, changepoints) -> np.ndarray:
    """``a(t)_j = 1`` when ``t >= s_j``. Vectorized over ``t`` (rows)."""
    s = np.asarray(changepoints, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    return (t_arr[..., None] >= s).astype(float)


def linear_gammas(changepoints, delta) -> np.ndarray:
    return -np.asarray(changepoints, dtype=float) * np.asarray(delta, dtype=float)


def _segment_rates(k: float, delta: np.ndarray) -> np.ndarray:
    """Rate of segment j (0 = before the first changepoint)."""
    return k + np.concatenate(([0.0], np.cumsum(delta)))


def _segment_offsets(k, m, changepoints, delta) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(changepoints, dtype=float)
    rates = _segment_rates(k, np.asarray(delta, dtype=float))
    if np.any(rates == 0):
        j = int(np.flatnonzero(rates == 0)[0])
        raise NumericError(f"logistic growth rate is zero on segment {j}")
    offsets = np.empty_like(rates)
    offsets[0] = m
    for j in range(1, rates.size):
        # keeps r_j * (s_j - o_j) equal on both sides of the changepoint
        offsets[j] = s[j - 1] - (s[j - 1] - offsets[j - 1]) * rates[j - 1] / rates[j]
    return rates, offsets


def logistic_gammas(k: float, m: float, changepoints, delta) -> np.ndarray:
    _, offsets = _segment_offsets(k, m, changepoints, delta)
    return np.diff(offsets)


def trend_linear(t, k: float, m: float, changepoints, delta):
    """Piecewise linear trend ``(k + a.delta) t + (m + a.gamma)``."""
    delta = np.asarray(delta, dtype=float)
    a = indicator_vector(t, changepoints)
    gamma = linear_gammas(changepoints, delta)
    out = (k + a @ delta) * np.asarray(t, dtype=float) + (m + a @ gamma)
    return float(out) if np.ndim(out) == 0 else out


def trend_logistic(t, C: float, k: float, m: float, changepoints, delta):
    """Piecewise logistic trend with capacity ``C``.

    Offsets are adjusted at each changepoint so the curve stays continuous.
    """
    if not C > 0:
        raise ConfigError("capacity must be positive")
    delta = np.asarray(delta, dtype=float)
    rates, offsets = _segment_offsets(k, m, changepoints, delta)
    seg = indicator_vector(t, changepoints).sum(axis=-1).astype(int)
    t_arr = np.asarray(t, dtype=float)
    out = C * expit(rates[seg] * (t_arr - offsets[seg]))
    return float(out) if np.ndim(out) == 0 else out


def fourier_features(t, P: float, N: int) -> np.ndarray:
    """Columns ``cos(2 pi n t / P), sin(2 pi n t / P)`` for ``n = 1..N``."""
    if not P > 0 or N < 1:
        raise ValueError("need P > 0 and N >= 1")
    t_arr = np.asarray(t, dtype=float)
    n = np.arange(1, N + 1)
    # reduce t modulo P first so t and t + P give bit-identical angles
    phase = np.mod(t_arr, P)[..., None] * n
    angle = 2.0 * np.pi * phase / P
    out = np.empty(t_arr.shape + (2 * N,))
    out[..., 0::2] = np.cos(angle)
    out[..., 1::2] = np.sin(angle)
    return out


# ---------------------------------------------------------------- fitting

def _ridge_solve(X: np.ndarray, y: np.ndarray, penalty: np.ndarray) -> np.ndarray:
    """Minimize ``|y - X b|^2 + sum(penalty * b^2)`` with a QR factorization."""
    rows = penalty > 0
    A = np.vstack([X, np.diag(np.sqrt(penalty))[rows]])
    rhs = np.concatenate([y, np.zeros(int(rows.sum()))])
    Q, R = np.linalg.qr(A)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= 1e-10 * max(d.max(), 1.0) * max(A.shape):
        raise ConfigError(
            "design matrix is rank deficient; use positive ridge penalties "
            "or fewer changepoints / Fourier terms"
        )
    return solve_triangular(R, Q.T @ rhs)


def _as_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _check_length(n: int, S: int, N: int) -> None:
    need = max(2 * N + S + 2, 8)
    if n < need:
        raise ConfigError(f"need at least {need} points for {S} changepoints and order {N}, got {n}")


def fit(series, config: ProphetConfig | None = None) -> ProphetParams:
    config = config or ProphetConfig()
    config.validate()
    y = _as_values(series)
    n = y.size
    S = config.changepoints_for(n)
    N = config.fourier_order
    _check_length(n, S, N)
    cps = np.array(place_changepoints(n, S, config.changepoint_range), dtype=float)
    t = np.arange(n, dtype=float)
    F = fourier_features(t, config.seasonality_period, N)
    if config.growth == "linear":
        return _fit_linear(t, y, cps, F, config)
    return _fit_logistic(t, y, cps, F, config)


def linear_design(t: np.ndarray, changepoints: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Columns: t, 1, (t - s_j)_+ for each changepoint, then Fourier terms."""
    hinge = np.maximum(t[:, None] - changepoints[None, :], 0.0)
    return np.column_stack([t, np.ones_like(t), hinge, F])


def _fit_linear(t, y, cps, F, config) -> ProphetParams:
    S, N2 = cps.size, F.shape[1]
    X = linear_design(t, cps, F)
    penalty = np.concatenate([[0.0, 0.0],
                              np.full(S, config.ridge_lambda_trend),
                              np.full(N2, config.ridge_lambda_seasonal)])
    coef = _ridge_solve(X, y, penalty)
    k, m = coef[0], coef[1]
    delta = coef[2:2 + S]
    beta = coef[2 + S:]
    return ProphetParams(float(k), float(m), cps, delta, linear_gammas(cps, delta), beta,
                         "linear", config.seasonality_period, config.fourier_order, None)


def logistic_jacobian(t, C, k, m, changepoints, delta) -> tuple[np.ndarray, np.ndarray]:
    """Trend values and their Jacobian w.r.t. ``(k, m, delta_1..delta_S)``.

    Offsets depend on every earlier rate, so their derivatives are carried
    forward through the continuity recurrence.
    """
    s = np.asarray(changepoints, dtype=float)
    delta = np.asarray(delta, dtype=float)
    S = s.size
    rates, offsets = _segment_offsets(k, m, s, delta)
    n_par = S + 2
    d_rate = np.zeros((S + 1, n_par))
    d_off = np.zeros((S + 1, n_par))
    d_rate[:, 0] = 1.0
    for j in range(1, S + 1):
        d_rate[j, 2:2 + j] = 1.0
    d_off[0, 1] = 1.0
    for j in range(1, S + 1):
        ratio = rates[j - 1] / rates[j]
        gap = s[j - 1] - offsets[j - 1]
        d_ratio = (d_rate[j - 1] * rates[j] - rates[j - 1] * d_rate[j]) / rates[j] ** 2
        d_off[j] = ratio * d_off[j - 1] - gap * d_ratio
    t = np.asarray(t, dtype=float)
    seg = indicator_vector(t, s).sum(axis=-1).astype(int)
    r, o = rates[seg], offsets[seg]
    sig = expit(r * (t - o))
    g = C * sig
    slope = C * sig * (1.0 - sig)
    J = slope[:, None] * ((t - o)[:, None] * d_rate[seg] - r[:, None] * d_off[seg])
    return g, J


def _logistic_init(t, y, C) -> tuple[float, float]:
    z = np.clip(y / C, 0.01, 0.99)
    z = np.log(z / (1.0 - z))
    slope, intercept = np.polyfit(t, z, 1)
    if abs(slope) < 1e-6:
        slope = 1e-2
        return slope, float(t.mean() - z.mean() / slope)
    return float(slope), float(-intercept / slope)


def _lm_trend(t, target, C, theta, cps, lam, max_iter):
    """Damped Gauss-Newton (Levenberg-Marquardt) on the logistic trend.

    Returns (theta, loss, converged).
    """
    S = cps.size
    sq_lam = math.sqrt(lam)

    def objective(th):
        try:
            g = trend_logistic(t, C, th[0], th[1], cps, th[2:])
        except NumericError:
            return math.inf
        loss = float(np.sum((target - g) ** 2) + lam * np.sum(th[2:] ** 2))
        return loss if math.isfinite(loss) else math.inf

    loss = objective(theta)
    mu = 1e-3
    for _ in range(max_iter):
        g, Jg = logistic_jacobian(t, C, theta[0], theta[1], cps, theta[2:])
        r = np.concatenate([target - g, sq_lam * theta[2:]])
        J = np.vstack([-Jg, np.hstack([np.zeros((S, 2)), sq_lam * np.eye(S)])])
        A = J.T @ J
        grad = J.T @ r
        if np.max(np.abs(grad)) <= 1e-12 * max(1.0, loss):
            return theta, loss, True
        diag = np.maximum(np.diag(A), 1e-12)
        while True:
            try:
                step = np.linalg.solve(A + mu * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                cand = theta + step
                new_loss = objective(cand)
                if new_loss < loss:
                    break
            mu *= 4.0
            if mu > 1e16:
                # no descent direction left at working precision
                return theta, loss, True
        theta = cand
        rel = (loss - new_loss) / max(loss, 1e-300)
        loss = new_loss
        mu = max(mu / 3.0, 1e-12)
        if rel < 1e-14:
            return theta, loss, True
    return theta, loss, False


def _fit_logistic(t, y, cps, F, config) -> ProphetParams:
    C = float(config.capacity)
    S = cps.size
    lam_t, lam_s = config.ridge_lambda_trend, config.ridge_lambda_seasonal
    k0, m0 = _logistic_init(t, y, C)
    theta = np.concatenate([[k0, m0], np.zeros(S)])
    beta = np.zeros(F.shape[1])
    prev = math.inf
    loss = math.inf
    converged = False
    inner_ok = True
    for _ in range(config.max_rounds):
        g = trend_logistic(t, C, theta[0], theta[1], cps, theta[2:])
        beta = _ridge_solve(F, y - g, np.full(F.shape[1], lam_s))
        theta, _, inner_ok = _lm_trend(t, y - F @ beta, C, theta, cps, lam_t, config.max_iter)
        g = trend_logistic(t, C, theta[0], theta[1], cps, theta[2:])
        loss = float(np.sum((y - g - F @ beta) ** 2)
                     + lam_t * np.sum(theta[2:] ** 2) + lam_s * np.sum(beta ** 2))
        if not math.isfinite(loss):
            raise ConvergenceError("logistic fit diverged", loss)
        if math.isfinite(prev) and abs(prev - loss) <= config.round_tol * max(prev, 1e-300):
            converged = True
            break
        prev = loss
    if not converged and not inner_ok:
        raise ConvergenceError(
            f"logistic trend did not converge within {config.max_iter} iterations", loss)
    delta = theta[2:]
    gamma = logistic_gammas(theta[0], theta[1], cps, delta)
    return ProphetParams(float(theta[0]), float(theta[1]), cps, delta, gamma, beta,
                         "logistic", config.seasonality_period, config.fourier_order, C)


# ---------------------------------------------------------------- prediction

def predict(params: ProphetParams, horizon: int, last_training_index: int,
            origin: MonthStamp | None = None) -> Forecast:
    """Forecast indices ``last+1 .. last+horizon``.

    The trend keeps the rate of its final segment; the seasonal term simply
    continues its period. ``origin`` is the stamp of index 0 and, when
    given, fills ``Forecast.timestamps``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    t = np.arange(last_training_index + 1, last_training_index + 1 + horizon, dtype=float)
    return evaluate(params, t, origin)


def evaluate(params: ProphetParams, t: Sequence[float],
             origin: MonthStamp | None = None) -> Forecast:
    t = np.asarray(t, dtype=float)
    trend = np.asarray(params.trend(t), dtype=float)
    seasonal = params.seasonal(t)
    stamps = [origin.shift(int(i)) for i in t] if origin is not None else []
    return Forecast(t, trend + seasonal, trend, seasonal, stamps)


def config_dict(config: ProphetConfig) -> dict:
    return asdict(config)
