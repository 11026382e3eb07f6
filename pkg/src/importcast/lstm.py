"""Single-layer LSTM regressor written directly in numpy.

Gate order everywhere is (forget, input, candidate, output).  For one step

    f = sigmoid(W_f x + U_f h + b_f)
    i = sigmoid(W_i x + U_i h + b_i)
    g = tanh(W_g x + U_g h + b_g)
    o = sigmoid(W_o x + U_o h + b_o)
    c' = f * c + i * g
    h' = o * tanh(c')

and a window's prediction is ``V . h_w + c`` after ``w`` steps from a zero
state.  Training is per-sample SGD with global-norm gradient clipping and
full backpropagation through the window.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, TextIO

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericError
from .rng import XorShift64Star
from .series import WindowedDataset

GATES = ("forget", "input", "candidate", "output")
FORGET, INPUT, CANDIDATE, OUTPUT = range(4)


def sigmoid(x):
    """Logistic function, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def tanh_act(x):
    out = np.tanh(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LstmConfig:
    input_dim: int = 1
    hidden_dim: int = 8
    window_len: int = 6
    epochs: int = 200
    learning_rate: float = 0.01
    grad_clip: float = 5.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("input_dim", "hidden_dim", "window_len", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not self.grad_clip > 0:
            raise ConfigError("grad_clip must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> LstmConfig:
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass(eq=False)
class LstmParams:
    """Weights: ``W[gate]`` (H x I), ``U[gate]`` (H x H), ``b[gate]`` (H), head ``V``, ``c``."""

    W: np.ndarray  # (4, H, I)
    U: np.ndarray  # (4, H, H)
    b: np.ndarray  # (4, H)
    V: np.ndarray  # (H,)
    c: float = 0.0

    @property
    def hidden_dim(self) -> int:
        return self.V.size

    @property
    def input_dim(self) -> int:
        return self.W.shape[2]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> LstmParams:
        H, I = hidden_dim, input_dim
        return cls(np.zeros((4, H, I)), np.zeros((4, H, H)), np.zeros((4, H)), np.zeros(H), 0.0)

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        j = GATES.index(name)
        return self.W[j], self.U[j], self.b[j]

    def copy(self) -> LstmParams:
        return LstmParams(self.W.copy(), self.U.copy(), self.b.copy(), self.V.copy(), float(self.c))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.U.ravel(), self.b.ravel(), self.V, [self.c]])

    @classmethod
    def from_flat(cls, vec: np.ndarray, input_dim: int, hidden_dim: int) -> LstmParams:
        H, I = hidden_dim, input_dim
        sizes = [4 * H * I, 4 * H * H, 4 * H, H, 1]
        parts = np.split(np.asarray(vec, dtype=float), np.cumsum(sizes)[:-1])
        return cls(parts[0].reshape(4, H, I).copy(), parts[1].reshape(4, H, H).copy(),
                   parts[2].reshape(4, H).copy(), parts[3].copy(), float(parts[4][0]))

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.flat()).all())

    def to_dict(self) -> dict:
        gates = {
            name: {"W": self.W[j].tolist(), "U": self.U[j].tolist(), "b": self.b[j].tolist()}
            for j, name in enumerate(GATES)
        }
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "layout": "row-major",
            "gates": gates,
            "V": self.V.tolist(),
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LstmParams:
        H, I = int(d["hidden_dim"]), int(d["input_dim"])
        W = np.array([d["gates"][g]["W"] for g in GATES], dtype=float).reshape(4, H, I)
        U = np.array([d["gates"][g]["U"] for g in GATES], dtype=float).reshape(4, H, H)
        b = np.array([d["gates"][g]["b"] for g in GATES], dtype=float).reshape(4, H)
        return cls(W, U, b, np.array(d["V"], dtype=float).reshape(H), float(d["c"]))


class LstmState(NamedTuple):
    cell: np.ndarray
    hidden: np.ndarray


class StepCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


class WindowCache(NamedTuple):
    steps: list[StepCache]
    prediction: float


def zero_state(hidden_dim: int) -> LstmState:
    return LstmState(np.zeros(hidden_dim), np.zeros(hidden_dim))


def cell_forward(x_t, prev: LstmState, params: LstmParams) -> tuple[LstmState, StepCache]:
    H = params.hidden_dim
    x = np.atleast_1d(np.asarray(x_t, dtype=float))
    z = (params.W.reshape(4 * H, -1) @ x + params.U.reshape(4 * H, H) @ prev.hidden
         + params.b.reshape(4 * H))
    act = expit(z)
    act[2 * H:3 * H] = np.tanh(z[2 * H:3 * H])
    if not np.isfinite(z).all():
        bad = int(np.flatnonzero(~np.isfinite(z))[0]) // H
        raise NumericError(f"non-finite activation in the {GATES[bad]} gate")
    f, i, g, o = act[:H], act[H:2 * H], act[2 * H:3 * H], act[3 * H:]
    c = f * prev.cell + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return LstmState(c, h), StepCache(x, prev.hidden, prev.cell, f, i, g, o, c, tanh_c)


def forward_window(window, params: LstmParams) -> tuple[float, WindowCache]:
    """Run the cell over ``window`` from a zero state and apply the linear head."""
    seq = np.asarray(window, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    state = zero_state(params.hidden_dim)
    steps = []
    for x_t in seq:
        state, cache = cell_forward(x_t, state, params)
        steps.append(cache)
    pred = float(params.V @ state.hidden + params.c)
    return pred, WindowCache(steps, pred)


def backward_window(cache: WindowCache, target: float,
                    params: LstmParams) -> tuple[LstmParams, float]:
    """Squared-error loss for one window and its gradient for every weight."""
    H = params.hidden_dim
    err = cache.prediction - float(target)
    loss = err * err
    d_pred = 2.0 * err

    grads = LstmParams.zeros(params.input_dim, H)
    U_stack = params.U.reshape(4 * H, H)

    last = cache.steps[-1]
    grads.V[:] = d_pred * last.o * last.tanh_c
    grads.c = d_pred
    dh = d_pred * params.V
    dc = np.zeros(H)
    n_steps = len(cache.steps)
    dZ = np.empty((n_steps, 4 * H))
    for t in range(n_steps - 1, -1, -1):
        st = cache.steps[t]
        dz = dZ[t]
        dc = dc + dh * st.o * (1.0 - st.tanh_c * st.tanh_c)
        dz[:H] = dc * st.c_prev * st.f * (1.0 - st.f)
        dz[H:2 * H] = dc * st.g * st.i * (1.0 - st.i)
        dz[2 * H:3 * H] = dc * st.i * (1.0 - st.g * st.g)
        dz[3 * H:] = dh * st.tanh_c * st.o * (1.0 - st.o)
        dh = U_stack.T @ dz
        dc = dc * st.f
    X = np.array([st.x for st in cache.steps])
    H_prev = np.array([st.h_prev for st in cache.steps])
    grads.W[:] = (dZ.T @ X).reshape(4, H, -1)
    grads.U[:] = (dZ.T @ H_prev).reshape(4, H, H)
    grads.b[:] = dZ.sum(axis=0).reshape(4, H)
    if not (math.isfinite(loss) and grads.all_finite()):
        raise NumericError("non-finite gradient")
    return grads, loss


def init_params(config: LstmConfig, rng: XorShift64Star | None = None) -> LstmParams:
    """Xavier-uniform weights, zero biases except forget bias 1."""
    rng = rng or XorShift64Star(config.seed)
    H, I = config.hidden_dim, config.input_dim
    p = LstmParams.zeros(I, H)
    lim_w = math.sqrt(6.0 / (I + H))
    lim_u = math.sqrt(6.0 / (H + H))
    for j in range(4):
        p.W[j] = rng.uniform(-lim_w, lim_w, (H, I))
        p.U[j] = rng.uniform(-lim_u, lim_u, (H, H))
    p.b[FORGET] = 1.0
    p.V[:] = rng.uniform(-math.sqrt(6.0 / (H + 1)), math.sqrt(6.0 / (H + 1)), (H,))
    return p


def clip_by_global_norm(grads: LstmParams, max_norm: float) -> float:
    """Rescale ``grads`` in place when its global L2 norm exceeds ``max_norm``."""
    norm = math.sqrt(float(np.sum(grads.W ** 2) + np.sum(grads.U ** 2) + np.sum(grads.b ** 2)
                           + np.sum(grads.V ** 2)) + grads.c ** 2)
    if norm > max_norm:
        s = max_norm / norm
        grads.W *= s
        grads.U *= s
        grads.b *= s
        grads.V *= s
        grads.c *= s
    return norm


def train(dataset: WindowedDataset, config: LstmConfig,
          params: LstmParams | None = None) -> tuple[LstmParams, list[float]]:
    """Fit by chronological per-sample SGD. Returns params and per-epoch mean loss."""
    config.validate()
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.window_len != config.window_len:
        raise ConfigError(f"dataset window {dataset.window_len} != config window {config.window_len}")
    params = init_params(config) if params is None else params.copy()
    lr = config.learning_rate
    history = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in range(len(dataset)):
            pred, cache = forward_window(dataset.inputs[idx], params)
            grads, loss = backward_window(cache, dataset.targets[idx], params)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, sample {idx}")
            clip_by_global_norm(grads, config.grad_clip)
            params.W -= lr * grads.W
            params.U -= lr * grads.U
            params.b -= lr * grads.b
            params.V -= lr * grads.V
            params.c -= lr * grads.c
            total += loss
        history.append(total / len(dataset))
    return params, history


def predict_one(params: LstmParams, window) -> float:
    return forward_window(window, params)[0]


def forecast_recursive(params: LstmParams, seed_window, horizon: int) -> np.ndarray:
    """Roll the one-step predictor forward, feeding each prediction back in."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    window = list(np.asarray(seed_window, dtype=float))
    out = np.empty(horizon)
    for h in range(horizon):
        out[h] = predict_one(params, window)
        window = window[1:] + [out[h]]
    return out


def write_loss_history(history, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["epoch", "loss"])
    for epoch, loss in enumerate(history):
        writer.writerow([epoch, repr(float(loss))])


def params_to_json(params: LstmParams, **extra) -> str:
    doc = params.to_dict()
    doc.update(extra)
    return json.dumps(doc, indent=2)


def config_dict(config: LstmConfig) -> dict:
    return asdict(config)
