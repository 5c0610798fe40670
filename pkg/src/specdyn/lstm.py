"""Single-layer LSTM with a linear head, used as the recurrent baseline.

Gate blocks in every ``4H`` array are ordered input, forget, cell candidate,
output. All functions accept a single input ``(2L,)`` or a batch ``(N, 2L)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DivergenceError
from .numerics import DTYPE

PARAM_NAMES = ("Wx", "Wh", "b", "Wy", "by")


@dataclass(frozen=True)
class LstmParams:
    Wx: np.ndarray  # (4H, 2L)
    Wh: np.ndarray  # (4H, H)
    b: np.ndarray   # (4H,)
    Wy: np.ndarray  # (2L, H)
    by: np.ndarray  # (2L,)

    def __post_init__(self):
        H = self.Wh.shape[1]
        n = self.Wx.shape[1]
        expected = {"Wx": (4 * H, n), "Wh": (4 * H, H), "b": (4 * H,), "Wy": (n, H), "by": (n,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ContractError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def hidden(self) -> int:
        return self.Wh.shape[1]

    @property
    def L(self) -> int:
        return self.Wx.shape[1] // 2

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params().values())

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    @classmethod
    def from_params(cls, params) -> "LstmParams":
        return cls(*(np.asarray(params[k], dtype=DTYPE) for k in PARAM_NAMES))


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "LstmState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


def init_lstm(L: int, H: int, rng: np.random.Generator) -> LstmParams:
    if L < 1 or H < 1:
        raise ContractError(f"need L >= 1 and H >= 1, got L={L}, H={H}")

    def uniform(rows, cols):
        a = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-a, a, size=(rows, cols)).astype(np.float32).astype(DTYPE)

    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0  # forget-gate bias starts open
    return LstmParams(uniform(4 * H, 2 * L), uniform(4 * H, H), b,
                      uniform(2 * L, H), np.zeros(2 * L))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _gates(p: LstmParams, state: LstmState, x):
    H = p.hidden
    z = x @ p.Wx.T + state.h @ p.Wh.T + p.b
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = _sigmoid(z[..., 3 * H:])
    return i, f, g, o


def lstm_step(p: LstmParams, state: LstmState, x, step_index: int = 0):
    """One recurrent step; returns ``(new_state, prediction)``."""
    x = np.asarray(x, dtype=DTYPE)
    if x.shape[-1] != p.Wx.shape[1]:
        raise ContractError(f"input length {x.shape[-1]} != 2L = {p.Wx.shape[1]}")
    i, f, g, o = _gates(p, state, x)
    c = f * state.c + i * g
    h = o * np.tanh(c)
    y = h @ p.Wy.T + p.by
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(c))):
        raise DivergenceError(f"non-finite LSTM output (step {step_index})", step=step_index)
    return LstmState(h, c), y


@dataclass
class LstmCache:
    """Activations of a forward pass over a window, kept for backpropagation."""

    xs: np.ndarray
    h: list
    c: list
    gates: list
    preds: np.ndarray


def lstm_forward(p: LstmParams, xs, state: LstmState | None = None):
    """Run over ``xs`` of shape ``(T, 2L)`` or ``(T, N, 2L)``; returns ``(preds, cache)``."""
    xs = np.asarray(xs, dtype=DTYPE)
    if xs.shape[0] == 0:
        raise ContractError("empty input window")
    if state is None:
        state = LstmState.zeros(p.hidden, None if xs.ndim == 2 else xs.shape[1])
    hs, cs, gates, preds = [state.h], [state.c], [], []
    for t, x in enumerate(xs):
        gates.append(_gates(p, state, x))
        state, y = lstm_step(p, state, x, step_index=t)
        hs.append(state.h)
        cs.append(state.c)
        preds.append(y)
    return np.stack(preds), LstmCache(xs, hs, cs, gates, np.stack(preds))


def lstm_backward(p: LstmParams, cache: LstmCache, upstream) -> dict[str, np.ndarray]:
    """Backpropagation through the cached window.

    ``upstream[t]`` is the loss gradient w.r.t. the prediction at step ``t``;
    the window's initial state is treated as a constant.
    """
    upstream = np.asarray(upstream, dtype=DTYPE)
    if upstream.shape[0] == 0:
        raise ContractError("empty window")
    if upstream.shape != cache.preds.shape:
        raise ContractError(f"upstream shape {upstream.shape} != predictions {cache.preds.shape}")
    grads = {k: np.zeros_like(v) for k, v in p.params().items()}
    dh_next = np.zeros_like(cache.h[0])
    dc_next = np.zeros_like(cache.c[0])
    for t in range(upstream.shape[0] - 1, -1, -1):
        dy = upstream[t]
        h, c, c_prev, h_prev = cache.h[t + 1], cache.c[t + 1], cache.c[t], cache.h[t]
        i, f, g, o = cache.gates[t]
        x = cache.xs[t]
        if dy.ndim == 1:
            grads["Wy"] += np.outer(dy, h)
        else:
            grads["Wy"] += dy.T @ h
        grads["by"] += dy if dy.ndim == 1 else dy.sum(axis=0)

        dh = dy @ p.Wy + dh_next
        tc = np.tanh(c)
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ], axis=-1)
        if dz.ndim == 1:
            grads["Wx"] += np.outer(dz, x)
            grads["Wh"] += np.outer(dz, h_prev)
            grads["b"] += dz
        else:
            grads["Wx"] += dz.T @ x
            grads["Wh"] += dz.T @ h_prev
            grads["b"] += dz.sum(axis=0)
        dh_next = dz @ p.Wh
        dc_next = dc * f
    return grads
