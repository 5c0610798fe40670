"""One-step-ahead training with MSE loss and Adam."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import ReflectanceSeries, augment
from .errors import ContractError, InsufficientHistoryError, TrainingDiverged
from .integrators import step, step_backward
from .lstm import lstm_backward, lstm_forward
from .model import Model, ModelKind, init_model, round_to_payload
from .numerics import DTYPE

log = logging.getLogger(__name__)

LOSS_SCOPES = ("full-state", "reflectance-only")


@dataclass
class TrainConfig:
    model: str = "rk4"
    width: int = 150
    init_gain: float = 0.1
    epochs: int = 2500
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    loss_scope: str = "full-state"
    window: int = 8  # LSTM truncation length
    batch_size: int = 0  # time indices (or LSTM windows) per update; 0 = all
    shuffle: bool = True
    log_every: int = 0

    def __post_init__(self):
        self.model = ModelKind(self.model).value
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ContractError("Adam betas must lie in (0, 1)")
        if self.batch_size < 0:
            raise ContractError("batch_size must be >= 0")
        if self.width < 1 or self.window < 1:
            raise ContractError("width and window must be >= 1")
        if self.loss_scope not in LOSS_SCOPES:
            raise ContractError(f"loss_scope must be one of {LOSS_SCOPES}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


@dataclass
class TrainResult:
    model: Model
    losses: list


def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=DTYPE)
    target = np.asarray(target, dtype=DTYPE)
    if pred.shape != target.shape:
        raise ContractError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


def adam_update(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam step; returns new ``(params, state)`` without mutating inputs."""
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params, m_new, v_new = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=DTYPE)
        if g.shape != p.shape:
            raise ContractError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        m = beta1 * state.m.get(k, 0.0) + (1.0 - beta1) * g
        v = beta2 * state.v.get(k, 0.0) + (1.0 - beta2) * (g * g)
        new_params[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        m_new[k], v_new[k] = m, v
    return new_params, AdamState(m_new, v_new, t)


def make_training_pairs(batch) -> list[tuple[np.ndarray, np.ndarray]]:
    """All consecutive ``(X_{t-1}, X_t)`` augmented-state pairs of every series."""
    pairs = []
    for i, series in enumerate(batch):
        n = len(series)
        if n < 3:
            name = getattr(series, "name", "") or f"#{i}"
            raise InsufficientHistoryError(f"series {name} has {n} samples; at least 3 are needed")
        X = augment(series)
        pairs.extend(zip(X[:-1], X[1:]))
    return pairs


def _as_series(data):
    if isinstance(data, ReflectanceSeries):
        return [data]
    return [s if isinstance(s, ReflectanceSeries) else ReflectanceSeries(s) for s in data]


def lstm_windows(batch, window: int):
    """Non-overlapping windows of consecutive pairs, stacked as ``(W, N, 2L)``.

    A trailing remainder is covered by one extra window aligned to the end.
    """
    augmented = [augment(s) for s in batch]
    n_pairs = min(len(X) - 1 for X in augmented)
    W = min(window, n_pairs)
    xs, ys = [], []
    for X in augmented:
        P = len(X) - 1
        starts = list(range(0, P - W + 1, W))
        if starts[-1] + W < P:
            starts.append(P - W)
        for s in starts:
            xs.append(X[s:s + W])
            ys.append(X[s + 1:s + W + 1])
    return np.stack(xs, axis=1), np.stack(ys, axis=1)


def _loss_mask(L: int, scope: str) -> np.ndarray:
    mask = np.ones(2 * L)
    if scope == "reflectance-only":
        mask[L:] = 0.0
    return mask


def loss_and_grads(model: Model, inputs, targets, scope: str = "full-state"):
    """One-step MSE over a batch and its parameter gradients.

    For the ResNets ``inputs``/``targets`` are ``(N, 2L)``; for the LSTM they
    are windows ``(W, N, 2L)``.
    """
    mask = _loss_mask(model.L, scope)
    keep = mask.astype(bool)
    if model.kind is ModelKind.LSTM:
        preds, cache = lstm_forward(model.net, inputs)
        loss, g = mse_loss(preds[..., keep], targets[..., keep])
        upstream = np.zeros_like(preds)
        upstream[..., keep] = g
        return loss, lstm_backward(model.net, cache, upstream)
    kind = model.kind.stepper
    preds = step(kind, model.net, inputs)
    loss, g = mse_loss(preds[..., keep], targets[..., keep])
    upstream = np.zeros_like(preds)
    upstream[..., keep] = g
    return loss, step_backward(kind, model.net, inputs, 1.0, upstream).params()


def train(config: TrainConfig, data, model: Model | None = None) -> TrainResult:
    """Fit a model on one-step transitions of ``data`` (series or list of series).

    Every epoch makes a single full-batch Adam update over all pairs of all
    series. Returns the float32-rounded model and the per-epoch loss.
    """
    batch = _as_series(data)
    if not batch:
        raise ContractError("no training series")
    L = batch[0].L
    if any(s.L != L for s in batch):
        raise ContractError("all training series must have the same band count")
    if model is None:
        model = init_model(config.model, L, config.width, config.seed, asdict(config))
    if model.L != L:
        raise ContractError(f"model has L={model.L} but data has L={L}")

    if model.kind is ModelKind.LSTM:
        inputs, targets = lstm_windows(batch, config.window)
        axis = 1
    else:
        make_training_pairs(batch)  # length checks with series names
        aug = [augment(s) for s in batch]
        if len({len(X) for X in aug}) == 1:
            # (P, n_series, 2L): one row per time index across the neighbourhood
            stacked = np.stack(aug, axis=1)
            inputs, targets = stacked[:-1], stacked[1:]
        else:
            inputs = np.concatenate([X[:-1] for X in aug])[:, None, :]
            targets = np.concatenate([X[1:] for X in aug])[:, None, :]
        axis = 0

    n_units = inputs.shape[axis]
    size = config.batch_size or n_units
    rng = np.random.Generator(np.random.PCG64(config.seed + 1))
    params = model.params()
    adam = AdamState()
    losses = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_units) if config.shuffle and size < n_units else np.arange(n_units)
        total = 0.0
        for lo in range(0, n_units, size):
            idx = order[lo:lo + size]
            x, y = np.take(inputs, idx, axis=axis), np.take(targets, idx, axis=axis)
            if axis == 0:
                x, y = x.reshape(-1, x.shape[-1]), y.reshape(-1, y.shape[-1])
            current = model.with_params(params)
            try:
                with np.errstate(over="raise", invalid="raise"):
                    loss, grads = loss_and_grads(current, x, y, config.loss_scope)
            except (ArithmeticError, FloatingPointError):
                loss = float("nan")
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch,
                                       round_to_payload(current))
            total += loss * len(idx)
            params, adam = adam_update(params, grads, adam, config.learning_rate,
                                       config.adam_beta1, config.adam_beta2, config.adam_eps)
        loss = total / n_units
        losses.append(loss)
        if config.log_every and epoch % config.log_every == 0:
            log.info("epoch %d loss %.6e", epoch, loss)
    return TrainResult(round_to_payload(model.with_params(params)), losses)
