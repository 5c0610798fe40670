"""Euler and classical RK4 residual blocks around a shared increment operator.

``delta`` arguments accept a :class:`~specdyn.delta.DeltaNet` or any callable
mapping a state (or batch of states) to an increment of the same shape; the
latter is how hand-built vector fields are checked. Gradients require a
``DeltaNet``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .delta import DeltaGradients, DeltaNet, delta_backward
from .errors import ContractError, DivergenceError
from .numerics import DTYPE

Delta = Union[DeltaNet, Callable[[np.ndarray], np.ndarray]]


class StepperKind(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


@dataclass
class Trajectory:
    """States ``X_start, X_start+1, ...`` one integration step apart."""

    states: list = field(default_factory=list)
    start_index: int = 0
    step: float = 1.0

    def __post_init__(self):
        if not self.states:
            raise ContractError("a trajectory holds at least one state")

    def __len__(self):
        return len(self.states)

    def as_array(self) -> np.ndarray:
        return np.stack(self.states)


def _check_h(h):
    if not h > 0:
        raise ContractError(f"integration step must be positive, got {h}")


def _finite_or_raise(value, what, step, stage=None):
    if not np.all(np.isfinite(value)):
        where = f" at stage {stage}" if stage else ""
        raise DivergenceError(f"non-finite {what}{where} (step {step})", step=step, stage=stage)
    return value


def euler_step(delta: Delta, X, h: float = 1.0, step_index: int = 0) -> np.ndarray:
    """``X + h * delta(X)``."""
    _check_h(h)
    X = np.asarray(X, dtype=DTYPE)
    out = X + h * delta(X)
    return _finite_or_raise(out, "Euler state", step_index)


def _rk4_stages(delta, X, h, step_index):
    k1 = _finite_or_raise(delta(X), "slope", step_index, "k1")
    X2 = X + 0.5 * h * k1
    k2 = _finite_or_raise(delta(X2), "slope", step_index, "k2")
    X3 = X + 0.5 * h * k2
    k3 = _finite_or_raise(delta(X3), "slope", step_index, "k3")
    X4 = X + h * k3
    k4 = _finite_or_raise(delta(X4), "slope", step_index, "k4")
    return (X, X2, X3, X4), (k1, k2, k3, k4)


def rk4_step(delta: Delta, X, h: float = 1.0, step_index: int = 0) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step with weights 1/6, 1/3, 1/3, 1/6."""
    _check_h(h)
    X = np.asarray(X, dtype=DTYPE)
    _, (k1, k2, k3, k4) = _rk4_stages(delta, X, h, step_index)
    out = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _finite_or_raise(out, "RK4 state", step_index)


def step(kind: StepperKind, delta: Delta, X, h: float = 1.0, step_index: int = 0) -> np.ndarray:
    kind = StepperKind(kind)
    if kind is StepperKind.EULER:
        return euler_step(delta, X, h, step_index)
    return rk4_step(delta, X, h, step_index)


def step_backward(kind: StepperKind, net: DeltaNet, X, h: float, upstream) -> DeltaGradients:
    """Gradients of ``<upstream, step(X)>`` w.r.t. the shared parameters and ``X``.

    Works on single states and on batches (parameter gradients summed).
    """
    kind = StepperKind(kind)
    _check_h(h)
    X = np.asarray(X, dtype=DTYPE)
    upstream = np.asarray(upstream, dtype=DTYPE)
    if upstream.shape != X.shape:
        raise ContractError(f"upstream shape {upstream.shape} != state shape {X.shape}")

    if kind is StepperKind.EULER:
        grads = delta_backward(net, X, h * upstream)
        grads.gInput = upstream + grads.gInput
        return grads

    (X1, X2, X3, X4), _ = _rk4_stages(net, X, h, 0)
    d_k = [h / 6.0 * upstream, h / 3.0 * upstream, h / 3.0 * upstream, h / 6.0 * upstream]
    d_x = upstream.copy()

    g4 = delta_backward(net, X4, d_k[3])
    d_x += g4.gInput
    d_k[2] = d_k[2] + h * g4.gInput

    g3 = delta_backward(net, X3, d_k[2])
    d_x += g3.gInput
    d_k[1] = d_k[1] + 0.5 * h * g3.gInput

    g2 = delta_backward(net, X2, d_k[1])
    d_x += g2.gInput
    d_k[0] = d_k[0] + 0.5 * h * g2.gInput

    g1 = delta_backward(net, X1, d_k[0])
    d_x += g1.gInput

    total = g1
    total += g2
    total += g3
    total += g4
    total.gInput = d_x
    return total


def rollout(kind: StepperKind, delta: Delta, X0, T: int, h: float = 1.0,
            start_index: int = 0) -> Trajectory:
    """Iterate the stepper ``T`` times, feeding each prediction back in.

    On divergence the raised :class:`DivergenceError` carries the partial
    trajectory (``partial``) and the failing step (``step``).
    """
    if T < 0:
        raise ContractError(f"step count must be >= 0, got {T}")
    X = np.array(X0, dtype=DTYPE)
    states = [X]
    for t in range(1, T + 1):
        try:
            X = step(kind, delta, X, h, step_index=t)
        except DivergenceError as exc:
            exc.partial = Trajectory(states, start_index, h)
            raise
        states.append(X)
    return Trajectory(states, start_index, h)
