"""The learnable increment operator: a two-layer tanh network on augmented states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .numerics import DTYPE, affine_forward

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class DeltaNet:
    """``delta(X) = W2 @ tanh(W1 @ X + b1) + b2`` with ``X`` of length ``2L``.

    One parameter set is shared by every integrator stage and every time step.
    """

    W1: np.ndarray  # (b, 2L)
    b1: np.ndarray  # (b,)
    W2: np.ndarray  # (2L, b)
    b2: np.ndarray  # (2L,)

    def __post_init__(self):
        hidden, n_in = self.W1.shape
        if n_in % 2:
            raise ContractError(f"input dimension must be 2L (even), got {n_in}")
        if self.b1.shape != (hidden,):
            raise ContractError(f"b1 shape {self.b1.shape} != ({hidden},)")
        if self.W2.shape != (n_in, hidden):
            raise ContractError(f"W2 shape {self.W2.shape} != ({n_in}, {hidden})")
        if self.b2.shape != (n_in,):
            raise ContractError(f"b2 shape {self.b2.shape} != ({n_in},)")

    @property
    def L(self) -> int:
        return self.W1.shape[1] // 2

    @property
    def width(self) -> int:
        return self.W1.shape[0]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params().values())

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    @classmethod
    def from_params(cls, params: dict[str, np.ndarray]) -> "DeltaNet":
        return cls(*(np.asarray(params[k], dtype=DTYPE) for k in PARAM_NAMES))

    def __call__(self, X):
        return delta_forward(self, X)


@dataclass
class DeltaGradients:
    gW1: np.ndarray
    gb1: np.ndarray
    gW2: np.ndarray
    gb2: np.ndarray
    gInput: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.gW1, "b1": self.gb1, "W2": self.gW2, "b2": self.gb2}

    def __iadd__(self, other: "DeltaGradients") -> "DeltaGradients":
        self.gW1 += other.gW1
        self.gb1 += other.gb1
        self.gW2 += other.gW2
        self.gb2 += other.gb2
        return self


DEFAULT_INIT_GAIN = 0.1


def _uniform_fan(rng: np.random.Generator, fan_out: int, fan_in: int, gain: float) -> np.ndarray:
    a = gain * np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-a, a, size=(fan_out, fan_in))
    # float32-representable so checkpoints round-trip exactly from step 0
    return w.astype(np.float32).astype(DTYPE)


def init_delta(L: int, b: int, rng: np.random.Generator,
               gain: float = DEFAULT_INIT_GAIN) -> DeltaNet:
    """Uniform fan-balanced weights scaled by ``gain``, zero biases.

    With ``gain=1`` this is the usual Glorot-uniform scheme. The default 0.1
    keeps the Jacobian of ``delta`` small in directions the training data
    never visits; at ``gain=1`` long rollouts of trained models blow up.
    """
    if L < 1 or b < 1:
        raise ContractError(f"need L >= 1 and b >= 1, got L={L}, b={b}")
    W1 = _uniform_fan(rng, b, 2 * L, gain)
    W2 = _uniform_fan(rng, 2 * L, b, gain)
    return DeltaNet(W1, np.zeros(b), W2, np.zeros(2 * L))


def _check_input(net: DeltaNet, X) -> np.ndarray:
    X = np.asarray(X, dtype=DTYPE)
    if X.shape[-1] != 2 * net.L:
        raise ContractError(f"state length {X.shape[-1]} != 2L = {2 * net.L}")
    return X


def delta_forward(net: DeltaNet, X) -> np.ndarray:
    """Apply the network to one state ``(2L,)`` or a batch ``(N, 2L)``."""
    X = _check_input(net, X)
    hidden = np.tanh(affine_forward(net.W1, net.b1, X))
    return affine_forward(net.W2, net.b2, hidden)


def delta_backward(net: DeltaNet, X, upstream) -> DeltaGradients:
    """Gradients of ``<upstream, delta_forward(net, X)>``.

    For a batch, parameter gradients are summed over rows and ``gInput`` keeps
    one row per input state.
    """
    X = _check_input(net, X)
    upstream = np.asarray(upstream, dtype=DTYPE)
    if upstream.shape != X.shape:
        raise ContractError(f"upstream shape {upstream.shape} != state shape {X.shape}")
    single = X.ndim == 1
    if single:
        X, upstream = X[None, :], upstream[None, :]
    hidden = np.tanh(X @ net.W1.T + net.b1)
    g_hidden = (upstream @ net.W2) * (1.0 - hidden * hidden)
    grads = DeltaGradients(
        gW1=g_hidden.T @ X,
        gb1=g_hidden.sum(axis=0),
        gW2=upstream.T @ hidden,
        gb2=upstream.sum(axis=0),
        gInput=g_hidden @ net.W1,
    )
    if single:
        grads.gInput = grads.gInput[0]
    return grads
