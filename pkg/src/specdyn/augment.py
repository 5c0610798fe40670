"""Augmented state variable: reflectance stacked with its left derivative."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InsufficientHistoryError
from .numerics import DTYPE


@dataclass(frozen=True)
class ReflectanceSeries:
    """``samples`` is a ``(T, L)`` array of normalized reflectances."""

    samples: np.ndarray
    dt: float = 1.0
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=DTYPE)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ContractError(f"samples must be (T, L), got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def L(self) -> int:
        return self.samples.shape[1]


def augment(series, order: int = 1) -> np.ndarray:
    """Stack each sample with its left difference(s); returns ``(T - order, (order+1) L)``.

    Row ``k`` belongs to original index ``k + order``. With ``order=1`` (the
    default) row ``k`` is ``[s_{k+1}, s_{k+1} - s_k]``. The difference is
    taken per index step regardless of ``series.dt``.
    """
    s = series.samples if isinstance(series, ReflectanceSeries) else np.asarray(series, dtype=DTYPE)
    if s.ndim == 1:
        s = s[:, None]
    if order < 1:
        raise ContractError(f"derivative order must be >= 1, got {order}")
    if s.shape[0] < order + 1:
        raise InsufficientHistoryError(
            f"need at least {order + 1} samples to augment, got {s.shape[0]}")
    blocks = [s]
    diff = s
    for _ in range(order):
        diff = diff[1:] - diff[:-1]
        blocks.append(diff)
    n = s.shape[0] - order
    return np.concatenate([b[b.shape[0] - n:] for b in blocks], axis=1)


def extract_reflectance(X, L: int | None = None) -> np.ndarray:
    """First ``L`` entries of an augmented state (or of each row of a batch).

    ``L`` defaults to half the state length, i.e. first-order augmentation.
    """
    X = np.asarray(X, dtype=DTYPE)
    if L is None:
        L = X.shape[-1] // 2
    return X[..., :L]
