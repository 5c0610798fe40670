"""Small dense-math helpers and the finite-difference gradient oracle.

Dense matrices are plain 2-D ``float64`` numpy arrays (row-major). Random
numbers come from numpy's PCG64 bit generator, which is documented and
stable across platforms for a given seed.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ContractError

DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64) for ``seed``."""
    if seed < 0:
        raise ContractError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.array(data, dtype=DTYPE)
    if rows is not None and cols is not None:
        if m.size != rows * cols:
            raise ContractError(f"data length {m.size} != rows*cols = {rows}*{cols}")
        m = m.reshape(rows, cols)
    if m.ndim != 2:
        raise ContractError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def affine_forward(W: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``W @ x + bias``; ``x`` may also be a batch of row vectors ``(N, cols)``."""
    W = np.asarray(W, dtype=DTYPE)
    bias = np.asarray(bias, dtype=DTYPE)
    x = np.asarray(x, dtype=DTYPE)
    if W.ndim != 2:
        raise ContractError(f"W must be 2-D, got shape {W.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ContractError(f"W has {W.shape[1]} columns but x has length {x.shape[-1]}")
    if bias.shape != (W.shape[0],):
        raise ContractError(f"bias length {bias.shape} does not match W rows {W.shape[0]}")
    return x @ W.T + bias


def tanh_elementwise(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=DTYPE))


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    x = np.array(x, dtype=DTYPE)
    flat = x.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x))
        flat[i] = orig - eps
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ArithmeticError(f"non-finite function value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad.reshape(x.shape)


def max_relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all coordinates.

    The floor stops round-off in the finite differences (about 1e-10 in
    double precision) from dominating coordinates whose true gradient is ~0.
    """
    a = np.asarray(analytic, dtype=DTYPE).ravel()
    n = np.asarray(numeric, dtype=DTYPE).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
