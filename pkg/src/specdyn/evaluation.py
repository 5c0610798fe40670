"""Long-run forecast metrics, horizon tables and phase-diagram export."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .augment import ReflectanceSeries, augment
from .errors import ContractError, DivergenceError
from .model import Model, forecast
from .numerics import DTYPE


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=DTYPE)
    truth = np.asarray(truth, dtype=DTYPE)
    if pred.shape != truth.shape:
        raise ContractError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def sae(pred, truth) -> float:
    """Spectral angle between two spectra, in radians.

    Uses the half-angle form ``2 atan2(|u - v|, |u + v|)`` on unit vectors,
    which equals the arccos of the normalized dot product but stays exact
    near zero, where arccos loses about half the significant digits.
    """
    pred = np.asarray(pred, dtype=DTYPE).ravel()
    truth = np.asarray(truth, dtype=DTYPE).ravel()
    if pred.shape != truth.shape:
        raise ContractError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    npred, ntruth = np.linalg.norm(pred), np.linalg.norm(truth)
    if npred == 0 or ntruth == 0:
        raise ContractError("spectral angle undefined for a zero vector")
    u, v = pred / npred, truth / ntruth
    return 2.0 * math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))


@dataclass
class HorizonRow:
    horizon: int
    model: str
    rmse: float
    sae: float
    diverged: bool = False
    per_band: np.ndarray | None = None


@dataclass
class HorizonReport:
    rows: list = field(default_factory=list)

    def extend(self, other: "HorizonReport") -> None:
        self.rows.extend(other.rows)

    def lookup(self, model: str, horizon: int) -> HorizonRow:
        for r in self.rows:
            if r.model == model and r.horizon == horizon:
                return r
        raise KeyError((model, horizon))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["horizon", "model", "rmse", "sae", "diverged"])
            for r in self.rows:
                out.writerow([r.horizon, r.model, _fmt(r.rmse), _fmt(r.sae), int(r.diverged)])

    @classmethod
    def from_csv(cls, path) -> "HorizonReport":
        with open(path, newline="") as fh:
            rows = [HorizonRow(int(d["horizon"]), d["model"], float(d["rmse"]), float(d["sae"]),
                               bool(int(d["diverged"])))
                    for d in csv.DictReader(fh)]
        return cls(rows)


def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def evaluate_longrun(model: Model, series, start_index: int, horizons, label: str | None = None,
                     include_derivative: bool = False) -> HorizonReport:
    """Forecast from the true state at ``start_index`` and score each horizon.

    ``start_index`` indexes the original samples (>= 1, since the first
    sample has no left derivative). Metrics use the reflectance half of the
    state unless ``include_derivative``. Horizons past a divergence are
    reported with ``diverged=True`` and NaN metrics.
    """
    s = series.samples if isinstance(series, ReflectanceSeries) else np.asarray(series, dtype=DTYPE)
    horizons = sorted(int(h) for h in horizons)
    if start_index < 1:
        raise ContractError("start_index must be >= 1 (the first sample has no derivative)")
    if horizons and horizons[0] < 0:
        raise ContractError("horizons must be non-negative")
    if horizons and start_index + horizons[-1] >= len(s):
        raise ContractError(
            f"series of length {len(s)} does not cover start {start_index} + horizon {horizons[-1]}")
    X = augment(s)
    truth = X[start_index - 1:]  # truth[k] is the state at original index start_index + k
    steps = horizons[-1] if horizons else 0
    try:
        pred = forecast(model, X[:start_index], steps).as_array()
    except DivergenceError as exc:
        pred = exc.partial.as_array()
    L = model.L
    width = 2 * L if include_derivative else L
    label = label or model.kind.value
    report = HorizonReport()
    for h in horizons:
        if h >= len(pred) or not np.all(np.isfinite(pred[h])):
            report.rows.append(HorizonRow(h, label, math.nan, math.nan, True))
            continue
        p, t = pred[h, :width], truth[h, :width]
        with np.errstate(over="ignore"):
            err = p - t
            score = rmse(p, t)
        if not math.isfinite(score):
            # finite states whose error overflows are divergent in all but name
            report.rows.append(HorizonRow(h, label, math.nan, math.nan, True))
            continue
        angle = sae(p[:L], t[:L]) if np.any(p[:L]) else math.nan
        report.rows.append(HorizonRow(h, label, score, angle, False, per_band=np.abs(err)))
    return report


def export_phase_diagram(true_series, trajectory, band_index: int, path, L: int | None = None) -> int:
    """Write ``t,s_true,sprime_true,s_pred,sprime_pred`` rows for one band.

    ``true_series`` and ``trajectory`` are aligned arrays of augmented states
    (row ``t`` of each is the same date). Returns the number of data rows.
    """
    truth = np.asarray(true_series, dtype=DTYPE)
    pred = trajectory.as_array() if hasattr(trajectory, "as_array") else np.asarray(trajectory, dtype=DTYPE)
    L = L or pred.shape[1] // 2
    if not 0 <= band_index < L:
        raise ContractError(f"band {band_index} out of range for L={L}")
    n = min(len(truth), len(pred))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "s_true", "sprime_true", "s_pred", "sprime_pred"])
        for t in range(n):
            out.writerow([t, repr(float(truth[t, band_index])), repr(float(truth[t, L + band_index])),
                          repr(float(pred[t, band_index])), repr(float(pred[t, L + band_index]))])
    return n
