"""Toy reflectance dynamics from a simplified Hapke model under periodic illumination."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .augment import ReflectanceSeries
from .errors import ContractError
from .numerics import DTYPE, make_rng

MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class SyntheticConfig:
    L: int = 16
    n_days: float = 20
    step_minutes: int = 30
    theta_min: float = math.radians(10.0)
    theta_max: float = math.radians(60.0)
    noise_std: float = 0.0
    seed: int = 0
    period_days: float = 1.0
    view_cosine: float = 1.0
    start: str = "2020-01-01T00:00:00"

    def __post_init__(self):
        if self.L < 1:
            raise ContractError(f"L must be >= 1, got {self.L}")
        if self.n_days <= 0:
            raise ContractError(f"n_days must be positive, got {self.n_days}")
        if not 0 <= self.theta_min < self.theta_max < math.pi / 2:
            raise ContractError("need 0 <= theta_min < theta_max < pi/2 (radians)")
        if self.noise_std < 0:
            raise ContractError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.step_minutes <= 0 or self.period_minutes % self.step_minutes:
            raise ContractError(
                f"step_minutes={self.step_minutes} must divide the period ({self.period_minutes} min)")
        if not 0 < self.view_cosine <= 1:
            raise ContractError("view_cosine must lie in (0, 1]")

    @property
    def period_minutes(self) -> int:
        return round(self.period_days * MINUTES_PER_DAY)

    @property
    def n_samples(self) -> int:
        return int(round(self.n_days * MINUTES_PER_DAY / self.step_minutes))

    @property
    def steps_per_period(self) -> int:
        return self.period_minutes // self.step_minutes


def gen_albedos(L: int, seed: int, max_jump: float = 0.25) -> np.ndarray:
    """Smooth pseudo-spectrum of single-scattering albedos in [0.05, 0.95].

    Sum of 3-5 Gaussian bumps over the band axis, min-max rescaled. Adjacent
    bands differ by at most ``max_jump``; bumps are widened until that holds.
    """
    if L < 1:
        raise ContractError(f"L must be >= 1, got {L}")
    rng = make_rng(seed)
    if L == 1:
        return np.array([rng.uniform(0.05, 0.95)])
    x = np.linspace(0.0, 1.0, L)
    n = int(rng.integers(3, 6))
    centers = rng.uniform(0.0, 1.0, n)
    widths = rng.uniform(0.08, 0.3, n)
    heights = rng.uniform(0.2, 1.0, n)
    while True:
        curve = (heights[:, None] * np.exp(-0.5 * ((x[None, :] - centers[:, None]) / widths[:, None]) ** 2)).sum(0)
        span = curve.max() - curve.min()
        w = 0.05 + 0.9 * (curve - curve.min()) / span if span > 0 else np.full(L, 0.5)
        if np.max(np.abs(np.diff(w))) <= max_jump:
            return w
        widths = widths * 1.25


def illumination_cosine(t_minutes, cfg: SyntheticConfig):
    """Cosine of the solar zenith angle; zenith oscillates between the bounds.

    The zenith is ``theta_min`` at ``t=0`` and ``theta_max`` half a period later.
    """
    mid = 0.5 * (cfg.theta_min + cfg.theta_max)
    # signed half-range so that t=0 sits at theta_min
    half = 0.5 * (cfg.theta_min - cfg.theta_max)
    period = cfg.period_minutes
    phase = np.mod(t_minutes, period) / period
    return np.cos(mid + half * np.cos(2.0 * np.pi * phase))


def hapke_reflectance(w, mu0, mu):
    """Two-factor simplified Hapke reflectance ``w / (H(mu) H(mu0))``.

    ``H(x) = 1 + 2 x sqrt(1 - w)``. Broadcasts over arrays.
    """
    w = np.asarray(w, dtype=DTYPE)
    mu0 = np.asarray(mu0, dtype=DTYPE)
    mu = np.asarray(mu, dtype=DTYPE)
    if np.any((w < 0) | (w > 1)):
        raise ContractError("albedo must lie in [0, 1]")
    if np.any((mu0 <= 0) | (mu0 > 1)) or np.any((mu <= 0) | (mu > 1)):
        raise ContractError("illumination and view cosines must lie in (0, 1]")
    gamma = np.sqrt(1.0 - w)
    return w / ((1.0 + 2.0 * mu * gamma) * (1.0 + 2.0 * mu0 * gamma))


def generate_series(cfg: SyntheticConfig, albedo=None) -> ReflectanceSeries:
    """One sample per ``step_minutes``: Hapke reflectance per band plus noise, clipped to [0, 1]."""
    if albedo is None:
        albedo = gen_albedos(cfg.L, cfg.seed)
    albedo = np.asarray(albedo, dtype=DTYPE)
    if albedo.shape != (cfg.L,):
        raise ContractError(f"albedo length {albedo.shape} != L = {cfg.L}")
    # integer minutes keep the drive exactly periodic
    t = np.arange(cfg.n_samples, dtype=np.int64) * cfg.step_minutes
    mu0 = illumination_cosine(t, cfg)
    R = hapke_reflectance(albedo[None, :], mu0[:, None], cfg.view_cosine)
    if cfg.noise_std > 0:
        # noise stream is separate from the albedo stream for the same seed
        rng = make_rng(cfg.seed + 1)
        R = R + rng.normal(0.0, cfg.noise_std, size=R.shape)
    return ReflectanceSeries(np.clip(R, 0.0, 1.0), dt=cfg.step_minutes / MINUTES_PER_DAY)


def sample_dates(cfg: SyntheticConfig) -> list[str]:
    start = datetime.fromisoformat(cfg.start)
    step = timedelta(minutes=cfg.step_minutes)
    return [(start + k * step).isoformat() for k in range(cfg.n_samples)]


def single_pixel_cube(cfg: SyntheticConfig, albedo=None):
    """The generated series wrapped as a ``(T, 1, 1, L)`` cube with all dates valid."""
    from .cube import SpectralCube

    series = generate_series(cfg, albedo)
    data = series.samples.reshape(len(series), 1, 1, cfg.L)
    return SpectralCube(data, sample_dates(cfg))


def seasonal_scene(cfg: SyntheticConfig, height: int, width: int, spread: float = 0.05):
    """Spatial cube whose pixels share the illumination cycle but differ in albedo.

    Each pixel's albedo is the base spectrum of ``cfg.seed`` scaled by a
    factor in ``[1 - spread, 1 + spread]``; a smooth spatial gradient keeps
    neighbours similar.
    """
    from .cube import SpectralCube

    base = gen_albedos(cfg.L, cfg.seed)
    t = np.arange(cfg.n_samples, dtype=np.int64) * cfg.step_minutes
    mu0 = illumination_cosine(t, cfg)
    rows = np.linspace(-1.0, 1.0, height)[:, None]
    cols = np.linspace(-1.0, 1.0, width)[None, :]
    scale = 1.0 + spread * 0.5 * (rows + cols)
    w = np.clip(base[None, None, :] * scale[:, :, None], 0.0, 1.0)
    R = hapke_reflectance(w[None], mu0[:, None, None, None], cfg.view_cosine)
    if cfg.noise_std > 0:
        R = R + make_rng(cfg.seed + 1).normal(0.0, cfg.noise_std, size=R.shape)
    return SpectralCube(np.clip(R, 0.0, 1.0), sample_dates(cfg))
