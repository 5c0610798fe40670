"""Spectral cube container, ``.sstc`` file I/O and the preprocessing chain.

``.sstc`` layout (all integers little-endian)::

    0   4 bytes   magic b"SSTC"
    4   uint32    format version (1)
    8   uint64    header length N in bytes
    16  N bytes   UTF-8 JSON header: T, H, W, L, dates, validity,
                  band_meta, normalization
    16+N          T*H*W*L float32 values, index order t, h, w, l
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .augment import ReflectanceSeries
from .errors import ContractError, FormatError, UnfillableDatesError

MAGIC = b"SSTC"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
PAYLOAD_DTYPE = np.dtype("<f4")


def default_band_meta(L: int) -> list[dict]:
    return [{"resolution": "10m", "gain": 1.0} for _ in range(L)]


@dataclass
class SpectralCube:
    """``data`` is ``(T, H, W, L)`` float32; ``validity[t]`` flags usable dates."""

    data: np.ndarray
    dates: list
    validity: np.ndarray | None = None
    band_meta: list = field(default_factory=list)
    normalization: float | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 4:
            raise ContractError(f"cube data must be (T, H, W, L), got shape {self.data.shape}")
        T, _, _, L = self.data.shape
        self.dates = [str(d) for d in self.dates]
        if len(self.dates) == 0:
            raise ContractError("cube needs at least one date")
        if len(self.dates) != T:
            raise ContractError(f"{len(self.dates)} dates for T={T} images")
        days = date_offsets_days(self.dates)
        if np.any(np.diff(days) <= 0):
            raise ContractError("dates must be strictly increasing")
        if self.validity is None:
            self.validity = np.ones(T, dtype=bool)
        self.validity = np.asarray(self.validity, dtype=bool)
        if self.validity.shape != (T,):
            raise ContractError(f"validity must have {T} flags")
        if not self.validity.any():
            raise ContractError("cube needs at least one valid date")
        if not self.band_meta:
            self.band_meta = default_band_meta(L)
        if len(self.band_meta) != L:
            raise ContractError(f"{len(self.band_meta)} band_meta entries for L={L}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def L(self):
        return self.data.shape[3]

    def pixel_series(self, row: int, col: int) -> ReflectanceSeries:
        return ReflectanceSeries(self.data[:, row, col, :].astype(np.float64), name=f"{row},{col}")


def date_offsets_days(dates) -> np.ndarray:
    """Calendar-day distance of each ISO-8601 date/datetime from the first one."""
    parsed = [datetime.fromisoformat(str(d)) for d in dates]
    t0 = parsed[0]
    return np.array([(d - t0).total_seconds() / 86400.0 for d in parsed])


# ---------------------------------------------------------------- file I/O

def _header(cube: SpectralCube) -> dict:
    T, H, W, L = cube.shape
    return {
        "T": T, "H": H, "W": W, "L": L,
        "dates": list(cube.dates),
        "validity": [bool(v) for v in cube.validity],
        "band_meta": cube.band_meta,
        "normalization": cube.normalization,
    }


def cube_to_bytes(cube: SpectralCube) -> bytes:
    header = json.dumps(_header(cube), sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(cube.data, dtype=PAYLOAD_DTYPE).tobytes()
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + payload


def cube_from_bytes(buf: bytes) -> SpectralCube:
    if len(buf) < _PREFIX.size:
        raise FormatError("file shorter than fixed prefix", offset=len(buf))
    magic, version, hlen = _PREFIX.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    start = _PREFIX.size
    if len(buf) < start + hlen:
        raise FormatError("truncated header", offset=len(buf))
    try:
        head = json.loads(buf[start:start + hlen].decode("utf-8"))
        dims = tuple(int(head[k]) for k in ("T", "H", "W", "L"))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"unreadable header: {exc}", offset=start) from exc
    if not head.get("dates"):
        raise FormatError("empty date list", offset=start)
    if len(head["dates"]) != dims[0]:
        raise FormatError(f"{len(head['dates'])} dates for T={dims[0]}", offset=start)
    pstart = start + hlen
    expected = int(np.prod(dims)) * PAYLOAD_DTYPE.itemsize
    actual = len(buf) - pstart
    if actual != expected:
        raise FormatError(
            f"payload has {actual} bytes, header dims {dims} need {expected}",
            offset=pstart + min(actual, expected))
    data = np.frombuffer(buf, dtype=PAYLOAD_DTYPE, offset=pstart).reshape(dims)
    try:
        return SpectralCube(data.astype(np.float32), head["dates"], head.get("validity"),
                            head.get("band_meta") or [], head.get("normalization"))
    except ContractError as exc:
        raise FormatError(f"inconsistent header: {exc}", offset=start) from exc


def write_cube(cube: SpectralCube, path) -> None:
    Path(path).write_bytes(cube_to_bytes(cube))


def read_cube(path) -> SpectralCube:
    return cube_from_bytes(Path(path).read_bytes())


def write_series_csv(path, dates, samples) -> None:
    samples = np.asarray(samples)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["date"] + [f"band_{k}" for k in range(samples.shape[1])])
        for d, row in zip(dates, samples):
            out.writerow([d] + [repr(float(v)) for v in row])


def read_series_csv(path):
    """Returns ``(dates, samples)`` from a ``date,band_0,...`` file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "date":
        raise FormatError(f"{path}: expected a 'date,band_0,...' header", offset=0)
    dates = [r[0] for r in rows[1:]]
    samples = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return dates, samples


# ---------------------------------------------------------- preprocessing

def cressman_fill(cube: SpectralCube, radius_days: float = 10.0, cutoff: float = 3.0) -> SpectralCube:
    """Replace every invalid image by a Gaussian-weighted mean of valid images.

    Weights are ``exp(-d^2 / R^2)`` over valid dates within ``cutoff * R``
    days. Valid images are copied untouched; the result is fully valid.
    """
    if radius_days <= 0:
        raise ContractError(f"radius must be positive, got {radius_days}")
    if cube.validity.all():
        return replace(cube, data=cube.data.copy(), validity=cube.validity.copy())
    days = date_offsets_days(cube.dates)
    valid = np.flatnonzero(cube.validity)
    out = cube.data.copy()
    unfillable = []
    for t in np.flatnonzero(~cube.validity):
        d = days[valid] - days[t]
        near = np.abs(d) <= cutoff * radius_days
        if not near.any():
            unfillable.append(cube.dates[t])
            continue
        w = np.exp(-(d[near] / radius_days) ** 2)
        w /= w.sum()
        stack = cube.data[valid[near]].astype(np.float64)
        out[t] = np.tensordot(w, stack, axes=1).astype(np.float32)
    if unfillable:
        raise UnfillableDatesError(unfillable)
    return replace(cube, data=out, validity=np.ones(cube.T, dtype=bool))


def apply_band_gains(cube: SpectralCube) -> SpectralCube:
    """Multiply each band by its ``band_meta`` gain (identity by default)."""
    gains = np.array([m.get("gain", 1.0) for m in cube.band_meta], dtype=np.float64)
    if np.all(gains == 1.0):
        return cube
    return replace(cube, data=(cube.data * gains).astype(np.float32))


def global_normalize(cube: SpectralCube) -> tuple[SpectralCube, float]:
    """Divide every value by the maximum over all pixels, dates and bands."""
    m = float(cube.data.max())
    if not m > 0:
        raise ContractError(f"cannot normalize a cube with maximum {m}")
    data = (cube.data / np.float32(m)).astype(np.float32)
    prior = cube.normalization or 1.0
    return replace(cube, data=data, normalization=prior * m), m


def _keys_kernel(x, a=-0.5):
    x = np.abs(x)
    return np.where(
        x <= 1, (a + 2) * x**3 - (a + 3) * x**2 + 1,
        np.where(x < 2, a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a, 0.0))


def _upsample_axis(a: np.ndarray, factor: int) -> np.ndarray:
    n = a.shape[0]
    pos = np.arange(n * factor) / factor
    base = np.floor(pos).astype(int)
    frac = pos - base
    out = np.zeros((n * factor,) + a.shape[1:])
    for k in (-1, 0, 1, 2):
        idx = np.clip(base + k, 0, n - 1)
        w = _keys_kernel(frac - k)
        out += w.reshape((-1,) + (1,) * (a.ndim - 1)) * a[idx]
    return out


def bicubic_upsample(plane, factor: int = 2) -> np.ndarray:
    """Keys cubic convolution (a = -0.5) with edge clamping.

    Output sample ``i`` sits at input coordinate ``i / factor``, so every
    original sample is reproduced exactly at even output indices.
    """
    if factor != 2:
        raise ContractError("only factor 2 is supported")
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim < 2 or plane.shape[0] < 4 or plane.shape[1] < 4:
        raise ContractError(f"plane must be at least 4x4, got {plane.shape}")
    rows = _upsample_axis(plane, factor)
    return np.swapaxes(_upsample_axis(np.swapaxes(rows, 0, 1), factor), 0, 1)


def extract_pixel_neighborhood(cube: SpectralCube, row: int, col: int) -> list[ReflectanceSeries]:
    """Centre pixel followed by its north, south, east and west neighbours."""
    _, H, W, _ = cube.shape
    if not (1 <= row < H - 1 and 1 <= col < W - 1):
        raise ContractError(f"pixel ({row}, {col}) must be at least one pixel inside a {H}x{W} image")
    offsets = [(0, 0), (-1, 0), (1, 0), (0, 1), (0, -1)]
    return [cube.pixel_series(row + dr, col + dc) for dr, dc in offsets]
