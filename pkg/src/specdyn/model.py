"""Model container shared by the ResNet steppers and the LSTM baseline,
plus the ``.sdmodel`` checkpoint format and long-run forecasting.

``.sdmodel`` layout (integers little-endian)::

    0   8 bytes   magic b"SDMODEL\\0"
    8   uint32    format version (1)
    12  uint64    manifest length N in bytes
    20  N bytes   UTF-8 JSON manifest (model_type, L, width, seed, config,
                  param_order, param_shapes)
    20+N          float32 parameters, concatenated in param_order, each
                  matrix row-major (W1, b1, W2, b2 | Wx, Wh, b, Wy, by)
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import delta as delta_mod
from . import lstm as lstm_mod
from .delta import DeltaNet, init_delta
from .errors import ContractError, DivergenceError, FormatError
from .integrators import StepperKind, Trajectory, rollout
from .lstm import LstmParams, LstmState, init_lstm, lstm_step
from .numerics import DTYPE, make_rng

MAGIC = b"SDMODEL\0"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
PAYLOAD_DTYPE = np.dtype("<f4")


class ModelKind(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"
    LSTM = "lstm"

    @property
    def stepper(self) -> StepperKind | None:
        return None if self is ModelKind.LSTM else StepperKind(self.value)


@dataclass
class Model:
    kind: ModelKind
    net: DeltaNet | LstmParams
    seed: int = 0
    config: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.net.L

    @property
    def width(self) -> int:
        return self.net.hidden if self.kind is ModelKind.LSTM else self.net.width

    @property
    def window(self) -> int:
        return int(self.config.get("window", 8))

    def params(self) -> dict[str, np.ndarray]:
        return self.net.params()

    def with_params(self, params) -> "Model":
        cls = LstmParams if self.kind is ModelKind.LSTM else DeltaNet
        return Model(self.kind, cls.from_params(params), self.seed, self.config)


def init_model(kind, L: int, width: int, seed: int, config: dict | None = None) -> Model:
    """Fresh model; Euler and RK4 share the same initial network for a given seed."""
    kind = ModelKind(kind)
    config = dict(config or {})
    rng = make_rng(seed)
    if kind is ModelKind.LSTM:
        net = init_lstm(L, width, rng)
    else:
        net = init_delta(L, width, rng, config.get("init_gain", delta_mod.DEFAULT_INIT_GAIN))
    return Model(kind, net, seed, config)


def _names(kind: ModelKind):
    return lstm_mod.PARAM_NAMES if kind is ModelKind.LSTM else delta_mod.PARAM_NAMES


def _shapes(kind: ModelKind, L: int, width: int) -> dict[str, tuple]:
    n = 2 * L
    if kind is ModelKind.LSTM:
        H = width
        return {"Wx": (4 * H, n), "Wh": (4 * H, H), "b": (4 * H,), "Wy": (n, H), "by": (n,)}
    return {"W1": (width, n), "b1": (width,), "W2": (n, width), "b2": (n,)}


def round_to_payload(model: Model) -> Model:
    """Round parameters to float32 so that the model equals its checkpoint."""
    return model.with_params({k: v.astype(PAYLOAD_DTYPE).astype(DTYPE) for k, v in model.params().items()})


def save_checkpoint(model: Model) -> bytes:
    names = _names(model.kind)
    shapes = _shapes(model.kind, model.L, model.width)
    manifest = {
        "format_version": VERSION,
        "model_type": model.kind.value,
        "L": model.L,
        "width": model.width,
        "seed": model.seed,
        "config": model.config,
        "param_order": list(names),
        "param_shapes": {k: list(v) for k, v in shapes.items()},
    }
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    params = model.params()
    payload = b"".join(np.ascontiguousarray(params[k], dtype=PAYLOAD_DTYPE).tobytes() for k in names)
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + payload


def load_checkpoint(buf: bytes) -> Model:
    if len(buf) < _PREFIX.size:
        raise FormatError("checkpoint shorter than fixed prefix", offset=len(buf))
    magic, version, hlen = _PREFIX.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=8)
    start = _PREFIX.size
    if len(buf) < start + hlen:
        raise FormatError("truncated manifest", offset=len(buf))
    try:
        man = json.loads(buf[start:start + hlen].decode("utf-8"))
        kind = ModelKind(man["model_type"])
        L, width = int(man["L"]), int(man["width"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"unreadable manifest: {exc}", offset=start) from exc
    if L < 1 or width < 1:
        raise FormatError(f"invalid dimensions L={L}, width={width}", offset=start)
    shapes = _shapes(kind, L, width)
    pstart = start + hlen
    need = sum(int(np.prod(s)) for s in shapes.values()) * PAYLOAD_DTYPE.itemsize
    have = len(buf) - pstart
    if have != need:
        raise FormatError(
            f"payload has {have} bytes but manifest (L={L}, width={width}) needs {need}",
            offset=pstart + min(have, need))
    params, off = {}, pstart
    for name in _names(kind):
        count = int(np.prod(shapes[name]))
        params[name] = np.frombuffer(buf, PAYLOAD_DTYPE, count, off).astype(DTYPE).reshape(shapes[name])
        off += count * PAYLOAD_DTYPE.itemsize
    cls = LstmParams if kind is ModelKind.LSTM else DeltaNet
    return Model(kind, cls.from_params(params), int(man.get("seed", 0)), man.get("config", {}))


def write_checkpoint(model: Model, path) -> None:
    Path(path).write_bytes(save_checkpoint(model))


def read_checkpoint(path) -> Model:
    return load_checkpoint(Path(path).read_bytes())


def forecast(model: Model, history, steps: int) -> Trajectory:
    """Long-run prediction from the last state of ``history`` (augmented states).

    The ResNets only use the last state. The LSTM first consumes the
    preceding ``window - 1`` true states to build its hidden state, then
    feeds back its own predictions. On divergence a
    :class:`DivergenceError` carrying the partial trajectory is raised.
    """
    history = np.atleast_2d(np.asarray(history, dtype=DTYPE))
    if steps < 0:
        raise ContractError(f"step count must be >= 0, got {steps}")
    start = history.shape[0] - 1
    if model.kind is not ModelKind.LSTM:
        with np.errstate(over="ignore", invalid="ignore"):
            traj = rollout(model.kind.stepper, model.net, history[-1], steps)
        traj.start_index = start
        return traj

    p: LstmParams = model.net
    state = LstmState.zeros(p.hidden)
    for x in history[max(0, start - model.window + 1):start]:
        state, _ = lstm_step(p, state, x)
    X = history[-1].copy()
    states = [X]
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, steps + 1):
            try:
                state, X = lstm_step(p, state, X, step_index=t)
            except DivergenceError as exc:
                exc.partial = Trajectory(states, start)
                raise
            states.append(X)
    return Trajectory(states, start)
