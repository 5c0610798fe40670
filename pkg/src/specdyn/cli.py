"""``specdyn`` command line: generate, gapfill, train, rollout, evaluate.

Every flag may also come from a JSON config file (``--config``); flags given
on the command line win. The seed falls back to ``$SPECDYN_SEED``, then 0.
Exit codes: 0 success, 1 runtime/I-O error, 2 usage or contract error,
3 numerical divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .augment import augment
from .cube import (SpectralCube, cressman_fill, extract_pixel_neighborhood, global_normalize,
                   read_cube, write_cube)
from .errors import (ContractError, DivergenceError, FormatError, TrainingDiverged,
                     UnfillableDatesError)
from .evaluation import HorizonReport, evaluate_longrun, export_phase_diagram
from .hapke import SyntheticConfig, seasonal_scene, single_pixel_cube
from .model import ModelKind, forecast, init_model, read_checkpoint, write_checkpoint
from .training import TrainConfig, train

log = logging.getLogger("specdyn")

EXIT_RUNTIME, EXIT_USAGE, EXIT_DIVERGED = 1, 2, 3


class UsageError(Exception):
    pass


def _pixel(text):
    try:
        r, c = (int(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}")
    return r, c


def _horizons(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specdyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"specdyn {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON file with default option values")
        sp.add_argument("--seed", type=int)
        return sp

    g = common(sub.add_parser("generate", help="synthetic Hapke reflectance cube"))
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--bands", type=int, default=16)
    g.add_argument("--days", type=float, default=20)
    g.add_argument("--step-minutes", type=int, default=30)
    g.add_argument("--period-days", type=float, default=1.0)
    g.add_argument("--theta-min", type=float, default=10.0, help="degrees")
    g.add_argument("--theta-max", type=float, default=60.0, help="degrees")
    g.add_argument("--noise-std", type=float, default=0.0)
    g.add_argument("--height", type=int, default=1)
    g.add_argument("--width", type=int, default=1)
    g.add_argument("--invalid-fraction", type=float, default=0.0,
                   help="fraction of dates to flag invalid (cloud simulation)")

    f = common(sub.add_parser("gapfill", help="Cressman gap-filling of invalid dates"))
    f.add_argument("input", type=Path)
    f.add_argument("--out", type=Path, required=True)
    f.add_argument("--radius-days", type=float, default=10.0)
    f.add_argument("--normalize", action="store_true", help="also divide by the global maximum")

    t = common(sub.add_parser("train", help="one-step training of a model"))
    t.add_argument("input", type=Path)
    t.add_argument("--out", type=Path, required=True, help="checkpoint path (.sdmodel)")
    t.add_argument("--model", choices=[k.value for k in ModelKind], default="rk4")
    t.add_argument("--epochs", type=int, default=60000)
    t.add_argument("--width", type=int, default=150)
    t.add_argument("--pixel", type=_pixel, help="ROW,COL: train on the pixel and its 4 neighbours")
    t.add_argument("--train-dates", type=int, help="use only the first N dates")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=0)
    t.add_argument("--window", type=int, default=8)
    t.add_argument("--init-gain", type=float, default=0.1)
    t.add_argument("--loss-scope", choices=["full-state", "reflectance-only"], default="full-state")
    t.add_argument("--loss-csv", type=Path)

    r = common(sub.add_parser("rollout", help="long-run prediction from a checkpoint"))
    r.add_argument("checkpoint", type=Path)
    r.add_argument("input", type=Path)
    r.add_argument("--out", type=Path, required=True, help="trajectory CSV")
    r.add_argument("--start", type=int, help="sample index of the initial state")
    r.add_argument("--steps", type=int, default=73)
    r.add_argument("--pixel", type=_pixel)
    r.add_argument("--phase-csv", type=Path)
    r.add_argument("--band", type=int, default=0)

    e = common(sub.add_parser("evaluate", help="RMSE/SAE table over horizons"))
    e.add_argument("checkpoints", type=Path, nargs="+")
    e.add_argument("--input", type=Path, required=True)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--horizons", type=_horizons, default=[12, 24, 36, 120])
    e.add_argument("--start", type=int)
    e.add_argument("--pixel", type=_pixel)
    return p


def _apply_config(parser, args, argv):
    """Fill options not given on the command line from the JSON config file."""
    if not getattr(args, "config", None):
        return {}
    try:
        values = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {args.config}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: invalid JSON ({exc})")
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in values.items():
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise UsageError(f"{args.config}: unknown option {key!r} for {args.command}")
        if key in given:
            continue
        if key == "pixel" and value is not None:
            value = _pixel(value) if isinstance(value, str) else tuple(value)
        elif key == "horizons" and isinstance(value, str):
            value = _horizons(value)
        setattr(args, key, value)
    return values


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SPECDYN_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SPECDYN_SEED must be an integer, got {env!r}")
    return 0


def _write_manifest(args, inputs, outputs):
    echo = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = {
        "subcommand": args.command,
        "config_file": str(args.config) if args.config else None,
        "config": echo,
        "seed": args.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(str(outputs[0]) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


# ------------------------------------------------------------ subcommands

def cmd_generate(args):
    if args.noise_std < 0:
        raise UsageError("--noise-std must be >= 0")
    if not 0 <= args.invalid_fraction < 1:
        raise UsageError("--invalid-fraction must lie in [0, 1)")
    try:
        cfg = SyntheticConfig(L=args.bands, n_days=args.days, step_minutes=args.step_minutes,
                              theta_min=math.radians(args.theta_min),
                              theta_max=math.radians(args.theta_max),
                              noise_std=args.noise_std, seed=args.seed,
                              period_days=args.period_days)
    except ContractError as exc:
        raise UsageError(str(exc))
    if args.height == 1 and args.width == 1:
        cube = single_pixel_cube(cfg)
    else:
        cube = seasonal_scene(cfg, args.height, args.width)
    if args.invalid_fraction > 0:
        rng = np.random.Generator(np.random.PCG64(args.seed + 2))
        n_bad = int(round(args.invalid_fraction * cube.T))
        # keep both ends valid so every gap is bracketed
        bad = rng.choice(np.arange(1, cube.T - 1), size=n_bad, replace=False)
        cube.validity[bad] = False
    write_cube(cube, args.out)
    log.info("wrote %s with shape %s", args.out, cube.shape)
    return [], [args.out]


def cmd_gapfill(args):
    cube = read_cube(args.input)
    filled = cressman_fill(cube, args.radius_days)
    if args.normalize:
        filled, const = global_normalize(filled)
        log.info("normalized by %g", const)
    write_cube(filled, args.out)
    return [args.input], [args.out]


def _training_series(cube: SpectralCube, pixel, n_dates=None):
    if not cube.validity.all():
        raise UsageError("cube has invalid dates; run `specdyn gapfill` first")
    if n_dates is not None:
        if not 3 <= n_dates <= cube.T:
            raise UsageError(f"--train-dates must lie in [3, {cube.T}]")
        cube = SpectralCube(cube.data[:n_dates], cube.dates[:n_dates], None, cube.band_meta,
                            cube.normalization)
    _, H, W, _ = cube.shape
    if pixel is None:
        if H >= 3 and W >= 3:
            pixel = (H // 2, W // 2)
        else:
            return [cube.pixel_series(0, 0)]
    return extract_pixel_neighborhood(cube, *pixel)


def cmd_train(args):
    cube = read_cube(args.input)
    series = _training_series(cube, args.pixel, args.train_dates)
    config = TrainConfig(model=args.model, width=args.width, epochs=args.epochs,
                         learning_rate=args.lr, seed=args.seed, loss_scope=args.loss_scope,
                         window=args.window, batch_size=args.batch_size,
                         init_gain=args.init_gain)
    loss_csv = args.loss_csv or Path(str(args.out) + ".loss.csv")
    echo = asdict(config)
    echo["train_dates"] = args.train_dates or cube.T
    echo["pixel"] = list(args.pixel) if args.pixel else None
    model = init_model(config.model, series[0].L, config.width, config.seed, echo)
    try:
        result = train(config, series, model=model)
    except TrainingDiverged as exc:
        write_checkpoint(exc.checkpoint, args.out)
        raise DivergenceError(f"training diverged at epoch {exc.epoch}; last finite model "
                              f"written to {args.out}", step=exc.epoch)
    write_checkpoint(result.model, args.out)
    with open(loss_csv, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["epoch", "loss"])
        for i, v in enumerate(result.losses, 1):
            out.writerow([i, repr(v)])
    if result.losses:
        log.info("final loss %.3e", result.losses[-1])
    return [args.input], [args.out, loss_csv]


def _pixel_for(cube, pixel):
    _, H, W, _ = cube.shape
    if pixel is None:
        pixel = (H // 2, W // 2)
    r, c = pixel
    if not (0 <= r < H and 0 <= c < W):
        raise UsageError(f"pixel {pixel} outside a {H}x{W} image")
    return cube.pixel_series(r, c)


def _default_start(model, cube):
    return int(model.config.get("train_dates", cube.T)) - 1


def _future_dates(dates, start, steps):
    parsed = [datetime.fromisoformat(d) for d in dates]
    out = []
    for k in range(steps + 1):
        i = start + k
        if i < len(parsed):
            out.append(parsed[i])
        else:
            cadence = parsed[-1] - parsed[-2] if len(parsed) > 1 else timedelta(days=1)
            out.append(parsed[-1] + (i - len(parsed) + 1) * cadence)
    return [d.isoformat() for d in out]


def cmd_rollout(args):
    model = read_checkpoint(args.checkpoint)
    cube = read_cube(args.input)
    if model.L != cube.L:
        raise ContractError(f"checkpoint has L={model.L} but cube has L={cube.L}")
    series = _pixel_for(cube, args.pixel)
    start = args.start if args.start is not None else _default_start(model, cube)
    if not 1 <= start < cube.T:
        raise UsageError(f"--start must lie in [1, {cube.T - 1}]")
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    X = augment(series)
    diverged = None
    try:
        traj = forecast(model, X[:start], args.steps)
    except DivergenceError as exc:
        traj, diverged = exc.partial, exc
    states = traj.as_array()
    dates = _future_dates(cube.dates, start, len(states) - 1)
    with open(args.out, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "date"] + [f"band_{k}" for k in range(model.L)])
        for k, row in enumerate(states):
            out.writerow([k, dates[k]] + [repr(float(v)) for v in row[:model.L]])
    outputs = [args.out]
    if args.phase_csv:
        truth = X[start - 1:start - 1 + len(states)]
        export_phase_diagram(truth, states, args.band, args.phase_csv)
        outputs.append(args.phase_csv)
    if diverged is not None:
        raise DivergenceError(f"rollout diverged at step {diverged.step}; partial trajectory in "
                              f"{args.out}", step=diverged.step)
    return [args.checkpoint, args.input], outputs


def cmd_evaluate(args):
    cube = read_cube(args.input)
    models = [(Path(p).stem, read_checkpoint(p)) for p in args.checkpoints]
    for name, m in models:
        if m.L != cube.L:
            raise ContractError(f"checkpoint {name} has L={m.L} but cube has L={cube.L}")
    series = _pixel_for(cube, args.pixel)
    report = HorizonReport()
    for name, m in models:
        start = args.start if args.start is not None else _default_start(m, cube)
        report.extend(evaluate_longrun(m, series, start, args.horizons, label=name))
    report.to_csv(args.out)
    return [args.input, *args.checkpoints], [args.out]


COMMANDS = {"generate": cmd_generate, "gapfill": cmd_gapfill, "train": cmd_train,
            "rollout": cmd_rollout, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(parser, args, argv)
        args.seed = _resolve_seed(args)
        inputs, outputs = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except DivergenceError as exc:
        print(f"specdyn: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except UnfillableDatesError as exc:
        print(f"specdyn: unfillable dates: {', '.join(exc.dates)}", file=sys.stderr)
        return EXIT_RUNTIME
    except ContractError as exc:
        print(f"specdyn: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"specdyn: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_manifest(args, inputs, outputs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
