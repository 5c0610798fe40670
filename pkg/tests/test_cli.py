import csv
import json

import numpy as np
import pytest

from specdyn.cli import main
from specdyn.cube import SpectralCube, read_cube, write_cube
from specdyn.model import init_model, read_checkpoint, save_checkpoint


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture
def small_cube(tmp_path):
    path = tmp_path / "c.sstc"
    assert run("generate", "--out", path, "--bands", 3, "--days", 2, "--seed", 1) == 0
    return path


def test_generate_default_960_samples(tmp_path):
    out = tmp_path / "g.sstc"
    assert run("generate", "--out", out) == 0
    cube = read_cube(out)
    assert cube.shape == (960, 1, 1, 16)
    manifest = json.loads((tmp_path / "g.sstc.manifest.json").read_text())
    assert manifest["subcommand"] == "generate" and manifest["seed"] == 0


def test_generate_seed_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.sstc", tmp_path / "b.sstc"
    for p in (a, b):
        assert run("generate", "--out", p, "--seed", 7, "--noise-std", 0.01, "--days", 1) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_rejects_negative_noise(tmp_path):
    assert run("generate", "--out", tmp_path / "x.sstc", "--noise-std", -1) == 2
    assert not (tmp_path / "x.sstc").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bands": 5, "days": 1}))
    assert run("generate", "--config", cfg, "--out", tmp_path / "a.sstc") == 0
    assert read_cube(tmp_path / "a.sstc").shape == (48, 1, 1, 5)
    assert run("generate", "--config", cfg, "--bands", 2, "--out", tmp_path / "b.sstc") == 0
    assert read_cube(tmp_path / "b.sstc").shape == (48, 1, 1, 2)
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run("generate", "--config", cfg, "--out", tmp_path / "c.sstc") == 2


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SPECDYN_SEED", "7")
    assert run("generate", "--out", tmp_path / "e.sstc", "--noise-std", 0.01, "--days", 1) == 0
    monkeypatch.delenv("SPECDYN_SEED")
    assert run("generate", "--out", tmp_path / "f.sstc", "--noise-std", 0.01, "--days", 1,
               "--seed", 7) == 0
    assert (tmp_path / "e.sstc").read_bytes() == (tmp_path / "f.sstc").read_bytes()


def test_gapfill_identity(tmp_path, small_cube):
    out = tmp_path / "f.sstc"
    assert run("gapfill", small_cube, "--out", out) == 0
    assert read_cube(out).data.tobytes() == read_cube(small_cube).data.tobytes()


def test_gapfill_unfillable_exits_nonzero(tmp_path, capsys):
    dates = ["2020-01-01", "2020-03-01", "2020-03-02"]
    cube = SpectralCube(np.full((3, 1, 1, 2), 0.5), dates, np.array([True, False, False]))
    write_cube(cube, tmp_path / "u.sstc")
    assert run("gapfill", tmp_path / "u.sstc", "--out", tmp_path / "o.sstc") == 1
    assert "2020-03-01" in capsys.readouterr().err


def test_train_zero_epochs_equals_init(tmp_path, small_cube):
    ck = tmp_path / "m.sdmodel"
    assert run("train", small_cube, "--out", ck, "--epochs", 0, "--width", 4, "--seed", 3) == 0
    model = read_checkpoint(ck)
    init = init_model("rk4", 3, 4, seed=3)
    for name, value in init.params().items():
        np.testing.assert_array_equal(model.params()[name], value)


def test_euler_and_rk4_share_init(tmp_path, small_cube):
    paths = {}
    for kind in ("euler", "rk4"):
        paths[kind] = tmp_path / f"{kind}.sdmodel"
        assert run("train", small_cube, "--out", paths[kind], "--model", kind,
                   "--epochs", 0, "--width", 4) == 0
    a, b = read_checkpoint(paths["euler"]), read_checkpoint(paths["rk4"])
    assert a.kind != b.kind
    for name in a.params():
        np.testing.assert_array_equal(a.params()[name], b.params()[name])


def test_rollout_steps(tmp_path, small_cube):
    ck = tmp_path / "m.sdmodel"
    assert run("train", small_cube, "--out", ck, "--epochs", 2, "--width", 4) == 0
    out = tmp_path / "t.csv"
    assert run("rollout", ck, small_cube, "--out", out, "--steps", 0, "--start", 10) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["step", "date", "band_0", "band_1", "band_2"] and len(rows) == 2
    cube = read_cube(small_cube)
    np.testing.assert_array_equal([float(v) for v in rows[1][2:]], cube.data[10, 0, 0].astype(float))
    phase = tmp_path / "p.csv"
    assert run("rollout", ck, small_cube, "--out", out, "--steps", 73, "--start", 5,
               "--phase-csv", phase, "--band", 2) == 0
    assert len(list(csv.reader(out.open()))) == 75
    assert len(phase.read_text().splitlines()) == 75


def test_rollout_l_mismatch(tmp_path, small_cube):
    other = tmp_path / "o.sstc"
    assert run("generate", "--out", other, "--bands", 4, "--days", 1) == 0
    ck = tmp_path / "m.sdmodel"
    assert run("train", other, "--out", ck, "--epochs", 0, "--width", 2) == 0
    assert run("rollout", ck, small_cube, "--out", tmp_path / "t.csv") == 2


def test_evaluate_horizons(tmp_path, small_cube):
    cks = []
    for kind in ("euler", "rk4", "lstm"):
        cks.append(tmp_path / f"{kind}.sdmodel")
        assert run("train", small_cube, "--out", cks[-1], "--model", kind, "--epochs", 1,
                   "--width", 3, "--train-dates", 40) == 0
    out = tmp_path / "r.csv"
    assert run("evaluate", *cks, "--input", small_cube, "--out", out, "--horizons", "0,12,24,36",
               "--start", 50) == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["model"], int(r["horizon"])) for r in rows] == \
           [(k, h) for k in ("euler", "rk4", "lstm") for h in (0, 12, 24, 36)]
    assert all(float(r["rmse"]) == 0.0 for r in rows if r["horizon"] == "0")


def test_missing_input_reports_path(tmp_path, capsys):
    missing = tmp_path / "nope.sstc"
    assert run("gapfill", missing, "--out", tmp_path / "o.sstc") == 1
    assert "nope.sstc" in capsys.readouterr().err
