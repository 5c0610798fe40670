import json
import struct

import numpy as np
import pytest

from specdyn.augment import ReflectanceSeries, augment
from specdyn.errors import ContractError, FormatError, InsufficientHistoryError, TrainingDiverged
from specdyn.model import (Model, ModelKind, init_model, load_checkpoint, round_to_payload,
                           save_checkpoint)
from specdyn.numerics import finite_diff_gradient, make_rng, max_relative_error
from specdyn.training import (AdamState, TrainConfig, adam_update, loss_and_grads,
                              lstm_windows, make_training_pairs, mse_loss, train)


def decay_series(n=40, L=2):
    start = np.linspace(0.5, 1.0, L)
    return ReflectanceSeries(start[None, :] * 0.9 ** np.arange(n)[:, None])


# ------------------------------------------------------------------ loss / Adam

def test_mse_examples():
    assert mse_loss([1.0, 2.0], [1.0, 2.0])[0] == 0.0
    assert mse_loss([0.0, 0.0], [1.0, 1.0])[0] == 1.0
    np.testing.assert_array_equal(mse_loss([2.0], [0.0])[1], [4.0])


def test_mse_length_mismatch():
    with pytest.raises(ContractError):
        mse_loss([1.0], [1.0, 2.0])


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    new, state = adam_update(params, {"w": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(new["w"], params["w"])
    assert state.t == 1


def test_adam_first_step_moves_by_lr():
    lr = 1e-3
    params = {"w": np.array([1.0, -2.0, 0.5])}
    # closed form: step = lr * |g| / (|g| + eps), within lr*1e-6 of lr once |g| >= 1e-2
    g = np.array([0.3, -4.0, 0.02])
    new, state = adam_update(params, {"w": g}, AdamState(), lr=lr)
    np.testing.assert_allclose(new["w"] - params["w"], -lr * np.sign(g), atol=lr * 1e-6)
    assert np.all(state.v["w"] >= 0)


def test_adam_deterministic():
    params = {"w": np.array([0.1, 0.2])}
    g = {"w": np.array([0.5, -0.5])}
    a = adam_update(params, g, AdamState())
    b = adam_update(params, g, AdamState())
    np.testing.assert_array_equal(a[0]["w"], b[0]["w"])
    np.testing.assert_array_equal(a[1].m["w"], b[1].m["w"])


# ---------------------------------------------------------------------- pairs

def test_pairs_single_series():
    assert len(make_training_pairs([ReflectanceSeries(np.arange(4.0))])) == 2


def test_pairs_neighbourhood_batch():
    batch = [ReflectanceSeries(np.random.default_rng(i).random((74, 10))) for i in range(5)]
    assert len(make_training_pairs(batch)) == 5 * 72


def test_pairs_empty_and_short():
    assert make_training_pairs([]) == []
    with pytest.raises(InsufficientHistoryError, match="short"):
        make_training_pairs([ReflectanceSeries(np.arange(5.0)), ReflectanceSeries([1.0, 2.0], name="short")])


def test_pairs_are_consecutive_states():
    s = ReflectanceSeries(np.random.default_rng(0).random((6, 2)))
    X = augment(s)
    for k, (a, b) in enumerate(make_training_pairs([s])):
        np.testing.assert_array_equal(a, X[k])
        np.testing.assert_array_equal(b, X[k + 1])


def test_lstm_windows_cover_all_pairs():
    s = ReflectanceSeries(np.arange(12.0))  # 11 states, 10 pairs
    xs, ys = lstm_windows([s], 4)
    assert xs.shape == (4, 3, 2)
    np.testing.assert_array_equal(xs[:, -1, 0], [7, 8, 9, 10])
    np.testing.assert_array_equal(ys[:, :, 0], xs[:, :, 0] + 1)


# ------------------------------------------------------------- gradient check

@pytest.mark.parametrize("kind", list(ModelKind))
@pytest.mark.parametrize("scope", ["full-state", "reflectance-only"])
def test_full_pipeline_gradient(kind, scope):
    rng = make_rng(11)
    L, width = 2, 3
    model = init_model(kind, L, width, 4, {"init_gain": 1.0})
    model = model.with_params({k: v + rng.normal(0, 0.3, v.shape) for k, v in model.params().items()})
    series = ReflectanceSeries(rng.random((7, L)))
    if kind is ModelKind.LSTM:
        x, y = lstm_windows([series], 4)
    else:
        X = augment(series)
        x, y = X[:-1], X[1:]
    _, grads = loss_and_grads(model, x, y, scope)
    for name, analytic in grads.items():
        def f(p, name=name):
            params = dict(model.params())
            params[name] = p
            return loss_and_grads(model.with_params(params), x, y, scope)[0]
        assert max_relative_error(analytic, finite_diff_gradient(f, model.params()[name])) < 1e-4


# --------------------------------------------------------------------- train

def test_zero_epochs_returns_initialisation():
    cfg = TrainConfig(model="rk4", width=5, epochs=0, seed=3)
    res = train(cfg, decay_series())
    init = init_model("rk4", 2, 5, 3, {"init_gain": cfg.init_gain})
    for k, v in init.params().items():
        np.testing.assert_array_equal(res.model.params()[k], v)
    assert res.losses == []


def test_linear_toy_dynamics_learned():
    series = decay_series()
    res = train(TrainConfig(model="rk4", width=8, epochs=500, seed=0), series)
    X = augment(series)
    from specdyn.integrators import rk4_step
    pred = rk4_step(res.model.net, X[:-1])
    assert np.sqrt(np.mean((pred - X[1:]) ** 2)) < 1e-3
    assert res.losses[99] < res.losses[0]


@pytest.mark.parametrize("kind", ["euler", "rk4", "lstm"])
def test_same_seed_same_checkpoint(kind):
    cfg = TrainConfig(model=kind, width=4, epochs=30, seed=9)
    a = save_checkpoint(train(cfg, decay_series()).model)
    b = save_checkpoint(train(cfg, decay_series()).model)
    assert a == b


def test_minibatch_training_deterministic():
    cfg = TrainConfig(model="euler", width=4, epochs=5, seed=2, batch_size=7)
    a = train(cfg, decay_series())
    b = train(cfg, decay_series())
    assert a.losses == b.losses


def test_euler_and_rk4_share_initialisation():
    a = init_model("euler", 3, 6, 1)
    b = init_model("rk4", 3, 6, 1)
    for k in a.params():
        np.testing.assert_array_equal(a.params()[k], b.params()[k])


def test_divergence_reports_epoch_and_checkpoint():
    huge = ReflectanceSeries(np.array([[1e300], [-1e300], [1e300], [-1e300]]))
    with pytest.raises(TrainingDiverged) as err:
        train(TrainConfig(model="euler", width=2, epochs=3), huge)
    assert err.value.epoch == 1
    assert isinstance(err.value.checkpoint, Model)


def test_config_validation():
    with pytest.raises(ContractError):
        TrainConfig(epochs=-1)
    with pytest.raises(ContractError):
        TrainConfig(adam_beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(model="gru")


# ---------------------------------------------------------------- checkpoints

@pytest.mark.parametrize("kind", list(ModelKind))
def test_checkpoint_round_trip_bit_exact(kind):
    model = init_model(kind, 3, 5, 7)
    back = load_checkpoint(save_checkpoint(model))
    assert back.kind is kind
    for k, v in model.params().items():
        assert back.params()[k].tobytes() == v.tobytes()
    assert save_checkpoint(back) == save_checkpoint(model)


def test_trained_model_equals_its_checkpoint():
    model = train(TrainConfig(model="rk4", width=4, epochs=10), decay_series()).model
    back = load_checkpoint(save_checkpoint(model))
    for k, v in model.params().items():
        assert back.params()[k].tobytes() == v.tobytes()


def test_checkpoint_bad_magic():
    buf = bytearray(save_checkpoint(init_model("rk4", 2, 3, 0)))
    buf[0:4] = b"XXXX"
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(bytes(buf))


def test_checkpoint_manifest_size_mismatch():
    buf = save_checkpoint(init_model("rk4", 2, 3, 0))
    _, version, hlen = struct.unpack_from("<8sIQ", buf)
    manifest = json.loads(buf[20:20 + hlen])
    manifest["L"] = 3
    head = json.dumps(manifest).encode()
    forged = struct.pack("<8sIQ", b"SDMODEL\0", version, len(head)) + head + buf[20 + hlen:]
    with pytest.raises(FormatError, match="L=3"):
        load_checkpoint(forged)


def test_checkpoint_truncated():
    buf = save_checkpoint(init_model("lstm", 2, 3, 0))
    with pytest.raises(FormatError) as err:
        load_checkpoint(buf[:-4])
    assert err.value.offset is not None


def test_round_to_payload_idempotent():
    m = init_model("rk4", 2, 3, 0)
    m = m.with_params({k: v + 1e-12 for k, v in m.params().items()})
    once = round_to_payload(m)
    twice = round_to_payload(once)
    for k in once.params():
        np.testing.assert_array_equal(once.params()[k], twice.params()[k])
