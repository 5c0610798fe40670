import numpy as np
import pytest

from specdyn.errors import ContractError
from specdyn.lstm import LstmParams, LstmState, init_lstm, lstm_backward, lstm_forward, lstm_step
from specdyn.numerics import finite_diff_gradient, make_rng, max_relative_error


def zero_params(L, H):
    return LstmParams(np.zeros((4 * H, 2 * L)), np.zeros((4 * H, H)), np.zeros(4 * H),
                      np.zeros((2 * L, H)), np.zeros(2 * L))


def random_params(rng, L, H, scale=0.6):
    return LstmParams(rng.normal(0, scale, (4 * H, 2 * L)), rng.normal(0, scale, (4 * H, H)),
                      rng.normal(0, scale, 4 * H), rng.normal(0, scale, (2 * L, H)),
                      rng.normal(0, scale, 2 * L))


def test_zero_params_stay_at_zero(rng):
    state, y = lstm_step(zero_params(2, 3), LstmState.zeros(3), rng.normal(size=4))
    np.testing.assert_array_equal(state.h, 0.0)
    np.testing.assert_array_equal(state.c, 0.0)
    np.testing.assert_array_equal(y, 0.0)


def test_saturated_forget_gate_carries_cell():
    H = 2
    p = zero_params(1, H)
    b = p.b.copy()
    b[H:2 * H] = 20.0
    p = LstmParams(p.Wx, p.Wh, b, p.Wy, p.by)
    c_prev = np.array([0.7, -0.4])
    state, _ = lstm_step(p, LstmState(np.zeros(H), c_prev), np.array([0.3, 0.1]))
    # input gate 0.5 times candidate tanh(0) adds nothing
    np.testing.assert_allclose(state.c, c_prev, atol=1e-6)


def test_deterministic(rng):
    p = random_params(rng, 2, 3)
    x = rng.normal(size=4)
    a = lstm_step(p, LstmState.zeros(3), x)
    b = lstm_step(p, LstmState.zeros(3), x)
    np.testing.assert_array_equal(a[1], b[1])


def test_gate_ranges(rng):
    from specdyn.lstm import _gates
    # pre-activations stay well inside the range where float64 sigmoid is not exactly 0 or 1
    p = random_params(rng, 3, 5, scale=1.0)
    i, f, g, o = _gates(p, LstmState.zeros(5, 40), rng.normal(0, 1, (40, 6)))
    for gate in (i, f, o):
        assert np.all((gate > 0) & (gate < 1))
    assert np.all(np.abs(g) < 1)


def test_init_shapes():
    p = init_lstm(3, 32, make_rng(0))
    assert p.Wx.shape == (128, 6) and p.Wh.shape == (128, 32) and p.Wy.shape == (6, 32)


def test_shape_validation():
    with pytest.raises(ContractError):
        LstmParams(np.zeros((8, 2)), np.zeros((8, 3)), np.zeros(8), np.zeros((2, 2)), np.zeros(2))


def test_backward_zero_upstream(rng):
    p = random_params(rng, 1, 3)
    preds, cache = lstm_forward(p, rng.normal(size=(4, 2)))
    for g in lstm_backward(p, cache, np.zeros_like(preds)).values():
        np.testing.assert_array_equal(g, 0.0)


def test_head_bias_gradient(rng):
    p = random_params(rng, 1, 3)
    preds, cache = lstm_forward(p, rng.normal(size=(4, 2)))
    up = rng.normal(size=preds.shape)
    np.testing.assert_allclose(lstm_backward(p, cache, up)["by"], up.sum(axis=0))


def test_empty_window(rng):
    p = random_params(rng, 1, 3)
    with pytest.raises(ContractError):
        lstm_forward(p, np.zeros((0, 2)))


@pytest.mark.parametrize("batched", [False, True])
def test_backward_matches_finite_differences(batched):
    rng = make_rng(3)
    p = random_params(rng, 1, 3)
    xs = rng.normal(size=(4, 5, 2) if batched else (4, 2))
    up = rng.normal(size=xs.shape)
    preds, cache = lstm_forward(p, xs)
    grads = lstm_backward(p, cache, up)
    for name, analytic in grads.items():
        def f(v, name=name):
            params = dict(p.params())
            params[name] = v
            return float(np.sum(up * lstm_forward(LstmParams.from_params(params), xs)[0]))
        assert max_relative_error(analytic, finite_diff_gradient(f, p.params()[name])) < 1e-4
