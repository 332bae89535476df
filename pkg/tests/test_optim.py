"""Adam update rule against a hand-rolled float64 reference."""

import numpy as np
import pytest

from pan.nn import Tensor, adam_init, adam_step


def test_first_step_includes_bias_correction_and_eps():
    theta = Tensor(np.zeros(1, np.float32), requires_grad=True)
    state = adam_init({"w": theta})
    adam_step({"w": theta}, {"w": np.ones(1, np.float32)}, state, lr=1e-3)
    expected = -1e-3 / (1.0 + 1e-8)  # m_hat = v_hat = 1 after one unit gradient
    assert abs(float(theta.data[0]) - expected) < 1e-9
    assert float(theta.data[0]) != -1e-3


def test_matches_float64_reference_over_steps():
    rng = np.random.default_rng(5)
    w0 = rng.standard_normal(6).astype(np.float32)
    theta = Tensor(w0.copy(), requires_grad=True)
    state = adam_init({"w": theta})
    ref = w0.astype(np.float64)
    m = np.zeros(6)
    v = np.zeros(6)
    for step in range(1, 8):
        g = rng.standard_normal(6).astype(np.float32)
        adam_step({"w": theta}, {"w": g}, state, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mh = m / (1 - 0.9**step)
        vh = v / (1 - 0.999**step)
        ref -= 0.01 * mh / (np.sqrt(vh) + 1e-8)
        np.testing.assert_allclose(theta.data, ref, atol=1e-5)


def test_state_key_mismatch_rejected():
    a = Tensor(np.zeros(2), requires_grad=True)
    state = adam_init({"a": a})
    with pytest.raises(ValueError):
        adam_step({"b": a}, {"b": np.zeros(2, np.float32)}, state, lr=0.1)


def test_deterministic_given_same_inputs():
    runs = []
    for _ in range(2):
        theta = Tensor(np.full(3, 0.5, np.float32), requires_grad=True)
        state = adam_init({"w": theta})
        for step in range(5):
            g = np.full(3, 0.1 * (step + 1), np.float32)
            adam_step({"w": theta}, {"w": g}, state, lr=1e-2)
        runs.append(theta.data.copy())
    assert np.array_equal(runs[0], runs[1])


def test_converges_on_quadratic():
    theta = Tensor(np.array([10.0], np.float32), requires_grad=True)
    state = adam_init({"w": theta})
    for _ in range(800):
        g = 2.0 * (theta.data - 3.0)
        adam_step({"w": theta}, {"w": g}, state, lr=0.05)
    assert abs(float(theta.data[0]) - 3.0) < 1e-2
