import numpy as np
import pytest

from scope_lab import nets, optim
from scope_lab.exceptions import ConfigError


def tiny_params():
    return nets.MlpParams(
        [np.array([[1.0, 2.0]]), np.array([[0.5]])],
        [np.array([0.0]), np.array([0.0])],
    )


def unit_grads(params):
    return [(np.ones_like(w), np.ones_like(b)) for w, b in zip(params.weights, params.biases)]


def test_sgd_step():
    params = tiny_params()
    optim.Sgd(lr=0.1).step(params, unit_grads(params))
    np.testing.assert_allclose(params.weights[0], [[0.9, 1.9]], atol=0)
    np.testing.assert_allclose(params.biases[0], [-0.1], atol=0)


def test_sgd_rejects_nonpositive_lr():
    with pytest.raises(ConfigError):
        optim.Sgd(0.0)


def test_adam_first_step_is_lr_sized():
    # With bias correction the very first update is lr * g / (|g| + eps),
    # i.e. close to lr in magnitude regardless of gradient scale.
    for scale in (1e-3, 1.0, 1e3):
        params = tiny_params()
        before = params.weights[0].copy()
        grads = [(scale * dw, scale * db) for dw, db in unit_grads(params)]
        optim.Adam(lr=0.01).step(params, grads)
        np.testing.assert_allclose(before - params.weights[0], 0.01, rtol=1e-4)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(0)
    params = tiny_params()
    opt = optim.Adam(lr=0.05, beta1=0.9, beta2=0.999, eps=1e-8)
    # Reference implementation over flattened arrays.
    theta = [a.copy() for a in params.weights + params.biases]
    m = [np.zeros_like(a) for a in theta]
    v = [np.zeros_like(a) for a in theta]
    for t in range(1, 6):
        gs = [rng.normal(size=a.shape) for a in theta]
        grads = [(gs[0], gs[2]), (gs[1], gs[3])]
        flat = [gs[0], gs[1], gs[2], gs[3]]
        opt.step(params, grads)
        for k in range(4):
            m[k] = 0.9 * m[k] + 0.1 * flat[k]
            v[k] = 0.999 * v[k] + 0.001 * flat[k] ** 2
            mhat = m[k] / (1.0 - 0.9**t)
            vhat = v[k] / (1.0 - 0.999**t)
            theta[k] -= 0.05 * mhat / (np.sqrt(vhat) + 1e-8)
        for got, expect in zip(params.weights + params.biases, theta):
            np.testing.assert_allclose(got, expect, atol=1e-12)


def test_adam_validation():
    with pytest.raises(ConfigError):
        optim.Adam(lr=-1.0)
    with pytest.raises(ConfigError):
        optim.Adam(lr=0.1, beta1=1.0)
    with pytest.raises(ConfigError):
        optim.Adam(lr=0.1, eps=0.0)


def test_adam_lr_is_mutable_between_steps():
    # Schedules poke .lr directly; moments must survive the change.
    params = tiny_params()
    opt = optim.Adam(lr=0.1)
    opt.step(params, unit_grads(params))
    before = params.weights[0].copy()
    opt.lr = 0.0
    opt.step(params, unit_grads(params))
    np.testing.assert_array_equal(params.weights[0], before)


def test_make_optimizer():
    assert isinstance(optim.make_optimizer("sgd", 0.1), optim.Sgd)
    assert isinstance(optim.make_optimizer("adam", 0.1), optim.Adam)
    with pytest.raises(ConfigError):
        optim.make_optimizer("rmsprop", 0.1)


def test_clip_gradient_norm_scales_in_place():
    grads = [(np.array([[3.0]]), np.array([4.0]))]
    norm = optim.clip_gradient_norm(grads, 1.0)
    assert norm == 5.0
    np.testing.assert_allclose(grads[0][0], [[0.6]], rtol=1e-15)
    np.testing.assert_allclose(grads[0][1], [0.8], rtol=1e-15)


def test_clip_gradient_norm_leaves_small_gradients_alone():
    grads = [(np.array([[0.3]]), np.array([0.4]))]
    norm = optim.clip_gradient_norm(grads, 5.0)
    assert norm == 0.5
    np.testing.assert_array_equal(grads[0][0], [[0.3]])


def test_clip_gradient_norm_validation():
    with pytest.raises(ConfigError):
        optim.clip_gradient_norm([], 0.0)
