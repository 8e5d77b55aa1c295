import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedagents.approximator import (
    Adam,
    Mlp,
    apply_gradients,
    backward,
    clone_parameters,
    forward,
    gradient_check,
    load_checkpoint,
    parameters_equal,
    save_checkpoint,
)
from nestedagents.errors import TrainingError


def slow_forward(net, x):
    """Plain-Python forward pass, independent of the numpy path."""
    h = [float(v) for v in x]
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            z = float(b[j]) + sum(h[k] * float(w[k, j]) for k in range(w.shape[0]))
            out.append(math.tanh(z) if i < n_layers - 1 else z)
        h = out
    return h


def slow_loss(net, xs, acts, ys):
    total = 0.0
    for x, a, y in zip(xs, acts, ys):
        total += (slow_forward(net, x)[a] - y) ** 2
    return total / len(xs)


def fd_gradient(net, xs, acts, ys, h=1e-5):
    probe = net.copy()
    g = np.zeros_like(probe.theta)
    for i in range(probe.theta.size):
        orig = probe.theta[i]
        probe.theta[i] = orig + h
        up = slow_loss(probe, xs, acts, ys)
        probe.theta[i] = orig - h
        down = slow_loss(probe, xs, acts, ys)
        probe.theta[i] = orig
        g[i] = (up - down) / (2 * h)
    return g


def test_zero_net_outputs_zero():
    net = Mlp([3, 32, 32, 8])
    assert np.array_equal(forward(net, np.array([0.3, -1.0, 2.0])), np.zeros(8))


def test_one_one_one_net():
    net = Mlp([1, 1, 1])
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    assert forward(net, np.array([0.5]))[0] == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert math.tanh(0.5) == pytest.approx(0.4621, abs=1e-4)


def test_output_sizes_and_dimension_check():
    rng = np.random.default_rng(0)
    assert Mlp.init([4, 32, 32, 8], rng).forward(np.zeros(4)).shape == (8,)
    assert Mlp.init([3, 32, 32, 2], rng).forward(np.zeros(3)).shape == (2,)
    with pytest.raises(ValueError):
        Mlp([3, 4, 2]).forward(np.zeros(4))


def test_forward_matches_slow_path():
    rng = np.random.default_rng(1)
    net = Mlp.init([4, 32, 32, 8], rng)
    x = rng.normal(size=4)
    assert np.allclose(net.forward(x), slow_forward(net, x), atol=1e-12)


def test_gradient_zero_at_target():
    rng = np.random.default_rng(2)
    net = Mlp.init([3, 5, 4], rng)
    x = rng.normal(size=3)
    grad, loss = backward(net, x, 2, net.forward(x)[2])
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_gradient_matches_slow_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(5):
        net = Mlp.init([3, 6, 5, 4], rng)
        net.theta += rng.normal(scale=0.1, size=net.theta.shape)
        xs = rng.normal(size=(3, 3))
        acts = rng.integers(0, 4, size=3)
        ys = rng.normal(size=3)
        analytic, _ = backward(net, xs, acts, ys)
        numeric = fd_gradient(net, xs, acts, ys)
        rel = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
        assert rel < 1e-4


def test_unselected_outputs_get_no_gradient():
    rng = np.random.default_rng(4)
    net = Mlp.init([2, 3, 4], rng)
    grad, _ = backward(net, rng.normal(size=2), 1, 5.0)
    gnet = Mlp(net.layer_dims, grad)
    out_w, out_b = gnet.weights[-1], gnet.biases[-1]
    for j in (0, 2, 3):
        assert np.all(out_w[:, j] == 0) and out_b[j] == 0
    assert out_b[1] != 0


def test_gradient_linear_in_residual():
    rng = np.random.default_rng(5)
    net = Mlp.init([3, 8, 8, 4], rng)
    x = rng.normal(size=3)
    q = net.forward(x)[0]
    g1, _ = backward(net, x, 0, q - 0.7)
    g2, _ = backward(net, x, 0, q - 1.4)
    assert np.allclose(g2, 2 * g1, rtol=1e-12, atol=1e-15)


def test_gradient_check_suite_runtime():
    t0 = time.perf_counter()
    errors = gradient_check(100, seed=11)
    assert max(errors) < 1e-4
    assert time.perf_counter() - t0 < 10.0


def test_zero_gradient_leaves_parameters():
    rng = np.random.default_rng(6)
    net = Mlp.init([3, 4, 2], rng)
    before = net.theta.copy()
    apply_gradients(net, Adam(), np.zeros_like(net.theta))
    assert np.array_equal(net.theta, before)


def test_descent_direction():
    net = Mlp([1, 1], np.array([0.0, 0.0]))
    opt = Adam(lr=0.01)
    opt.step(net, np.array([0.5, -2.0]))
    assert net.theta[0] < 0 and net.theta[1] > 0
    assert opt.t == 1


def test_adam_converges_on_quadratic():
    # f(w) = (w - 1.5)^2, default learning rate
    net = Mlp([1, 1], np.array([0.0, 0.0]))
    opt = Adam()
    for _ in range(5000):
        w = net.theta[0]
        opt.step(net, np.array([2 * (w - 1.5), 0.0]))
    assert abs(net.theta[0] - 1.5) < 1e-3


def test_non_finite_gradient_raises():
    net = Mlp([1, 1])
    with pytest.raises(TrainingError):
        Adam().step(net, np.array([np.nan, 0.0]))


def test_clone_semantics():
    rng = np.random.default_rng(7)
    net = Mlp.init([3, 4, 2], rng)
    twin = clone_parameters(net)
    assert parameters_equal(net, twin)
    Adam().step(net, np.ones_like(net.theta))
    assert not parameters_equal(net, twin)
    other = clone_parameters(twin)
    other.weights[0][0, 0] += 1e-12
    assert not parameters_equal(twin, other)
    with pytest.raises(ValueError):
        parameters_equal(net, Mlp([3, 5, 2]))


def test_seeded_init_is_reproducible():
    a = Mlp.init([4, 32, 32, 8], np.random.default_rng(42))
    b = Mlp.init([4, 32, 32, 8], np.random.default_rng(42))
    assert parameters_equal(a, b)
    limit = np.sqrt(6 / (4 + 32))
    assert np.all(np.abs(a.weights[0]) <= limit)
    assert np.all(a.biases[0] == 0)


def test_checkpoint_round_trip(tmp_path):
    net = Mlp.init([4, 32, 32, 8], np.random.default_rng(8))
    net.theta += 1e-3 * np.arange(net.theta.size)
    path = tmp_path / "net.bin"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.layer_dims == net.layer_dims
    assert parameters_equal(back, net)
    assert path.read_bytes()[:8] == b"NSTMLP01"


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a net")
    with pytest.raises(ValueError):
        load_checkpoint(path)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forward_is_pure_and_hidden_bounded(seed):
    rng = np.random.default_rng(seed)
    net = Mlp.init([3, 32, 32, 2], rng)
    x = rng.normal(scale=5, size=(4, 3))
    y1 = net.forward(x)
    y2 = net.forward(x)
    assert np.array_equal(y1, y2)
    _, acts = net.forward_cache(x)
    for h in acts[1:]:
        assert np.all(np.abs(h) <= 1.0)
