"""Autodiff, layer, and optimizer tests against finite-difference oracles."""

import numpy as np
import pytest
from _utils import finite_diff_grad, max_rel_error

from ringadvisory.nn import Adam, LSTMCell, PerceptronNet, SGD, Tensor, sample_categorical, softmax

# -- tensor autodiff ---------------------------------------------------


def test_linear_gradient():
    w = Tensor(np.array([3.0]), requires_grad=True)
    loss = (w * 2.0).sum()
    loss.backward()
    assert w.grad[0] == 2.0


def test_unused_parameter_gets_zero_gradient():
    w = Tensor(np.array([3.0]), requires_grad=True)
    u = Tensor(np.array([5.0]), requires_grad=True)
    loss = (w * w).sum()
    loss.backward()
    assert w.grad[0] == 6.0
    assert u.grad is None or np.all(u.grad == 0.0)


def test_backward_requires_scalar():
    w = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (w * 2.0).backward()


@pytest.mark.parametrize("seed", range(5))
def test_elementwise_op_gradients(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.uniform(0.2, 1.5, size=(3, 4)), requires_grad=True)
    b = Tensor(rng.uniform(0.2, 1.5, size=(3, 4)), requires_grad=True)

    def loss_fn():
        ta = Tensor(a.data)
        tb = Tensor(b.data)
        out = (ta * tb + ta / tb - tb).tanh().exp() + ta.log() + (ta ** 1.5).sigmoid()
        return float(out.sum().data)

    out = (a * b + a / b - b).tanh().exp() + a.log() + (a ** 1.5).sigmoid()
    loss = out.sum()
    loss.backward()
    numeric = finite_diff_grad(loss_fn, [a, b])
    assert max_rel_error([a.grad, b.grad], numeric) < 1e-4


def test_matmul_broadcast_and_reduction_gradients():
    rng = np.random.default_rng(3)
    w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(3), requires_grad=True)
    x = rng.standard_normal((5, 4))

    def loss_fn():
        out = Tensor(x) @ Tensor(w.data) + Tensor(b.data)
        return float(out.log_softmax(axis=-1).mean().data)

    loss = (Tensor(x) @ w + b).log_softmax(axis=-1).mean()
    loss.backward()
    numeric = finite_diff_grad(loss_fn, [w, b])
    assert max_rel_error([w.grad, b.grad], numeric) < 1e-4


def test_getitem_scatter_gradient():
    v = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    loss = v[np.array([0, 1]), np.array([2, 2])].sum()
    loss.backward()
    expect = np.zeros((2, 3))
    expect[:, 2] = 1.0
    assert np.array_equal(v.grad, expect)


def test_softmax_normalizes():
    p = softmax(np.array([1.0, 2.0, 3.0]))
    assert p.shape == (3,)
    assert p[2] > p[1] > p[0]
    assert np.isclose(p.sum(), 1.0)


# -- perceptron network ------------------------------------------------


def test_zero_weight_net_outputs_zero():
    net = PerceptronNet([3, 4, 2], np.random.default_rng(0))
    for p in net.parameters():
        p.data[:] = 0.0
    assert np.all(net.logits([1.0, -2.0, 0.5]) == 0.0)


def test_identity_single_layer_passthrough():
    net = PerceptronNet([1, 1], np.random.default_rng(0))
    net.weights[0].data[:] = 1.0
    net.biases[0].data[:] = 0.0
    assert net.logits([3.5])[0, 0] == 3.5


def test_frozen_forward_snapshot():
    # first-run regression constant: seed-1234 net, fixed input
    net = PerceptronNet([3, 4, 2], np.random.default_rng(1234))
    out = net.logits(np.array([0.25, 0.49, 0.10]))
    assert np.allclose(out, [[0.02921599, -0.06090139]], atol=1e-8)


def test_forward_and_logits_agree():
    net = PerceptronNet([3, 8, 5], np.random.default_rng(7))
    x = np.random.default_rng(8).standard_normal((4, 3))
    assert np.allclose(net.forward(x).data, net.logits(x))


def test_forward_rejects_wrong_width():
    net = PerceptronNet([3, 4, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.ones(5))


@pytest.mark.parametrize("seed", range(3))
def test_mlp_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = PerceptronNet([3, 6, 4], rng)
    x = rng.standard_normal((5, 3))
    idx = rng.integers(0, 4, size=5)
    adv = rng.standard_normal(5)

    def loss_value():
        logp = net.forward(x).log_softmax(axis=-1)
        picked = logp[np.arange(5), idx]
        return -(picked * adv).mean()

    loss = loss_value()
    loss.backward()
    analytic = [p.grad for p in net.parameters()]
    numeric = finite_diff_grad(lambda: float(loss_value().data), net.parameters())
    assert max_rel_error(analytic, numeric) < 1e-4


# -- LSTM --------------------------------------------------------------


def test_lstm_state_shapes():
    cell = LSTMCell(3, 8, np.random.default_rng(0))
    h, c = cell.init_state(4)
    h2, c2 = cell.step(Tensor(np.ones((4, 3))), h, c)
    assert h2.data.shape == (4, 8) and c2.data.shape == (4, 8)


def test_lstm_rejects_wrong_input_width():
    cell = LSTMCell(3, 8, np.random.default_rng(0))
    h, c = cell.init_state(1)
    with pytest.raises(ValueError):
        cell.step(Tensor(np.ones((1, 5))), h, c)


@pytest.mark.parametrize("seed", range(3))
def test_lstm_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    cell = LSTMCell(2, 4, rng)
    xs = rng.standard_normal((6, 3, 2))  # T=6 steps, batch 3

    def loss_value():
        h, c = cell.init_state(3)
        for t in range(xs.shape[0]):
            h, c = cell.step(Tensor(xs[t]), h, c)
        return (h * h).sum()

    loss = loss_value()
    loss.backward()
    analytic = [p.grad for p in cell.parameters()]
    numeric = finite_diff_grad(lambda: float(loss_value().data), cell.parameters())
    assert max_rel_error(analytic, numeric) < 1e-4


# -- sampling ----------------------------------------------------------


def test_uniform_categorical_frequencies():
    rng = np.random.default_rng(0)
    logits = np.zeros(36)
    counts = np.bincount(
        [sample_categorical(logits, rng) for _ in range(100_000)], minlength=36
    )
    freq = counts / 100_000
    assert np.all(np.abs(freq - 1 / 36) < 0.01)


def test_peaked_logits_sample_peak():
    rng = np.random.default_rng(0)
    logits = np.zeros(10)
    logits[9] = 50.0
    assert all(sample_categorical(logits, rng) == 9 for _ in range(100))


# -- optimizers --------------------------------------------------------


def test_sgd_step_arithmetic():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([0.5])
    SGD([p], 1e-4).step()
    assert np.isclose(p.data[0], 0.99995)


def test_zero_gradient_leaves_params_unchanged():
    p = Tensor(np.array([2.0, -1.0]), requires_grad=True)
    p.grad = np.zeros(2)
    before = p.data.copy()
    SGD([p], 0.1).step()
    assert np.array_equal(p.data, before)


@pytest.mark.parametrize("opt_cls", [SGD, Adam])
def test_optimizer_descends_quadratic(opt_cls):
    p = Tensor(np.array([5.0]), requires_grad=True)
    opt = opt_cls([p], 0.05)
    losses = []
    for _ in range(300):
        loss = (p * p).sum()
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(float(loss.data))
    # strictly decreasing away from the optimum; near-converged at the end
    assert all(b < a for a, b in zip(losses[:100], losses[1:100]))
    assert losses[-1] < 1e-2 * losses[0]


@pytest.mark.parametrize("opt_cls", [SGD, Adam])
def test_optimizer_rejects_nonfinite_gradient(opt_cls):
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([np.nan])
    with pytest.raises(FloatingPointError):
        opt_cls([p], 0.1).step()


@pytest.mark.parametrize("opt_cls", [SGD, Adam])
def test_optimizer_rejects_negative_lr(opt_cls):
    with pytest.raises(ValueError):
        opt_cls([], -1.0)
