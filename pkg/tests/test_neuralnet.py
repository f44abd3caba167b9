import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rf2nn.neuralnet import (Mlp, TrainConfig, cross_entropy, forward, gradient_check,
                             init_optimizer, load_mlp, loss_and_grads, mlp_new, near_relu_kink,
                             parse_arch, save_mlp, train_step)


def soft_targets(rng, n, c):
    return rng.dirichlet(np.ones(c), n)


def clean_batch(mlp, rng, n=8, eps=1e-5):
    """A batch with no hidden pre-activation near the ReLU kink."""
    while True:
        X = rng.normal(size=(n, mlp.n_inputs))
        if not near_relu_kink(mlp, X, 10 * eps):
            return X


# construction

def test_parameter_count():
    assert mlp_new([2, 32, 32, 2], seed=0).n_parameters == 1218


def test_init_deterministic_and_glorot_bounded():
    a, b = mlp_new([3, 5, 2], seed=4), mlp_new([3, 5, 2], seed=4)
    for w, v in zip(a.weights, b.weights):
        np.testing.assert_array_equal(w, v)
    assert np.abs(a.weights[0]).max() <= np.sqrt(6 / 8)
    assert all((b == 0).all() for b in a.biases)


def test_bad_sizes():
    with pytest.raises(ValueError):
        mlp_new([2, 0, 2])
    with pytest.raises(ValueError):
        parse_arch("32,,x")
    assert parse_arch("32, 16") == [32, 16]


# forward and loss

def test_zero_network_is_uniform():
    m = mlp_new([3, 4, 5])
    for w in m.weights:
        w[:] = 0
    np.testing.assert_allclose(forward(m, np.ones(3)), np.full(5, 0.2), atol=1e-15)


def test_hand_softmax():
    m = Mlp([2, 2], [np.eye(2)], [np.zeros(2)])
    np.testing.assert_allclose(forward(m, [0.0, np.log(3.0)]), [0.25, 0.75], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-1e3, 1e3)), st.integers(0, 1000))
def test_forward_is_a_distribution(X, seed):
    P = forward(mlp_new([3, 6, 6, 4], seed=seed), X)
    assert (P >= 0).all()
    np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-12)


def test_cross_entropy_examples():
    assert cross_entropy([1.0, 0.0], [1.0, 0.0]) == 0.0
    assert cross_entropy([0.5, 0.5], [0.0, 1.0]) == pytest.approx(np.log(2), abs=1e-15)
    assert cross_entropy([0.25, 0.75], [0.5, 0.5]) == pytest.approx(
        -0.5 * (np.log(0.25) + np.log(0.75)), abs=1e-15)
    # zero probability is floored rather than infinite
    assert cross_entropy([0.0, 1.0], [1.0, 0.0]) == pytest.approx(-np.log(1e-12))


# training

def test_lr_zero_leaves_parameters():
    rng = np.random.default_rng(0)
    m = mlp_new([3, 4, 2], seed=1)
    before = m.copy()
    opt = init_optimizer(m)
    X, Y = rng.normal(size=(8, 3)), soft_targets(rng, 8, 2)
    for _ in range(3):
        train_step(m, opt, X, Y, TrainConfig(learning_rate=0.0))
    for a, b in zip(m.params(), before.params()):
        np.testing.assert_array_equal(a, b)


def test_zero_momentum_is_plain_gradient_descent():
    rng = np.random.default_rng(1)
    m = mlp_new([3, 5, 2], seed=2)
    ref = m.copy()
    opt = init_optimizer(m)
    cfg = TrainConfig(learning_rate=0.05, momentum=0.0)
    for _ in range(5):
        X, Y = rng.normal(size=(8, 3)), soft_targets(rng, 8, 2)
        train_step(m, opt, X, Y, cfg)
        _, grads = loss_and_grads(ref, X, Y)
        for p, g in zip(ref.params(), grads):
            p -= cfg.learning_rate * g
    for a, b in zip(m.params(), ref.params()):
        np.testing.assert_array_equal(a, b)


def test_momentum_update_rule():
    rng = np.random.default_rng(2)
    m = mlp_new([2, 3, 2], seed=0)
    ref = m.copy()
    v = [np.zeros_like(p) for p in ref.params()]
    opt = init_optimizer(m)
    cfg = TrainConfig(learning_rate=0.1, momentum=0.9)
    for _ in range(4):
        X, Y = rng.normal(size=(6, 2)), soft_targets(rng, 6, 2)
        train_step(m, opt, X, Y, cfg)
        _, grads = loss_and_grads(ref, X, Y)
        for p, vel, g in zip(ref.params(), v, grads):
            vel *= 0.9
            vel -= 0.1 * g
            p += vel
    for a, b in zip(m.params(), ref.params()):
        np.testing.assert_array_equal(a, b)


def test_separable_toy_reaches_full_accuracy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(64, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    Y = np.eye(2)[y]
    m = mlp_new([2, 8, 8, 2], seed=0)
    opt = init_optimizer(m)
    cfg = TrainConfig(learning_rate=0.1, momentum=0.9)
    for _ in range(200):
        train_step(m, opt, X, Y, cfg)
    assert (forward(m, X).argmax(1) == y).all()


def test_small_step_does_not_increase_loss():
    rng = np.random.default_rng(4)
    m = mlp_new([4, 8, 3], seed=5)
    X, Y = rng.normal(size=(16, 4)), soft_targets(rng, 16, 3)
    before = train_step(m, init_optimizer(m), X, Y, TrainConfig(learning_rate=1e-4, momentum=0))
    after, _ = loss_and_grads(m, X, Y)
    assert after <= before


def test_training_bit_reproducible():
    def run():
        rng = np.random.default_rng(7)
        m = mlp_new([3, 6, 2], seed=3)
        opt = init_optimizer(m)
        for _ in range(20):
            train_step(m, opt, rng.normal(size=(8, 3)), soft_targets(rng, 8, 2), TrainConfig())
        return m

    for a, b in zip(run().params(), run().params()):
        np.testing.assert_array_equal(a, b)


def test_empty_batch():
    m = mlp_new([2, 2])
    with pytest.raises(ValueError):
        train_step(m, init_optimizer(m), np.zeros((0, 2)), np.zeros((0, 2)), TrainConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


# gradient check

@pytest.mark.parametrize("arch", [[3, 6, 2], [5, 8, 8, 3]])
def test_gradient_check_small_nets(arch):
    rng = np.random.default_rng(5)
    m = mlp_new(arch, seed=1)
    X = clean_batch(m, rng)
    assert gradient_check(m, X, soft_targets(rng, len(X), arch[-1])) < 1e-4


def test_gradient_check_refuses_kink():
    m = mlp_new([2, 3, 2], seed=0)
    m.biases[0][:] = 0.0
    with pytest.raises(ValueError):
        gradient_check(m, np.zeros((2, 2)), np.full((2, 2), 0.5))


def test_dead_relu_gradient_has_zero_error():
    m = mlp_new([2, 3, 2], seed=0)
    # hidden unit 0 is dead for every input in the batch
    m.weights[0][:, 0] = 0.0
    m.biases[0][0] = -1.0
    X = np.array([[0.3, -0.2], [0.1, 0.4]])
    _, grads = loss_and_grads(m, X, np.full((2, 2), 0.5))
    assert (grads[0][:, 0] == 0).all()
    assert gradient_check(m, X, np.array([[1.0, 0.0], [0.0, 1.0]])) < 1e-4


def test_linear_one_parameter_model():
    # softmax over logits (w x, 0): d/dw of -log p0 at x = 1 is -(1 - p0)
    m = Mlp([1, 2], [np.array([[0.7, 0.0]])], [np.zeros(2)])
    _, grads = loss_and_grads(m, np.array([[1.0]]), np.array([[1.0, 0.0]]))
    p0 = 1.0 / (1.0 + np.exp(-0.7))
    assert grads[0][0, 0] == pytest.approx(-(1.0 - p0), rel=1e-14)


# persistence

def test_round_trip(tmp_path):
    m = mlp_new([3, 7, 7, 2], seed=9)
    save_mlp(m, tmp_path / "m.json")
    back = load_mlp(tmp_path / "m.json")
    X = np.random.default_rng(0).normal(size=(100, 3))
    np.testing.assert_array_equal(forward(m, X), forward(back, X))


def test_truncated_file(tmp_path):
    save_mlp(mlp_new([2, 2]), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "m.json").write_text(text[: len(text) // 2])
    with pytest.raises(ValueError):
        load_mlp(tmp_path / "m.json")


def test_shape_mismatch(tmp_path):
    doc = mlp_new([2, 3, 2]).to_dict()
    doc["layer_sizes"] = [2, 4, 2]
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_mlp(tmp_path / "m.json")
