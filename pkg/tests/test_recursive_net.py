import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from maxent_lab.discrete_prob import SampleSet
from maxent_lab.equivalence_lab import generate_equiv_instance, softmax_conditional
from maxent_lab.errors import DimensionMismatch, RangeError
from maxent_lab.maxent_core import SoftmaxParams, TrainConfig, softmax_predict
from maxent_lab.recursive_net import (
    LayerStack,
    NetTrainConfig,
    TrainTrace,
    bits_task,
    forward,
    init_stack,
    loss,
    loss_and_grad,
    train,
    train_backprop,
    train_block,
    train_coordinate,
    xor_samples,
)
from maxent_lab.suite import stack_grad_error


def zero_stack(widths, y):
    return init_stack(widths, y, 0).with_flat(np.zeros(init_stack(widths, y, 0).flat().size))


def loss_oracle(net, data, beta):
    """Plain re-evaluation: weighted CE minus beta * summed binary entropy."""
    a = data.inputs
    ent = 0.0
    for W, b in zip(net.weights, net.biases):
        a = 1.0 / (1.0 + np.exp(-(a @ W.T + b)))
        h = -(a * np.log(a) + (1 - a) * np.log(1 - a))
        ent += float(data.weights @ h.sum(axis=1))
    logits = a @ net.head.lam.T + net.head.bias
    p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    ce = -float(data.weights @ np.log(p[np.arange(data.n), data.labels]))
    return ce - beta * ent


def small_data(seed=0, dim=3, y=3, n=25):
    rng = np.random.default_rng(seed)
    return SampleSet(rng.uniform(size=(n, dim)), rng.integers(0, y, size=n), y_size=y)


# -- structure ----------------------------------------------------------------

def test_init_stack_shapes_and_determinism():
    net = init_stack([4, 3], 2, 0)
    assert net.weights[0].shape == (3, 4)
    assert net.widths == [4, 3] and net.depth == 1
    assert np.all(np.abs(net.weights[0]) <= 0.5) and not net.biases[0].any()
    assert np.array_equal(init_stack([4, 3], 2, 0).flat(), net.flat())


def test_init_stack_seeds_differ():
    for s in range(100):
        assert not np.array_equal(init_stack([3, 2], 2, s).flat(), init_stack([3, 2], 2, s + 100).flat())


def test_init_stack_rejects_bad_widths():
    with pytest.raises(RangeError):
        init_stack([3, 0], 2, 0)
    with pytest.raises(RangeError):
        init_stack([3], 0, 0)


def test_layer_stack_validation():
    with pytest.raises(DimensionMismatch):
        LayerStack([np.zeros((2, 3))], [np.zeros(2)], SoftmaxParams.zeros(2, 3))
    with pytest.raises(DimensionMismatch):
        LayerStack([np.zeros((2, 3)), np.zeros((2, 4))], [np.zeros(2)] * 2, SoftmaxParams.zeros(2, 2))


def test_stack_json_round_trip():
    net = init_stack([3, 4, 2], 3, 5)
    obj = net.to_json()
    assert obj["widths"] == [3, 4, 2] and obj["y_size"] == 3
    back = LayerStack.from_json(obj)
    assert np.array_equal(back.flat(), net.flat())


def test_flat_round_trip():
    net = init_stack([2, 3, 3], 2, 1)
    v = np.arange(net.flat().size, dtype=float)
    assert np.array_equal(net.with_flat(v).flat(), v)
    with pytest.raises(DimensionMismatch):
        net.with_flat(v[:-1])


# -- forward ------------------------------------------------------------------

def test_forward_zero_params():
    acts, out = forward(zero_stack([3, 4, 2], 3), [0.3, -1.0, 2.0])
    assert all(np.all(a == 0.5) for a in acts)
    assert np.allclose(out, 1 / 3, atol=0)


def test_forward_depth_zero_is_the_softmax():
    rng = np.random.default_rng(0)
    head = SoftmaxParams(rng.normal(size=(3, 4)), rng.normal(size=3))
    net = LayerStack([], [], head)
    x = rng.uniform(size=(6, 4))
    acts, out = forward(net, x)
    assert acts == []
    assert np.abs(out - softmax_predict(head, x)).max() <= 1e-12


def test_forward_monotone_in_weight():
    net = init_stack([2, 2], 2, 3)
    x = np.array([0.4, 0.7])
    a0 = forward(net, x)[0][0][1]
    net.weights[0][1, 0] += 0.3
    assert forward(net, x)[0][0][1] > a0


def test_forward_dimension_check():
    with pytest.raises(DimensionMismatch):
        forward(init_stack([3, 2], 2, 0), np.zeros(4))


@given(st.integers(0, 2**32 - 1))
def test_forward_outputs_are_distributions(seed):
    rng = np.random.default_rng(seed)
    net = init_stack([3, 4, 2], 3, 0)
    net = net.with_flat(rng.normal(scale=5.0, size=net.flat().size))
    _, out = forward(net, rng.normal(size=(5, 3)))
    assert np.all(out >= 0) and np.allclose(out.sum(axis=1), 1.0, atol=1e-12)


# -- loss -----------------------------------------------------------------------

def test_loss_zero_params():
    data = small_data()
    net = zero_stack([3, 4, 2], 3)
    assert loss(net, data, 0.0) == pytest.approx(math.log(3), abs=1e-14)
    assert loss(net, data, 0.2) == pytest.approx(math.log(3) - 0.2 * 6 * math.log(2), abs=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_loss_matches_oracle(seed):
    data = small_data(seed)
    net = init_stack([3, 4, 2], 3, seed)
    net = net.with_flat(np.random.default_rng(seed).normal(size=net.flat().size))
    assert loss(net, data, 0.1) == pytest.approx(loss_oracle(net, data, 0.1), abs=1e-12)
    assert loss(net, data, 0.0) == pytest.approx(loss_oracle(net, data, 0.0), abs=1e-12)


def test_loss_checks_data():
    with pytest.raises(DimensionMismatch):
        loss(init_stack([3, 2], 2, 0), small_data(dim=4, y=2), 0.0)
    with pytest.raises(DimensionMismatch):
        loss(init_stack([3, 2], 2, 0), small_data(dim=3, y=3), 0.0)


@pytest.mark.parametrize("beta", [0.0, 0.1])
@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed, beta):
    assert stack_grad_error(seed, beta) <= 1e-4


def test_l2_gradient_skips_biases():
    data = small_data()
    net = init_stack([3, 2], 3, 0)
    _, g0 = loss_and_grad(net, data, 0.0, 0.0)
    _, g1 = loss_and_grad(net, data, 0.0, 0.5)
    assert np.array_equal(g0.biases[0], g1.biases[0])
    assert np.allclose(g1.weights[0] - g0.weights[0], 0.5 * net.weights[0], atol=1e-15)


def test_entropy_weight_direction_on_a_probe():
    # one hidden unit, fixed head; only the input weight moves
    data = SampleSet([[0.2], [1.0]], [0, 1], y_size=2)
    head = SoftmaxParams([[-2.0], [2.0]], [0.0, 0.0])

    def stack(w):
        return LayerStack([np.array([[w]])], [np.zeros(1)], head)

    def unit_entropy(w):
        a = forward(stack(w), data.inputs)[0][0]
        return float(data.weights @ -(a * np.log(a) + (1 - a) * np.log(1 - a)).ravel())

    hs = []
    for beta in (0.0, 0.05, 0.1, 0.3, 1.0):
        w = minimize_scalar(lambda w: loss(stack(w), data, beta), bounds=(-20, 20), method="bounded",
                            options={"xatol": 1e-10}).x
        hs.append(unit_entropy(w))
    assert all(b >= a - 1e-9 for a, b in zip(hs, hs[1:]))
    assert hs[-1] > hs[0]


# -- training ---------------------------------------------------------------------

def test_net_config_validation():
    with pytest.raises(RangeError):
        NetTrainConfig(beta=-1.0)
    with pytest.raises(RangeError):
        NetTrainConfig(mode="sgd")
    with pytest.raises(RangeError):
        NetTrainConfig(mode="coordinate", sweeps=0)
    with pytest.raises(RangeError):
        NetTrainConfig(order="sideways")
    with pytest.raises(DimensionMismatch):
        NetTrainConfig(beta_per_layer=[0.1]).betas(2)
    assert NetTrainConfig(beta_per_layer=[0.1, 0.2]).betas(2).tolist() == [0.1, 0.2]


def test_backprop_losses_non_increasing_and_deterministic():
    data = xor_samples()
    cfg = NetTrainConfig(learning_rate=5.0, max_iters=400)
    net0 = init_stack([2, 2, 2], 2, 1)
    _, tr = train_backprop(net0, data, cfg)
    losses = [r.loss for r in tr.records]
    assert all(b <= a + 1e-15 * abs(a) * 8 for a, b in zip(losses, losses[1:]))
    _, tr2 = train_backprop(net0, data, cfg)
    assert tr.to_csv() == tr2.to_csv()


def test_backprop_snapshots():
    _, tr = train_backprop(init_stack([2, 2], 2, 0), xor_samples(), NetTrainConfig(max_iters=10), (0, 3, 10))
    assert [e for e, _ in tr.snapshots] == [0, 3, 10]


def test_backprop_needs_backprop_mode():
    with pytest.raises(RangeError):
        train_backprop(init_stack([2, 2], 2, 0), xor_samples(), NetTrainConfig(mode="coordinate"))
    with pytest.raises(RangeError):
        train_coordinate(init_stack([2, 2], 2, 0), xor_samples(), NetTrainConfig())


@pytest.mark.slow
def test_xor_backprop_reaches_low_error():
    data = xor_samples()
    cfg = NetTrainConfig(learning_rate=2.0, max_iters=20_000, l2=1e-5, grad_tol=1e-10)
    ok = 0
    for seed in range(10):
        _, tr = train_backprop(init_stack([2, 2, 2], 2, seed), data, cfg)
        ok += tr.final.train_error < 0.05
    assert ok >= 8


def test_depth_zero_matches_softmax():
    inst = generate_equiv_instance(0, 3, 3)
    _, sm = softmax_conditional(inst, TrainConfig(max_iters=500_000, grad_tol=1e-9))
    data = SampleSet.from_joint(inst.joint, inst.features)
    net, _ = train_backprop(init_stack([3], 3, 0), data, NetTrainConfig(max_iters=20_000, grad_tol=1e-9))
    _, p = forward(net, inst.features.t)
    assert 0.5 * np.abs(p - sm).sum(axis=1).max() <= 1e-4


def test_coordinate_no_op():
    net = init_stack([2, 2, 2], 2, 0)
    out, tr = train_coordinate(net, xor_samples(), NetTrainConfig(mode="coordinate", sweeps=1, inner_iters=0))
    assert np.array_equal(out.flat(), net.flat())
    assert len(tr.records) == 2


def test_block_isolation():
    net = init_stack([2, 3, 2], 2, 0)
    cfg = NetTrainConfig(inner_iters=20)
    head_only = train_block(net, xor_samples(), cfg, block=net.depth)
    for a, b in zip(head_only.weights + head_only.biases, net.weights + net.biases):
        assert np.array_equal(a, b)
    assert not np.array_equal(head_only.head.lam, net.head.lam)
    first = train_block(net, xor_samples(), cfg, block=0)
    assert np.array_equal(first.weights[1], net.weights[1])
    assert np.array_equal(first.head.lam, net.head.lam)
    assert not np.array_equal(first.weights[0], net.weights[0])
    with pytest.raises(RangeError):
        train_block(net, xor_samples(), cfg, block=3)


def test_coordinate_losses_non_increasing():
    cfg = NetTrainConfig(mode="coordinate", sweeps=30, inner_iters=20, learning_rate=4.0)
    _, tr = train_coordinate(init_stack([2, 2, 2], 2, 2), xor_samples(), cfg)
    losses = [r.loss for r in tr.records]
    assert all(b <= a + 8e-16 * abs(a) for a, b in zip(losses, losses[1:]))


def test_bottom_up_order_runs():
    cfg = NetTrainConfig(mode="coordinate", sweeps=3, inner_iters=5, order="bottom_up")
    out, tr = train(init_stack([2, 2, 2], 2, 0), xor_samples(), cfg)
    assert len(tr.records) == 4 and out.depth == 2


def test_trace_csv_schema():
    _, tr = train(init_stack([2, 2], 2, 0), xor_samples(), NetTrainConfig(max_iters=3))
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == list(TrainTrace.CSV_HEADER) == ["iteration", "loss", "reg_term", "train_error"]
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2, 3]


# -- tasks -------------------------------------------------------------------------

def test_bits_task_is_deterministic_and_balanced():
    a, b = bits_task(3, n_samples=2000), bits_task(3, n_samples=2000)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.labels, b.labels)
    assert a.dim == 12 and set(np.unique(a.inputs)) <= {0.0, 1.0}
    assert 0.4 <= a.labels.mean() <= 0.6
