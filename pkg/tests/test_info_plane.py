import csv
import io
import math
import re

import numpy as np
import pytest

from maxent_lab.discrete_prob import SampleSet, bin_codes, empirical_entropy, mutual_information
from maxent_lab.equivalence_lab import constant_instance, generate_equiv_instance, identity_instance
from maxent_lab.errors import EmptySample, RangeError
from maxent_lab.info_plane import (
    InfoPlanePoint,
    Trajectory,
    emit_plane_svg,
    label_entropy,
    plane_svg,
    schedule,
    track,
    verify_ib_corollary,
)
from maxent_lab.recursive_net import LayerStack, NetTrainConfig, bits_task, init_stack, train_backprop
from maxent_lab.maxent_core import SoftmaxParams
from tests.strategies import random_joint


def small_run(seed=0, iters=60):
    data = bits_task(seed, n_bits=6, n_samples=800)
    net = init_stack([6, 5, 3], 2, seed)
    _, tr = train_backprop(net, data, NetTrainConfig(learning_rate=2.0, max_iters=iters), schedule(iters))
    return tr.snapshots, data


def traj_of(layers, epochs):
    pts = [
        InfoPlanePoint(e, l, 0.1 * l + 0.01 * e, 0.05 * l + 0.002 * e)
        for e in epochs
        for l in layers
    ]
    return Trajectory(pts, bins=30, n_samples=100, seed=0)


# -- schedule and tracking ----------------------------------------------------------

def test_schedule():
    assert schedule(7) == [0, 1, 2, 5, 7]
    assert schedule(10) == [0, 1, 2, 5, 10]
    assert schedule(0) == [0]


def test_track_is_deterministic_and_ordered():
    snaps, data = small_run()
    a = track(snaps, data, bins=10)
    b = track(snaps, data, bins=10)
    assert a.points == b.points
    keys = [(p.epoch, p.layer) for p in a.points]
    assert keys == sorted(keys)
    assert {p.layer for p in a.points} == {1, 2}


def test_track_bounds():
    snaps, data = small_run(1)
    traj = track(snaps, data, bins=30)
    h_y = label_entropy(data.labels)
    for p in traj.points:
        assert 0.0 <= p.i_ty <= h_y + 1e-9 <= math.log(2) + 1e-9
        assert p.i_xt >= 0.0


def test_track_zero_net_gives_zero_information():
    data = bits_task(0, n_bits=4, n_samples=200)
    net = init_stack([4, 3], 2, 0)
    net = net.with_flat(np.zeros(net.flat().size))
    traj = track([(0, net)], data, bins=30)
    assert all(p.i_xt == 0.0 and p.i_ty == 0.0 for p in traj.points)


def test_track_subsample_is_seeded():
    snaps, data = small_run()
    a = track(snaps, data, bins=10, n_samples=300, seed=4)
    b = track(snaps, data, bins=10, n_samples=300, seed=4)
    assert a.points == b.points and a.n_samples == 300


def test_identity_like_layer_matches_binned_input_entropy():
    # one unit copying a single input coordinate through a steep sigmoid
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=(500, 1)).astype(float)
    data = SampleSet(x, x[:, 0].astype(int), y_size=2)
    net = LayerStack([np.array([[40.0]])], [np.array([-20.0])], SoftmaxParams.zeros(2, 1))
    traj = track([(0, net)], data, bins=30)
    assert traj.points[0].i_xt == pytest.approx(empirical_entropy(bin_codes(x, 30)), abs=1e-9)


def test_track_errors():
    snaps, data = small_run(iters=2)
    with pytest.raises(EmptySample):
        track([], data)
    with pytest.raises(RangeError):
        track(snaps, data, bins=1)


def test_trajectory_csv_schema():
    rows = list(csv.reader(io.StringIO(traj_of([1], [0, 3]).to_csv())))
    assert rows[0] == ["epoch", "layer", "i_xt_nats", "i_ty_nats", "bins", "n_samples", "seed"]
    assert len(rows) == 3


# -- IB corollary ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_ib_gap_on_equiv_instances(seed):
    assert verify_ib_corollary(generate_equiv_instance(seed, 1 + seed % 6, 2 + seed % 3))["gap"] <= 1e-9


def test_ib_constant_feature_gap_is_full_mi():
    p = random_joint(np.random.default_rng(0), (4, 3), 0.5)
    res = verify_ib_corollary(constant_instance(p))
    assert res["gap"] == pytest.approx(mutual_information(p), abs=1e-12)
    assert res["gap"] > 0


def test_ib_identity_feature():
    p = random_joint(np.random.default_rng(1), (5, 2))
    res = verify_ib_corollary(identity_instance(p))
    assert res["gap"] <= 1e-12
    px = p.sum(axis=1)
    assert res["i_xt"] == pytest.approx(-(px * np.log(px)).sum(), abs=1e-12)


# -- SVG --------------------------------------------------------------------------------

def test_svg_single_point():
    svg = plane_svg(traj_of([1], [0]))
    assert svg.count('class="marker"') == 1
    assert svg.count("<polyline") == 0
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_svg_counts_polylines_and_vertices():
    svg = plane_svg(traj_of([1, 2, 3], [0, 1, 2, 5, 10]))
    lines = re.findall(r'<polyline class="layer"[^>]* points="([^"]+)"', svg)
    assert len(lines) == 3
    assert all(len(pts.split()) == 5 for pts in lines)
    assert svg.count('class="marker"') == 15


def test_svg_epoch_colors_differ():
    svg = plane_svg(traj_of([1], [0, 10]))
    fills = re.findall(r'class="marker"[^>]* fill="(#[0-9a-f]{6})"', svg)
    assert len(set(fills)) == 2


def test_svg_byte_identical(tmp_path):
    traj = traj_of([1, 2], [0, 1, 2])
    a = emit_plane_svg(traj, tmp_path / "a.svg")
    b = emit_plane_svg(traj, tmp_path / "b.svg")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_svg_empty():
    with pytest.raises(EmptySample):
        plane_svg(Trajectory([]))
