"""The acceptance battery: every check as a function returning table rows.

Seeds follow one scheme throughout: instance ``i`` of a check uses
``suite.seed ^ i``. The table columns are check_id, metric, relation,
threshold, value, pass; rows are sorted by check id and keep their
emission order within a check.
"""
import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from maxent_lab.config import CHECK_IDS
from maxent_lab.discrete_prob import FeatureMap, JointTable, SampleSet, induce_triple, mutual_information
from maxent_lab.equivalence_lab import (
    Instance,
    generate_equiv_instance,
    generate_violating_instance,
    max_row_tv,
    softmax_conditional,
    verify_equivalence_theorem,
    verify_inequality_chain,
    xor_instance,
)
from maxent_lab.errors import NonConvergence
from maxent_lab.harness import RunRecord
from maxent_lab.info_plane import label_entropy, plane_svg, schedule, track, verify_ib_corollary
from maxent_lab.maxent_core import (
    SoftmaxParams,
    TrainConfig,
    softmax_objective,
    solve_original_me,
)
from maxent_lab.recursive_net import (
    NetTrainConfig,
    bits_task,
    forward,
    init_stack,
    loss,
    loss_and_grad,
    train_backprop,
    train_coordinate,
    xor_samples,
)

TABLE_HEADER = ("check_id", "metric", "relation", "threshold", "value", "pass")
FD_STEP = 1e-5
SLACK = 1e-9
BITS_HIDDEN = (8, 4)
REDUCTION_CFG = TrainConfig(learning_rate=1.0, max_iters=500_000, grad_tol=1e-9)
REDUCTION_ITERS = 20_000

_OPS = {
    "<=": lambda v, t: v <= t,
    "<": lambda v, t: v < t,
    ">=": lambda v, t: v >= t,
    "==": lambda v, t: v == t,
}


@dataclass(frozen=True)
class CheckRow:
    check_id: str
    metric: str
    relation: str
    threshold: float
    value: float

    @property
    def passed(self):
        return bool(_OPS[self.relation](self.value, self.threshold))

    def to_json(self):
        return {
            "check_id": self.check_id,
            "metric": self.metric,
            "relation": self.relation,
            "threshold": self.threshold,
            "value": self.value,
            "pass": self.passed,
        }


def _row(cid, metric, rel, thr, value):
    return CheckRow(cid, metric, rel, float(thr), float(value))


def _seeds(base, count):
    return [base ^ i for i in range(count)]


# -- individual checks ---------------------------------------------------

def check_me_oracle(cfg):
    """Original ME vs brute-force P(Y|X) on random 8x5 joints."""
    s = cfg.suite
    worst = 0.0
    for seed in _seeds(s.seed, s.me_instances):
        p = np.random.default_rng(seed).dirichlet(np.ones(40)).reshape(8, 5)
        joint = JointTable(p)
        try:
            _, cond = solve_original_me(joint, cfg.me_solver.train_config())
        except NonConvergence as exc:
            cond = exc.result[1]
        brute = joint.probs / joint.probs.sum(axis=1, keepdims=True)
        worst = max(worst, max_row_tv(cond, brute))
    return [_row("C01", "max_row_tv", "<=", s.me_tv_tol, worst)]


def _equiv_shape(i):
    # cycles through n = 1..6 and y_size = 2..4
    return 1 + i % 6, 2 + (i // 6) % 3


def check_theorem_positive(cfg):
    s = cfg.suite
    c1 = c2 = tv = 0.0
    failures = 0
    for i, seed in enumerate(_seeds(s.seed, s.equiv_instances)):
        n, y = _equiv_shape(i)
        inst = generate_equiv_instance(seed, n, y)
        rep = verify_equivalence_theorem(
            inst, cfg.solver.train_config(), tv_tol=s.theorem_tv_tol, me_cfg=cfg.me_solver.train_config()
        )
        c1 = max(c1, rep.i_xy_given_t)
        c2 = max(c2, rep.max_pairwise_i_titj_given_y)
        tv = max(tv, rep.tv_distance)
        failures += not rep.passed
    return [
        _row("C02", "max_i_xy_given_t", "<=", s.condition_tol, c1),
        _row("C02", "max_i_titj_given_y", "<=", s.condition_tol, c2),
        _row("C02", "max_tv", "<=", s.theorem_tv_tol, tv),
        _row("C02", "failed_reports", "==", 0, failures),
    ]


def check_negative_control(cfg):
    s = cfg.suite
    tvs = []
    for seed in _seeds(s.seed, s.violate_instances):
        inst = generate_violating_instance(seed, "violate_c1")
        rep = verify_equivalence_theorem(
            inst, cfg.solver.train_config(), me_cfg=cfg.me_solver.train_config()
        )
        tvs.append(rep.tv_distance)
    return [_row("C03", "median_tv", ">=", s.negative_tv_min, float(np.median(tvs)))]


def _rel_err(a, n):
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-8)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def _central_diff(f, v, h=FD_STEP):
    g = np.empty_like(v)
    for k in range(v.size):
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2 * h)
    return g


def _grad_data(rng, dim, y_size, n_rows=20):
    x = rng.uniform(0.0, 1.0, size=(n_rows, dim))
    labels = rng.integers(0, y_size, size=n_rows)
    return SampleSet(x, labels, y_size=y_size, weights=rng.dirichlet(np.ones(n_rows)))


def softmax_grad_error(seed):
    rng = np.random.default_rng(seed)
    data = _grad_data(rng, 3, 3)
    params = SoftmaxParams(rng.normal(size=(3, 3)), rng.normal(size=3))
    l2 = 0.01
    _, _, glam, gbias = softmax_objective(params, data, l2)
    v = np.concatenate([params.lam.ravel(), params.bias])

    def f(u):
        return softmax_objective(SoftmaxParams(u[:9].reshape(3, 3), u[9:]), data, l2, False)[0]

    return _rel_err(np.concatenate([glam.ravel(), gbias]), _central_diff(f, v))


def stack_grad_error(seed, beta):
    rng = np.random.default_rng(seed)
    data = _grad_data(rng, 3, 3)
    net = init_stack([3, 4, 3], 3, seed)
    net = net.with_flat(rng.normal(size=net.flat().size))
    _, grads = loss_and_grad(net, data, beta)
    return _rel_err(grads.flat(), _central_diff(lambda u: loss(net.with_flat(u), data, beta), net.flat()))


def check_gradients(cfg):
    s = cfg.suite
    seeds = _seeds(s.seed, s.grad_points)
    rows = [_row("C04", "softmax_max_rel_err", "<=", s.grad_rel_tol, max(softmax_grad_error(k) for k in seeds))]
    for beta in (0.0, 0.1):
        worst = max(stack_grad_error(k, beta) for k in seeds)
        rows.append(_row("C04", f"stack_beta_{beta!r}_max_rel_err", "<=", s.grad_rel_tol, worst))
    return rows


def random_triple_instance(seed):
    """Random joint and feature map; about a third of the feature values are hard 0/1."""
    rng = np.random.default_rng(seed)
    x_size = int(rng.integers(2, 7))
    y_size = int(rng.integers(2, 5))
    n = int(rng.integers(1, 5))
    joint = rng.dirichlet(np.full(x_size * y_size, 0.5)).reshape(x_size, y_size)
    t = rng.uniform(0.0, 1.0, size=(x_size, n))
    hard = rng.uniform(size=t.shape) < 1 / 3
    t[hard] = np.round(t[hard])
    return Instance(JointTable(joint / joint.sum()), FeatureMap(t))


def _bit_tables(tri, n):
    """From P(X, T, Y) over configurations: P(X, T_i) for each i and P(T_i, T_j) for i < j."""
    pxt = tri.marginal((0, 1))
    cfgs = np.arange(pxt.shape[1])
    bits = [(cfgs >> i) & 1 for i in range(n)]
    single = [np.stack([pxt[:, b == 0].sum(axis=1), pxt[:, b == 1].sum(axis=1)], axis=1) for b in bits]
    pt = pxt.sum(axis=0)
    pairs = {}
    for i in range(n):
        for j in range(i + 1, n):
            tbl = np.zeros((2, 2))
            np.add.at(tbl, (bits[i], bits[j]), pt)
            pairs[i, j] = tbl
    return single, pairs


def check_data_processing(cfg):
    s = cfg.suite
    bad_ty = bad_pair = 0
    for seed in _seeds(s.seed, s.dpi_instances):
        inst = random_triple_instance(seed)
        tri = induce_triple(inst.joint, inst.features)
        if mutual_information(tri.marginal((1, 2))) > mutual_information(inst.joint) + SLACK:
            bad_ty += 1
        single, pairs = _bit_tables(tri, inst.n_features)
        ixt = [mutual_information(JointTable(tbl)) for tbl in single]
        for (i, j), tbl in pairs.items():
            iij = mutual_information(JointTable(tbl))
            if iij > min(ixt[i], ixt[j]) + SLACK:
                bad_pair += 1
    return [
        _row("C05", "violations_i_ty_le_i_xy", "==", 0, bad_ty),
        _row("C05", "violations_i_titj_le_i_tix", "==", 0, bad_pair),
    ]


def check_xor_chain(cfg):
    res = verify_inequality_chain(xor_instance())
    return [
        _row("C06", "paper_claim_holds", "==", 0, int(res["paper_claim_holds"])),
        _row("C06", "abs_i_titj_given_y_minus_ln2", "<=", SLACK, abs(res["max_i_titj_given_y"] - math.log(2))),
        _row("C06", "max_i_titj", "<=", SLACK, res["max_i_titj"]),
    ]


def check_reduction(cfg):
    """Depth-0 stack vs the feature softmax on one exact equiv joint."""
    s = cfg.suite
    inst = generate_equiv_instance(s.seed, 3, 3)
    _, sm = softmax_conditional(inst, REDUCTION_CFG)
    data = SampleSet.from_joint(inst.joint, inst.features)
    net_cfg = NetTrainConfig(learning_rate=1.0, max_iters=REDUCTION_ITERS, grad_tol=1e-9)
    net, _ = train_backprop(init_stack([inst.n_features], inst.y_size, s.seed), data, net_cfg)
    _, p = forward(net, inst.features.t)
    return [_row("C07", "max_row_tv", "<=", s.reduction_tv_tol, max_row_tv(p, sm))]


def xor_pair(cfg, seed):
    """(backprop trace, coordinate trace) on XOR from the same initial stack."""
    n = cfg.net
    data = xor_samples()
    net = init_stack([2] + list(n.hidden), 2, seed)
    base = dict(learning_rate=n.learning_rate, grad_tol=n.grad_tol, l2=n.l2, beta=n.beta)
    _, tb = train_backprop(net, data, NetTrainConfig(max_iters=n.max_iters, **base))
    _, tc = train_coordinate(
        net,
        data,
        NetTrainConfig(mode="coordinate", sweeps=n.sweeps, inner_iters=n.inner_iters, order=n.order, **base),
    )
    return tb, tc


def check_coordinate_vs_backprop(cfg):
    s = cfg.suite
    need = math.ceil(0.8 * s.xor_seeds)
    fast = close = 0
    for seed in _seeds(s.seed, s.xor_seeds):
        tb, tc = xor_pair(cfg, seed)
        fast += tb.records[min(20_000, len(tb.records) - 1)].train_error < 0.05
        lb, lc = tb.final.loss, tc.final.loss
        close += abs(lc - lb) <= 0.1 * abs(lb)
    return [
        _row("C08", "seeds_backprop_error_below_5pct_by_20000", ">=", need, fast),
        _row("C08", "seeds_coordinate_loss_within_10pct", ">=", need, close),
    ]


def check_ib(cfg):
    s = cfg.suite
    gap = 0.0
    for i, seed in enumerate(_seeds(s.seed, s.ib_instances)):
        n, y = _equiv_shape(i)
        gap = max(gap, verify_ib_corollary(generate_equiv_instance(seed, n, y))["gap"])
    return [_row("C09", "max_gap", "<=", s.ib_gap_tol, gap)]


def info_plane_run(cfg, hidden=BITS_HIDDEN):
    """Train the 12-bit task with snapshots; returns (trajectory, trace, data)."""
    s, e = cfg.suite, cfg.estimator
    data = bits_task(s.seed, n_samples=e.n_samples)
    net = init_stack([data.dim, *hidden], 2, s.seed)
    ncfg = NetTrainConfig(learning_rate=2.0, max_iters=s.bits_iters, grad_tol=1e-10)
    _, trace = train_backprop(net, data, ncfg, snapshot_epochs=schedule(s.bits_iters))
    traj = track(trace.snapshots, data, bins=e.bins, seed=e.seed)
    return traj, trace, data


def check_info_plane(cfg, artifacts=None):
    s = cfg.suite
    traj, trace, data = info_plane_run(cfg)
    again = track(trace.snapshots, data, bins=traj.bins, seed=traj.seed)
    mismatches = sum(a != b for a, b in zip(traj.points, again.points)) + abs(
        len(traj.points) - len(again.points)
    )
    h_y = label_entropy(data.labels)
    top = max(p.layer for p in traj.points)
    last = max(p.epoch for p in traj.points)
    top_ty = next(p.i_ty for p in traj.points if p.layer == top and p.epoch == last)
    if artifacts is not None:
        artifacts["infoplane.csv"] = traj.to_csv()
        artifacts["infoplane.svg"] = plane_svg(traj)
    return [
        _row("C10", "trajectory_mismatches", "==", 0, mismatches),
        _row("C10", "max_i_ty_minus_ln_y", "<=", SLACK, max(p.i_ty for p in traj.points) - math.log(2)),
        _row("C10", "final_train_error", "<", 0.05, trace.final.train_error),
        _row("C10", "h_y_minus_top_i_ty", "<=", s.fano_slack, h_y - top_ty),
    ]


CHECKS = {
    "C01": check_me_oracle,
    "C02": check_theorem_positive,
    "C03": check_negative_control,
    "C04": check_gradients,
    "C05": check_data_processing,
    "C06": check_xor_chain,
    "C07": check_reduction,
    "C08": check_coordinate_vs_backprop,
    "C09": check_ib,
    "C10": check_info_plane,
}
assert tuple(CHECKS) == CHECK_IDS


# -- table ---------------------------------------------------------------

def table_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in rows:
        w.writerow((r.check_id, r.metric, r.relation, repr(r.threshold), repr(r.value), "true" if r.passed else "false"))
    return buf.getvalue()


def table_json(rows, cfg):
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.suite.seed,
        "all_passed": all(r.passed for r in rows),
        "rows": [r.to_json() for r in rows],
    }


def run_suite(cfg, out=None, progress=None):
    """Run the selected checks; returns (RunRecord, rows).

    With an OutputDir, writes suite.csv, suite.json and, when C10 runs,
    infoplane.csv and infoplane.svg. Wall time goes into the RunRecord
    only, so the files on disk are reproducible byte for byte.
    """
    t0 = time.perf_counter()
    rows, artifacts = [], {}
    for cid in sorted(cfg.suite.checks):
        start = time.perf_counter()
        got = check_info_plane(cfg, artifacts) if cid == "C10" else CHECKS[cid](cfg)
        rows.extend(got)
        if progress:
            progress(cid, got, time.perf_counter() - start)
    rows.sort(key=lambda r: r.check_id)
    outputs = []
    if out is not None:
        out.write_text("suite.csv", table_csv(rows))
        out.write_json("suite.json", table_json(rows, cfg))
        outputs = ["suite.csv", "suite.json"]
        for name in sorted(artifacts):
            out.write_text(name, artifacts[name])
            outputs.append(name)
    failed = sorted({r.check_id for r in rows if not r.passed})
    record = RunRecord(
        command="suite",
        config_hash=cfg.config_hash(),
        seed=cfg.suite.seed,
        wall_time_ms=1000.0 * (time.perf_counter() - t0),
        outputs=outputs,
        summary={"rows": len(rows), "failed_checks": failed, "all_passed": not failed},
    )
    return record, rows
