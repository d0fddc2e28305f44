"""Sigmoid layer stacks with a softmax head.

Each hidden unit's activation is read as a feature confidence
t_i(x) = P(T_i = 1 | X = x); the head is a feature-based softmax over the
top layer. Training minimizes cross-entropy minus ``beta`` times the summed
conditional entropy of the hidden units, either jointly (backprop) or one
layer block at a time with the others frozen (coordinate).
"""
import csv
import io
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from maxent_lab import kernels
from maxent_lab.discrete_prob import SampleSet
from maxent_lab.errors import DimensionMismatch, RangeError
from maxent_lab.maxent_core import SoftmaxParams, TrainConfig, softmax_predict


@dataclass(eq=False)
class LayerStack:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    head: SoftmaxParams

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise DimensionMismatch("one bias vector per weight table")
        prev = None
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise DimensionMismatch("layer weights must be (n_l, n_{l-1}), biases (n_l,)")
            if prev is not None and W.shape[1] != prev:
                raise DimensionMismatch("adjacent layer widths disagree")
            prev = W.shape[0]
        if prev is not None and self.head.n_features != prev:
            raise DimensionMismatch("head does not match the top layer width")

    @property
    def depth(self):
        return len(self.weights)

    @property
    def widths(self):
        """(n_0, n_1, ..., n_L)."""
        if self.weights:
            return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]
        return [self.head.n_features]

    @property
    def y_size(self):
        return self.head.y_size

    def copy(self):
        return LayerStack(
            [W.copy() for W in self.weights], [b.copy() for b in self.biases], self.head.copy()
        )

    def flat(self):
        parts = [p.ravel() for W, b in zip(self.weights, self.biases) for p in (W, b)]
        parts += [self.head.lam.ravel(), self.head.bias.ravel()]
        return np.concatenate(parts)

    def with_flat(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.flat().size,):
            raise DimensionMismatch("flat vector has the wrong length")
        out, k = [], 0
        for a in [p for W, b in zip(self.weights, self.biases) for p in (W, b)] + [
            self.head.lam,
            self.head.bias,
        ]:
            out.append(v[k:k + a.size].reshape(a.shape).copy())
            k += a.size
        return LayerStack(out[0:-2:2], out[1:-2:2], SoftmaxParams(out[-2], out[-1]))

    def to_json(self):
        return {
            "widths": self.widths,
            "y_size": self.y_size,
            "layers": [
                {"weights": W.ravel().tolist(), "biases": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
            "head": {"lambda": self.head.lam.ravel().tolist(), "bias": self.head.bias.tolist()},
        }

    @classmethod
    def from_json(cls, obj):
        widths = obj["widths"]
        y = obj["y_size"]
        Ws, bs = [], []
        for i, layer in enumerate(obj["layers"]):
            Ws.append(np.asarray(layer["weights"], dtype=np.float64).reshape(widths[i + 1], widths[i]))
            bs.append(np.asarray(layer["biases"], dtype=np.float64))
        head = SoftmaxParams(
            np.asarray(obj["head"]["lambda"], dtype=np.float64).reshape(y, widths[-1]),
            np.asarray(obj["head"]["bias"], dtype=np.float64),
        )
        return cls(Ws, bs, head)


@dataclass
class NetTrainConfig(TrainConfig):
    beta: float = 0.0
    beta_per_layer: Optional[Sequence[float]] = None
    mode: str = "backprop"
    sweeps: int = 1
    inner_iters: int = 100
    order: str = "top_down"

    def __post_init__(self):
        super().__post_init__()
        if self.beta < 0:
            raise RangeError("beta must be >= 0")
        if self.beta_per_layer is not None:
            self.beta_per_layer = [float(b) for b in self.beta_per_layer]
            if any(b < 0 for b in self.beta_per_layer):
                raise RangeError("beta_per_layer entries must be >= 0")
        if self.mode not in ("backprop", "coordinate"):
            raise RangeError(f"unknown training mode {self.mode!r}")
        if self.mode == "coordinate" and self.sweeps < 1:
            raise RangeError("sweeps must be >= 1 in coordinate mode")
        if self.inner_iters < 0:
            raise RangeError("inner_iters must be >= 0")
        if self.order not in ("top_down", "bottom_up"):
            raise RangeError(f"unknown block order {self.order!r}")

    def betas(self, depth):
        if self.beta_per_layer is not None:
            if len(self.beta_per_layer) != depth:
                raise DimensionMismatch("beta_per_layer needs one entry per hidden layer")
            return np.asarray(self.beta_per_layer)
        return np.full(depth, self.beta)


@dataclass
class TraceRecord:
    iteration: int
    loss: float
    reg_term: float
    train_error: float


@dataclass
class TrainTrace:
    records: List[TraceRecord] = field(default_factory=list)
    converged: bool = False
    residual: float = float("inf")
    snapshots: list = field(default_factory=list)

    CSV_HEADER = ("iteration", "loss", "reg_term", "train_error")

    def append(self, iteration, loss, reg, err):
        self.records.append(TraceRecord(int(iteration), float(loss), float(reg), float(err)))

    @property
    def final(self):
        return self.records[-1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.records:
            w.writerow((r.iteration, repr(r.loss), repr(r.reg_term), repr(r.train_error)))
        return buf.getvalue()


def init_stack(widths, y_size, seed):
    """Weights uniform on [-0.5, 0.5] (hidden layers first, then the head), biases zero.

    ``widths`` is (n_0, n_1, ..., n_L); a single entry gives a bare softmax.
    """
    widths = [int(w) for w in widths]
    if not widths or any(w < 0 for w in widths) or any(w < 1 for w in widths[1:]):
        raise RangeError(f"invalid widths {widths}")
    if y_size < 1:
        raise RangeError("y_size must be >= 1")
    rng = np.random.default_rng(seed)
    Ws = [rng.uniform(-0.5, 0.5, size=(widths[i + 1], widths[i])) for i in range(len(widths) - 1)]
    bs = [np.zeros(w) for w in widths[1:]]
    lam = rng.uniform(-0.5, 0.5, size=(y_size, widths[-1]))
    return LayerStack(Ws, bs, SoftmaxParams(lam, np.zeros(y_size)))


def forward(net, x):
    """Hidden activations (one array per layer) and the output distribution.

    Accepts one input vector or a batch of rows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.widths[0]:
        raise DimensionMismatch(f"input has dimension {x.shape[-1]}, stack expects {net.widths[0]}")
    acts = []
    a = x
    for W, b in zip(net.weights, net.biases):
        a = expit(a @ W.T + b)
        acts.append(a)
    return acts, softmax_predict(net.head, a)


def _check_data(net, data):
    if data.dim != net.widths[0]:
        raise DimensionMismatch(f"data has dimension {data.dim}, stack expects {net.widths[0]}")
    if data.y_size != net.y_size:
        raise DimensionMismatch("label alphabet differs from the head")


class _Objective:
    """Training objective over a flat parameter vector.

    Layout: W_1, b_1, ..., W_L, b_L, head lambda, head bias, matching
    ``LayerStack.flat``.
    """

    def __init__(self, net, data, betas, l2=0.0, backend=None):
        self.widths = list(net.widths) + [net.y_size]
        self.depth = net.depth
        self.kernel = kernels.StackObjective(
            self.widths, data.inputs, data.labels, data.weights, betas, backend
        )
        sizes = []
        for m, n in zip(self.widths[:-1], self.widths[1:]):
            sizes += [n * m, n]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.l2 = l2
        # weight decay on weight tables, not on biases
        self.decay = np.zeros(self.offsets[-1])
        for k in range(0, len(sizes), 2):
            self.decay[self.offsets[k]:self.offsets[k + 1]] = 1.0

    def block(self, blk):
        """Slice of the flat vector holding block ``blk`` (depth = head)."""
        return slice(self.offsets[2 * blk], self.offsets[2 * blk + 2])

    def to_stack(self, v):
        v = np.array(v, dtype=np.float64)
        parts = []
        for k, (m, n) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            W = v[self.offsets[2 * k]:self.offsets[2 * k + 1]].reshape(n, m)
            b = v[self.offsets[2 * k + 1]:self.offsets[2 * k + 2]]
            parts.append((W, b))
        head = SoftmaxParams(*parts[-1])
        return LayerStack([W for W, _ in parts[:-1]], [b for _, b in parts[:-1]], head)

    def __call__(self, v, need_grad=True):
        value, _, reg, err, g = self.kernel(v, need_grad)
        if self.l2 > 0:
            value += 0.5 * self.l2 * float(self.decay @ (v * v))
            if need_grad:
                g += self.l2 * self.decay * v
        return value, reg, err, g


def _evaluate(net, data, betas, l2=0.0, need_grad=True):
    obj = _Objective(net, data, betas, l2)
    value, reg, err, g = obj(net.flat(), need_grad)
    return value, reg, err, (obj.to_stack(g) if need_grad else None)


def loss(net, data, beta=0.0):
    """Weighted cross-entropy minus beta * sum over hidden units of the mean binary entropy."""
    _check_data(net, data)
    betas = np.broadcast_to(np.asarray(beta, dtype=np.float64), (net.depth,))
    return _evaluate(net, data, betas, need_grad=False)[0]


def loss_and_grad(net, data, beta=0.0, l2=0.0):
    """(loss, gradient as a LayerStack of the same shapes)."""
    _check_data(net, data)
    betas = np.broadcast_to(np.asarray(beta, dtype=np.float64), (net.depth,))
    value, _, _, grads = _evaluate(net, data, betas, l2)
    return value, grads


def train_backprop(net, data, cfg, snapshot_epochs=()):
    """Full-batch gradient descent on every parameter jointly.

    Steps that raise the objective are rejected with the step size halved,
    so the returned stack is the best iterate (up to rounding-level ties,
    which are broken by the gradient norm). The trace holds one record
    per iteration (iteration 0 is the starting point) and a copy of the
    stack at every iteration listed in ``snapshot_epochs``.
    """
    if cfg.mode != "backprop":
        raise RangeError("train_backprop needs mode='backprop'")
    _check_data(net, data)
    obj = _Objective(net, data, cfg.betas(net.depth), cfg.l2)
    v = net.flat()
    lr = cfg.learning_rate
    value, reg, err, g = obj(v)
    trace = TrainTrace()
    trace.append(0, value, reg, err)
    snap = set(int(e) for e in snapshot_epochs)
    if 0 in snap:
        trace.snapshots.append((0, obj.to_stack(v)))
    gmax = float(np.abs(g).max(initial=0.0))
    for it in range(1, cfg.max_iters + 1):
        if gmax < cfg.grad_tol:
            break
        trial = v - lr * g
        t_value, t_reg, t_err, t_g = obj(trial)
        t_gmax = float(np.abs(t_g).max(initial=0.0))
        if kernels.accept_step(value, t_value, gmax, t_gmax):
            v, value, reg, err, g, gmax = trial, t_value, t_reg, t_err, t_g, t_gmax
        else:
            lr *= 0.5
        trace.append(it, value, reg, err)
        if it in snap:
            trace.snapshots.append((it, obj.to_stack(v)))
    trace.residual = gmax
    trace.converged = gmax < cfg.grad_tol
    return obj.to_stack(v), trace


def _blocks(depth, order):
    # block index depth is the head, 0..depth-1 are hidden layers
    top_down = list(range(depth, -1, -1))
    return top_down if order == "top_down" else top_down[::-1]


def _block_steps(obj, state, sl, lr, cfg):
    """``inner_iters`` accept/reject steps on the slice ``sl`` of the flat vector.

    ``state`` is (v, value, reg, err, g); returns the new state and step size.
    """
    v, value, reg, err, g = state
    for _ in range(cfg.inner_iters):
        gblk = np.abs(g[sl]).max(initial=0.0)
        if gblk < cfg.grad_tol:
            break
        trial = v.copy()
        trial[sl] -= lr * g[sl]
        t_value, t_reg, t_err, t_g = obj(trial)
        if kernels.accept_step(value, t_value, gblk, np.abs(t_g[sl]).max(initial=0.0)):
            v, value, reg, err, g = trial, t_value, t_reg, t_err, t_g
        else:
            lr *= 0.5
    return (v, value, reg, err, g), lr


def train_block(net, data, cfg, block):
    """Run ``cfg.inner_iters`` steps on one block (``net.depth`` is the head).

    Every parameter outside the block is returned bit-identical.
    """
    _check_data(net, data)
    if not 0 <= block <= net.depth:
        raise RangeError(f"block must be in 0..{net.depth}")
    obj = _Objective(net, data, cfg.betas(net.depth), cfg.l2)
    v = net.flat()
    state, _ = _block_steps(obj, (v, *obj(v)), obj.block(block), cfg.learning_rate, cfg)
    return obj.to_stack(state[0])


def train_coordinate(net, data, cfg):
    """Block-coordinate descent: one layer block at a time, all others frozen.

    Each sweep visits the head and then the hidden layers from the top down
    (or bottom up with ``order='bottom_up'``), taking ``inner_iters``
    accept/reject gradient steps on the active block. Entries outside the
    active block are copied unchanged. Each block keeps its own step size.
    One trace record per sweep.
    """
    if cfg.mode != "coordinate":
        raise RangeError("train_coordinate needs mode='coordinate'")
    _check_data(net, data)
    obj = _Objective(net, data, cfg.betas(net.depth), cfg.l2)
    v = net.flat()
    lrs = {blk: cfg.learning_rate for blk in range(net.depth + 1)}
    state = (v, *obj(v))
    trace = TrainTrace()
    trace.append(0, *state[1:4])
    for sweep in range(1, cfg.sweeps + 1):
        for blk in _blocks(net.depth, cfg.order):
            state, lrs[blk] = _block_steps(obj, state, obj.block(blk), lrs[blk], cfg)
        trace.append(sweep, *state[1:4])
    trace.residual = float(np.abs(state[4]).max(initial=0.0))
    trace.converged = trace.residual < cfg.grad_tol
    return obj.to_stack(state[0]), trace


def train(net, data, cfg):
    if cfg.mode == "backprop":
        return train_backprop(net, data, cfg)
    return train_coordinate(net, data, cfg)


def bits_task(seed, n_bits=12, n_samples=10_000):
    """Random n-bit inputs labelled by a seeded linear threshold split at the median.

    The threshold is the median score over all 2**n_bits patterns, so the
    two classes are balanced over the full input space.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n_bits)
    patterns = ((np.arange(2**n_bits)[:, None] >> np.arange(n_bits)) & 1).astype(np.float64)
    thresh = np.median(patterns @ w)
    x = patterns[rng.integers(0, 2**n_bits, size=n_samples)]
    return SampleSet(x, (x @ w > thresh).astype(np.intp), y_size=2)


def xor_samples():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    return SampleSet(x, np.array([0, 1, 1, 0]), y_size=2)


def config_dict(cfg):
    return asdict(cfg)
