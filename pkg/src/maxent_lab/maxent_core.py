"""Original maximum-entropy model and the feature-based softmax model.

The original model's dual is a table of log-linear weights, one per
indicator predicate on an (x, y) cell. The feature-based softmax replaces
those with per-class feature weights and a bias.
"""
from dataclasses import dataclass, asdict

import numpy as np

from maxent_lab import kernels
from maxent_lab.discrete_prob import JointTable, SampleSet
from maxent_lab.errors import DimensionMismatch, NonConvergence, RangeError


@dataclass
class TrainConfig:
    learning_rate: float = 1.0
    max_iters: int = 200_000
    grad_tol: float = 1e-8
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise RangeError("learning_rate must be > 0")
        if self.max_iters < 1:
            raise RangeError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise RangeError("grad_tol must be > 0")
        if self.l2 < 0:
            raise RangeError("l2 must be >= 0")

    def to_json(self):
        return asdict(self)


@dataclass(eq=False)
class MEDualParams:
    """Dual weights omega[x, y].

    Cells pinned to zero probability by the data carry -inf; they serialize
    as null.
    """

    omega: np.ndarray

    def to_json(self):
        return {
            "omega": [[None if np.isneginf(v) else float(v) for v in row] for row in self.omega]
        }

    @classmethod
    def from_json(cls, obj):
        rows = [[-np.inf if v is None else v for v in row] for row in obj["omega"]]
        return cls(np.array(rows, dtype=np.float64).reshape(len(rows), -1))


@dataclass(eq=False)
class SoftmaxParams:
    lam: np.ndarray  # (y_size, n_features)
    bias: np.ndarray  # (y_size,)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.lam.ndim != 2 or self.bias.shape != (self.lam.shape[0],):
            raise DimensionMismatch("lambda must be (y_size, n) and bias (y_size,)")

    @property
    def y_size(self):
        return self.lam.shape[0]

    @property
    def n_features(self):
        return self.lam.shape[1]

    @classmethod
    def zeros(cls, y_size, n_features):
        return cls(np.zeros((y_size, n_features)), np.zeros(y_size))

    def copy(self):
        return SoftmaxParams(self.lam.copy(), self.bias.copy())

    def to_json(self):
        return {"lambda": self.lam.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_json(cls, obj):
        bias = np.asarray(obj["bias"], dtype=np.float64)
        lam = np.asarray(obj["lambda"], dtype=np.float64).reshape(bias.shape[0], -1)
        return cls(lam, bias)


def solve_original_me(joint, cfg=None):
    """Maximize H(Y_hat|X) subject to P(X, Y_hat) = P(X, Y).

    Runs gradient descent on the dual, row by row (each row's gradient is
    divided by P(x), which leaves the optimum unchanged). Cells with
    P(x, y) = 0 in a row of positive mass are fixed at -inf by the
    constraints; rows with P(x) = 0 get the uniform conditional.

    Returns (MEDualParams, conditional table of shape (x_size, y_size)).
    """
    cfg = cfg or TrainConfig(learning_rate=2.0)
    p = joint.probs if isinstance(joint, JointTable) else JointTable(joint).probs
    px = p.sum(axis=1)
    live = px > 0
    omega = np.zeros_like(p)
    cond = np.full_like(p, 1.0 / p.shape[1])

    if np.any(live):
        target = p[live] / px[live, None]
        support = target > 0
        om, iters, resid = kernels.me_dual_descent(
            target, support, np.zeros_like(target), cfg.learning_rate, cfg.max_iters, cfg.grad_tol
        )
        om = np.where(support, om, -np.inf)
        omega[live] = om
        z = om - om.max(axis=1, keepdims=True)
        e = np.exp(z)
        cond[live] = e / e.sum(axis=1, keepdims=True)
        if resid >= cfg.grad_tol:
            raise NonConvergence(
                f"original ME dual did not converge in {iters} iterations",
                resid,
                result=(MEDualParams(omega), cond),
            )
    return MEDualParams(omega), cond


def softmax_predict(params, t):
    """P(y | t) = exp(b(y) + sum_i lambda_i(y) t_i) / Z for one vector or a batch of rows."""
    t = np.asarray(t, dtype=np.float64)
    logits = t @ params.lam.T + params.bias
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def predict_labels(params, t):
    # np.argmax returns the lowest index on ties
    return np.argmax(np.asarray(t, dtype=np.float64) @ params.lam.T + params.bias, axis=-1)


def softmax_objective(params, data, l2=0.0, need_grad=True):
    """Weighted mean NLL + l2 * ||lambda||^2 / 2 and its gradient (g_lambda, g_bias)."""
    obj = kernels.StackObjective(
        [params.n_features, params.y_size], data.inputs, data.labels, data.weights, []
    )
    v = np.concatenate([params.lam.ravel(), params.bias])
    loss, _, _, err, g = obj(v, need_grad)
    loss += 0.5 * l2 * float((params.lam**2).sum())
    if not need_grad:
        return loss, err, None, None
    glam = g[:params.lam.size].reshape(params.lam.shape) + l2 * params.lam
    return loss, err, glam, g[params.lam.size:]


def train_feature_softmax(data, cfg=None, y_size=None):
    """Full-batch gradient descent for the feature-based softmax, starting at zero.

    A step that would raise the loss is rejected and the learning rate
    halved, so accepted losses never increase. On exhausting ``max_iters``
    a NonConvergence carrying the best iterate is raised.
    """
    cfg = cfg or TrainConfig()
    if not isinstance(data, SampleSet):
        raise DimensionMismatch("train_feature_softmax expects a SampleSet")
    y_size = y_size or data.y_size
    if y_size != data.y_size:
        raise DimensionMismatch("y_size disagrees with the sample set")
    lam, bias, _, gmax, _ = kernels.softmax_descent(
        data.inputs,
        data.labels,
        data.weights,
        np.zeros((y_size, data.dim)),
        np.zeros(y_size),
        cfg.learning_rate,
        cfg.max_iters,
        cfg.grad_tol,
        cfg.l2,
    )
    params = SoftmaxParams(lam, bias)
    if gmax < cfg.grad_tol:
        return params
    raise NonConvergence("feature softmax did not converge", gmax, result=params)
