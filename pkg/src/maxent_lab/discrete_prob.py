"""Exact probability tables over finite alphabets.

All information quantities are in nats. The convention 0 ln 0 = 0 is used
throughout, and computed mutual informations are clamped at zero from below.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from maxent_lab import kernels
from maxent_lab.errors import (
    DimensionMismatch,
    EmptySample,
    NegativeEntry,
    NotNormalized,
    RangeError,
    TooManyFeatures,
    ValidationError,
)

NORM_TOL = 1e-12
MAX_FEATURES = 16
DEFAULT_BINS = 30


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_distribution(p):
    if np.any(p < 0):
        raise NegativeEntry(f"negative probability {p.min()!r}")
    s = float(p.sum())
    if abs(s - 1.0) > NORM_TOL:
        raise NotNormalized(f"entries sum to {s!r}, not 1")


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError("alphabet size must be >= 1")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise ValidationError("labels length must equal size")
            if len(set(self.labels)) != self.size:
                raise ValidationError("labels must be unique")
            object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense joint distribution over two or three finite variables."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim not in (2, 3):
            raise ValidationError(f"joint table must have rank 2 or 3, got {p.ndim}")
        if 0 in p.shape:
            raise ValidationError("every dimension needs at least one symbol")
        _check_distribution(p)
        object.__setattr__(self, "probs", p)

    @property
    def dims(self):
        return self.probs.shape

    @property
    def rank(self):
        return self.probs.ndim

    def marginal(self, axes):
        """Marginal over the kept ``axes`` (tuple of dimension indices)."""
        axes = tuple(axes)
        drop = tuple(i for i in range(self.rank) if i not in axes)
        return self.probs.sum(axis=drop)

    def to_json(self):
        return {"dims": list(self.dims), "probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, obj):
        probs = np.asarray(obj["probs"], dtype=np.float64)
        if list(probs.shape) != list(obj.get("dims", probs.shape)):
            raise DimensionMismatch("dims do not match probs shape")
        return cls(probs)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Per-feature activation probabilities t[x, i] = P(T_i = 1 | X = x).

    Features are conditionally independent given X by construction.
    """

    t: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t)
        if t.ndim != 2:
            raise ValidationError("feature table must be 2-D (x_size, n_features)")
        if t.shape[0] < 1:
            raise ValidationError("feature table needs at least one input symbol")
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
            raise RangeError("feature confidences must lie in [0, 1]")
        object.__setattr__(self, "t", t)

    @property
    def x_size(self):
        return self.t.shape[0]

    @property
    def n_features(self):
        return self.t.shape[1]

    def to_json(self):
        return {"x_size": self.x_size, "n_features": self.n_features, "t": self.t.tolist()}

    @classmethod
    def from_json(cls, obj):
        t = np.asarray(obj["t"], dtype=np.float64).reshape(obj["x_size"], obj["n_features"])
        return cls(t)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Rows of (input vector, label index), optionally weighted.

    Without explicit weights every row counts 1/n. Weighted sets let the
    trainers fit an exact joint table without sampling noise.
    """

    inputs: np.ndarray
    labels: np.ndarray
    y_size: int
    weights: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.labels, dtype=np.intp)
        if x.ndim != 2 or y.ndim != 1:
            raise DimensionMismatch("inputs must be 2-D and labels 1-D")
        if x.shape[0] == 0:
            raise EmptySample("sample set is empty")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch("inputs and labels differ in length")
        if self.y_size < 1 or np.any(y < 0) or np.any(y >= self.y_size):
            raise RangeError("label index outside the label alphabet")
        if self.weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.array(self.weights, dtype=np.float64)
            if w.shape != y.shape:
                raise DimensionMismatch("weights and labels differ in length")
            if np.any(w < 0):
                raise NegativeEntry("negative sample weight")
            w = w / w.sum()
        for name, v in (("inputs", x), ("labels", y), ("weights", w)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @classmethod
    def from_joint(cls, joint, features):
        """Expectation-weighted rows (t(x), y) with weight P(x, y) for each nonzero cell."""
        p = joint.probs
        xs, ys = np.nonzero(p > 0)
        return cls(features.t[xs], ys, y_size=p.shape[1], weights=p[xs, ys])


def _as_probs(p):
    p = np.asarray(p.probs if isinstance(p, JointTable) else p, dtype=np.float64)
    _check_distribution(p)
    return p


def _plogp_sum(p):
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def entropy(p):
    """Shannon entropy in nats of a distribution (any shape, summed over all cells)."""
    p = _as_probs(p)
    h = _plogp_sum(p)
    return max(h, 0.0)


def mutual_information(j):
    """I(A;B) of a rank-2 joint table."""
    p = _as_probs(j)
    if p.ndim != 2:
        raise ValidationError("mutual_information needs a rank-2 table")
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    nz = p > 0
    outer = (pa * pb)[nz]
    val = float((p[nz] * np.log(p[nz] / outer)).sum())
    return max(val, 0.0)


def conditional_mutual_information(j, conditioned_dim):
    """I(A;B|C) for a rank-3 table, C being the axis ``conditioned_dim``.

    Equal to the p(c)-weighted MI of each renormalized slice; zero-mass
    slices contribute nothing.
    """
    p = _as_probs(j)
    if p.ndim != 3:
        raise ValidationError("conditional_mutual_information needs a rank-3 table")
    if conditioned_dim not in (0, 1, 2):
        raise RangeError("conditioned_dim must be 0, 1 or 2")
    p = np.moveaxis(p, conditioned_dim, 2)
    pc = p.sum(axis=(0, 1), keepdims=True)
    pac = p.sum(axis=1, keepdims=True)
    pbc = p.sum(axis=0, keepdims=True)
    nz = p > 0
    num = (p * pc)[nz]
    den = (pac * pbc)[nz]
    val = float((p[nz] * np.log(num / den)).sum())
    return max(val, 0.0)


def induce_triple(j, f):
    """P(X, T, Y) = P(X, Y) * prod_i Bernoulli(t_i(x)) over all 2**n configurations of T."""
    p = j.probs if isinstance(j, JointTable) else np.asarray(j, dtype=np.float64)
    if p.ndim != 2:
        raise ValidationError("induce_triple needs a rank-2 joint P(X, Y)")
    if f.n_features > MAX_FEATURES:
        raise TooManyFeatures(f"{f.n_features} features exceed the cap of {MAX_FEATURES}")
    if f.x_size != p.shape[0]:
        raise DimensionMismatch(f"feature map covers {f.x_size} inputs, joint has {p.shape[0]}")
    q = kernels.config_probs(f.t)
    return JointTable(p[:, None, :] * q[:, :, None])


def bin_codes(values, bins=DEFAULT_BINS):
    """Equal-width binning of each column over [0, 1]; one integer code per row.

    Columns outside [0, 1] are min-max rescaled first. A value exactly on a
    bin edge goes to the lower bin.
    """
    v = np.array(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] == 0:
        raise EmptySample("no samples to bin")
    if bins < 2:
        raise RangeError("bins must be >= 2")
    lo, hi = v.min(axis=0), v.max(axis=0)
    out = (lo < 0) | (hi > 1)
    if np.any(out):
        span = np.where(hi > lo, hi - lo, 1.0)
        v[:, out] = (v[:, out] - lo[out]) / span[out]
    idx = np.clip(np.ceil(v * bins).astype(np.int64) - 1, 0, bins - 1)
    return _row_codes(idx)


def _row_codes(idx):
    # compact integer label per distinct row
    _, codes = np.unique(idx, axis=0, return_inverse=True)
    return codes.reshape(-1)


def _discrete_mi(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    counts = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(counts, (ai.reshape(-1), bi.reshape(-1)), 1.0)
    return mutual_information(counts / counts.sum())


def binned_mi(xs, ys, bins=DEFAULT_BINS, ys_discrete=False):
    """Plug-in MI between binned samples ``xs`` and ``ys``.

    With ``ys_discrete`` the second argument is treated as labels and not binned.
    """
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise EmptySample("empty sample")
    if xs.shape[0] != ys.shape[0]:
        raise DimensionMismatch("samples differ in length")
    a = bin_codes(xs, bins)
    if ys_discrete:
        b = ys.reshape(ys.shape[0], -1)
        b = _row_codes(b)
    else:
        b = bin_codes(ys, bins)
    return _discrete_mi(a, b)


def empirical_entropy(codes):
    _, counts = np.unique(np.asarray(codes).reshape(len(codes), -1), axis=0, return_counts=True)
    return entropy(counts / counts.sum())
