"""Information-plane tracking and the exact-table IB check.

On trained continuous stacks the plane is estimated by binning and only
bounded-checked; the exact statements are checked on discrete instances.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import List

import numpy as np

from maxent_lab.discrete_prob import (
    DEFAULT_BINS,
    binned_mi,
    entropy,
    induce_triple,
    mutual_information,
)
from maxent_lab.errors import EmptySample, RangeError
from maxent_lab.recursive_net import forward

DEFAULT_SCHEDULE = (0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)


@dataclass(frozen=True)
class InfoPlanePoint:
    epoch: int
    layer: int
    i_xt: float
    i_ty: float


@dataclass
class Trajectory:
    points: List[InfoPlanePoint] = field(default_factory=list)
    bins: int = DEFAULT_BINS
    n_samples: int = 0
    seed: int = 0

    CSV_HEADER = ("epoch", "layer", "i_xt_nats", "i_ty_nats", "bins", "n_samples", "seed")

    def layers(self):
        return sorted({p.layer for p in self.points})

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for p in self.points:
            w.writerow(
                (p.epoch, p.layer, repr(p.i_xt), repr(p.i_ty), self.bins, self.n_samples, self.seed)
            )
        return buf.getvalue()


def schedule(max_epoch, base=DEFAULT_SCHEDULE):
    """Default snapshot epochs up to and including ``max_epoch``."""
    out = [e for e in base if e <= max_epoch]
    if not out or out[-1] != max_epoch:
        out.append(max_epoch)
    return out


def _subsample(data, n_samples, seed):
    if n_samples is None or n_samples >= data.n:
        return data.inputs, data.labels
    idx = np.sort(np.random.default_rng(seed).choice(data.n, size=n_samples, replace=False))
    return data.inputs[idx], data.labels[idx]


def track(snapshots, data, bins=DEFAULT_BINS, n_samples=None, seed=0):
    """Binned I(X;T_l) and I(T_l;Y) for every (epoch, stack) snapshot and hidden layer.

    Inputs and activations are binned; labels are used as is. With
    ``n_samples`` below the data size a seeded subsample is drawn once and
    shared by all snapshots.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise EmptySample("no snapshots to track")
    if bins < 2:
        raise RangeError("bins must be >= 2")
    x, y = _subsample(data, n_samples, seed)
    points = []
    for epoch, net in sorted(snapshots, key=lambda s: s[0]):
        acts, _ = forward(net, x)
        for layer, a in enumerate(acts, start=1):
            points.append(
                InfoPlanePoint(
                    int(epoch),
                    layer,
                    binned_mi(x, a, bins),
                    binned_mi(a, y, bins, ys_discrete=True),
                )
            )
    return Trajectory(points, bins=bins, n_samples=int(x.shape[0]), seed=int(seed))


def verify_ib_corollary(inst, solved=None):
    """Exact I(T;Y), I(X;Y), their gap, and I(X;T) on the induced triple.

    ``solved`` (the ME conditional) is accepted for symmetry with the
    equivalence check; the quantities here depend only on the instance.
    """
    tri = induce_triple(inst.joint, inst.features)
    i_ty = mutual_information(tri.marginal((1, 2)))
    i_xy = mutual_information(inst.joint)
    return {
        "i_ty": i_ty,
        "i_xy": i_xy,
        "gap": abs(i_ty - i_xy),
        "i_xt": mutual_information(tri.marginal((0, 1))),
    }


def label_entropy(labels):
    _, counts = np.unique(labels, return_counts=True)
    return entropy(counts / counts.sum())


# -- SVG -----------------------------------------------------------------

_W, _H, _PAD = 640, 480, 56
_RAMP = ((0x31, 0x36, 0x95), (0xd7, 0x30, 0x27))
_STROKES = ("#4d4d4d", "#1b7837", "#762a83", "#b35806", "#2166ac", "#8c510a")


def _fmt(v):
    return f"{v:.2f}"


def _ramp(frac):
    r, g, b = (round(a + (c - a) * frac) for a, c in zip(*_RAMP))
    return f"#{r:02x}{g:02x}{b:02x}"


def plane_svg(traj):
    """Self-contained SVG: x = I(X;T), y = I(T;Y), one polyline per layer, epoch as color."""
    if not traj.points:
        raise EmptySample("empty trajectory")
    xmax = max(max(p.i_xt for p in traj.points), 1e-9) * 1.05
    ymax = max(max(p.i_ty for p in traj.points), 1e-9) * 1.05
    epochs = sorted({p.epoch for p in traj.points})
    rank = {e: i / max(len(epochs) - 1, 1) for i, e in enumerate(epochs)}

    def sx(v):
        return _PAD + (_W - 2 * _PAD) * v / xmax

    def sy(v):
        return _H - _PAD - (_H - 2 * _PAD) * v / ymax

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="#000000"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="#000000"/>',
        f'<text x="{_W / 2:.0f}" y="{_H - 16}" text-anchor="middle" font-size="14">I(X;T) [nats]</text>',
        f'<text x="18" y="{_H / 2:.0f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {_H / 2:.0f})">I(T;Y) [nats]</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 16}" font-size="11">0</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="end" font-size="11">{xmax:.3g}</text>',
        f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end" font-size="11">{ymax:.3g}</text>',
    ]
    for k, layer in enumerate(traj.layers()):
        pts = sorted((p for p in traj.points if p.layer == layer), key=lambda p: p.epoch)
        if len(pts) >= 2:
            coords = " ".join(f"{_fmt(sx(p.i_xt))},{_fmt(sy(p.i_ty))}" for p in pts)
            out.append(
                f'<polyline class="layer" data-layer="{layer}" points="{coords}" fill="none" '
                f'stroke="{_STROKES[k % len(_STROKES)]}" stroke-width="1.5"/>'
            )
    for p in traj.points:
        out.append(
            f'<circle class="marker" cx="{_fmt(sx(p.i_xt))}" cy="{_fmt(sy(p.i_ty))}" r="4" '
            f'fill="{_ramp(rank[p.epoch])}"><title>epoch {p.epoch} layer {p.layer}</title></circle>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plane_svg(traj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(plane_svg(traj))
    return path
