"""Compare the compiled and numpy backends on the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table shows
the best-of-N wall time per call, the speedup, and the largest absolute
difference between the two results.
"""
import argparse
import time

import numpy as np

from maxent_lab import kernels
from maxent_lab.equivalence_lab import generate_equiv_instance
from maxent_lab.discrete_prob import SampleSet
from maxent_lab.recursive_net import bits_task, init_stack


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def stack_case():
    data = bits_task(0)
    net = init_stack([data.dim, 8, 4], data.y_size, 0)
    widths = list(net.widths) + [net.y_size]
    v = net.flat()

    def make(backend):
        obj = kernels.StackObjective(widths, data.inputs, data.labels, data.weights, 0.1, backend)
        return lambda: obj(v)[4].copy()

    return "stack objective+grad (12-bit, 10k rows)", make


def softmax_case():
    inst = generate_equiv_instance(7, 6, 4)
    data = SampleSet.from_joint(inst.joint, inst.features)
    k, y = data.dim, data.y_size

    def make(backend):
        return lambda: kernels.softmax_descent(
            data.inputs, data.labels, data.weights, np.zeros((y, k)), np.zeros(y),
            1.0, 2000, 0.0, 0.0, backend=backend,
        )[0]

    return "softmax descent (2000 steps, 6 features)", make


def me_case():
    rng = np.random.default_rng(0)
    target = rng.dirichlet(np.ones(4), size=64)
    support = target > 0

    def make(backend):
        return lambda: kernels.me_dual_descent(
            target, support, np.zeros_like(target), 2.0, 2000, 0.0, backend=backend
        )[0]

    return "ME dual descent (2000 steps, 64x4)", make


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':44s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for case in (stack_case, softmax_case, me_case):
        name, make = case()
        t_py, r_py = best_of(make("python"), args.repeat)
        if "cython" in backends:
            t_c, r_c = best_of(make("cython"), args.repeat)
            diff = float(np.max(np.abs(r_py - r_c)))
            print(f"{name:44s} {1e3 * t_py:10.2f} {1e3 * t_c:10.2f} {t_py / t_c:7.1f}x {diff:10.1e}")
        else:
            print(f"{name:44s} {1e3 * t_py:10.2f} {'-':>10s}")


if __name__ == "__main__":
    main()
