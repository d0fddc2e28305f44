"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``MAXENT_LAB_PURE_PYTHON=1`` to
force the numpy fallback. ``BACKEND`` names whichever one was picked.
"""
import os

import numpy as np

from maxent_lab import _pykernels

try:
    from maxent_lab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("MAXENT_LAB_PURE_PYTHON") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"


accept_step = _pykernels.accept_step


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    return _BACKENDS[name or BACKEND]


def config_probs(t, backend=None):
    return get_backend(backend).config_probs(t)


def me_dual_descent(target, support, omega, lr, max_iters, grad_tol, backend=None):
    return get_backend(backend).me_dual_descent(
        target, support, omega, float(lr), int(max_iters), float(grad_tol)
    )


class StackObjective:
    """Reusable evaluator of a layer-stack objective over fixed data.

    ``widths`` is (n_0, ..., n_L, y_size). Inputs are converted once and a
    scratch buffer is kept between calls.
    """

    def __init__(self, widths, X, y, w, betas, backend=None):
        c = np.ascontiguousarray
        self.impl = get_backend(backend)
        self.widths = c(widths, dtype=np.intp)
        self.X = c(X, dtype=np.float64)
        self.y = c(y, dtype=np.intp)
        self.w = c(w, dtype=np.float64)
        L = len(widths) - 2
        self.betas = c(np.broadcast_to(np.asarray(betas, dtype=np.float64), (L,)))
        self.n_params = sum(
            int(n) * int(m) + int(n) for m, n in zip(widths[:-1], widths[1:])
        )
        self.work = np.empty(self.impl.work_size(self.widths, self.X.shape[0]))
        self._empty = np.empty(0)

    def __call__(self, v, need_grad=True):
        """(loss, ce, reg, err, gradient or None)."""
        v = np.ascontiguousarray(v, dtype=np.float64)
        g = np.empty(self.n_params) if need_grad else self._empty
        loss, ce, reg, err = self.impl.stack_objective(
            v, self.widths, self.X, self.y, self.w, self.betas, g, self.work, need_grad
        )
        return loss, ce, reg, err, (g if need_grad else None)


def softmax_descent(X, y, w, lam0, bias0, lr, max_iters, grad_tol, l2, backend=None):
    c = np.ascontiguousarray
    return get_backend(backend).softmax_descent(
        c(X, dtype=np.float64),
        c(y, dtype=np.intp),
        c(w, dtype=np.float64),
        c(lam0, dtype=np.float64),
        c(bias0, dtype=np.float64),
        float(lr),
        int(max_iters),
        float(grad_tol),
        float(l2),
    )
