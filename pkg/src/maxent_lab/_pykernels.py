"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` function for function and are used when the
compiled extension is unavailable (or ``MAXENT_LAB_PURE_PYTHON=1``).
"""
import numpy as np
from scipy.special import expit


def config_probs(t):
    """P(T = c | X = x) for every configuration c of n independent bits.

    Configuration index c has bit i set iff feature i is on.
    Returns an array of shape (x_size, 2**n).
    """
    t = np.asarray(t, dtype=np.float64)
    q = np.ones((t.shape[0], 1))
    for i in range(t.shape[1]):
        ti = t[:, i:i + 1]
        q = np.concatenate([q * (1.0 - ti), q * ti], axis=1)
    return q


def me_dual_descent(target, support, omega, lr, max_iters, grad_tol):
    """Row-wise gradient descent on the log-linear dual of the original ME model.

    Only cells in ``support`` are free; the rest are pinned at zero
    probability. Returns (omega, iterations, final gradient max-norm).
    """
    target = np.asarray(target, dtype=np.float64)
    support = np.asarray(support, dtype=bool)
    omega = np.array(omega, dtype=np.float64)
    it = 0
    while True:
        z = np.where(support, omega, -np.inf)
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        g = np.where(support, p - target, 0.0)
        gmax = float(np.abs(g).max()) if g.size else 0.0
        if gmax < grad_tol or it >= max_iters:
            return omega, it, gmax
        omega -= lr * g
        it += 1


TIE_RTOL = 8 * np.finfo(np.float64).eps


def accept_step(loss, tloss, gmax, tgmax):
    """Accept a trial step that lowers the loss.

    A rise within rounding noise of ``loss`` counts as a tie and is accepted
    only if it shrinks the gradient max-norm, so descent can continue after
    loss differences drop below float resolution.
    """
    if tloss < loss:
        return True
    return tloss <= loss + TIE_RTOL * abs(loss) and tgmax < gmax


def _softplus(z):
    return np.logaddexp(0.0, z)


def stack_value_grad(Ws, bs, lam, bias, X, y, w, betas, need_grad=True):
    """Loss and gradients of a sigmoid layer stack with a softmax head.

    ``w`` holds per-row weights summing to one. The loss is weighted
    cross-entropy minus, for each layer l, ``betas[l]`` times the summed
    binary entropy of that layer's units. ``reg`` is the unweighted total
    entropy. Returns
    (loss, ce, reg, err, gWs, gbs, glam, gbias); gradients are None when
    ``need_grad`` is false.
    """
    acts = [X]
    zs = []
    reg = 0.0
    penalty = 0.0
    for W, b, beta in zip(Ws, bs, betas):
        z = acts[-1] @ W.T + b
        a = expit(z)
        # binary entropy of sigmoid(z) is softplus(z) - z * sigmoid(z)
        h = _softplus(z) - a * z
        hl = float(w @ h.sum(axis=1))
        reg += hl
        penalty += beta * hl
        zs.append(z)
        acts.append(a)
    top = acts[-1]
    logits = top @ lam.T + bias
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(X.shape[0])
    ce = float(w @ (lse - shifted[rows, y]))
    wrong = np.argmax(logits, axis=1) != y
    err = float(w @ wrong)
    loss = ce - penalty
    if not need_grad:
        return loss, ce, reg, err, None, None, None, None

    p = np.exp(shifted - lse[:, None])
    p[rows, y] -= 1.0
    d = p * w[:, None]
    glam = d.T @ top
    gbias = d.sum(axis=0)
    da = d @ lam
    gWs = [None] * len(Ws)
    gbs = [None] * len(Ws)
    for l in range(len(Ws) - 1, -1, -1):
        a = acts[l + 1]
        s = a * (1.0 - a)
        dz = da * s + betas[l] * (w[:, None] * zs[l]) * s
        gWs[l] = dz.T @ acts[l]
        gbs[l] = dz.sum(axis=0)
        if l > 0:
            da = dz @ Ws[l]
    return loss, ce, reg, err, gWs, gbs, glam, gbias


def _softmax_eval(X, y, w, lam, bias, l2):
    logits = X @ lam.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(X.shape[0])
    loss = float(w @ (lse - shifted[rows, y]))
    p = np.exp(shifted - lse[:, None])
    p[rows, y] -= 1.0
    p *= w[:, None]
    glam = p.T @ X
    gbias = p.sum(axis=0)
    if l2 > 0:
        loss += 0.5 * l2 * float((lam**2).sum())
        glam = glam + l2 * lam
    return loss, glam, gbias


def softmax_descent(X, y, w, lam0, bias0, lr, max_iters, grad_tol, l2):
    """Full-batch gradient descent for a softmax over fixed features.

    A trial step that raises the loss is rejected and the step size
    halved (see ``accept_step`` for ties at rounding level). Returns (lam, bias, iterations, final gradient max-norm, loss).
    """
    lam = np.array(lam0, dtype=np.float64)
    bias = np.array(bias0, dtype=np.float64)
    loss, glam, gbias = _softmax_eval(X, y, w, lam, bias, l2)
    it = 0
    while True:
        gmax = max(np.abs(glam).max(initial=0.0), np.abs(gbias).max(initial=0.0))
        if gmax < grad_tol or it >= max_iters or lr < 1e-300:
            return lam, bias, it, gmax, loss
        tlam = lam - lr * glam
        tbias = bias - lr * gbias
        tloss, tglam, tgbias = _softmax_eval(X, y, w, tlam, tbias, l2)
        tgmax = max(np.abs(tglam).max(initial=0.0), np.abs(tgbias).max(initial=0.0))
        if accept_step(loss, tloss, gmax, tgmax):
            lam, bias, glam, gbias, loss = tlam, tbias, tglam, tgbias, tloss
        else:
            lr *= 0.5
        it += 1


def work_size(widths, N):
    return 0


def unpack(v, widths):
    """Split a flat vector into (Ws, bs) over widths (n_0, ..., n_L, y_size).

    The last (W, b) pair is the softmax head.
    """
    Ws, bs, k = [], [], 0
    for m, n in zip(widths[:-1], widths[1:]):
        Ws.append(v[k:k + n * m].reshape(n, m))
        k += n * m
        bs.append(v[k:k + n])
        k += n
    return Ws, bs


def stack_objective(v, widths, X, y, w, betas, g, work, need_grad=True):
    """Objective of a sigmoid stack + softmax head over a flat parameter vector.

    Parameter layout: W_1, b_1, ..., W_L, b_L, head lambda, head bias
    (row-major). The gradient is written into ``g``; ``work`` is scratch
    space for the compiled backend and ignored here. Returns
    (loss, ce, reg, err).
    """
    Ws, bs = unpack(np.asarray(v), list(widths))
    out = stack_value_grad(Ws[:-1], bs[:-1], Ws[-1], bs[-1], X, y, w, betas, need_grad)
    if need_grad:
        gWs, gbs, glam, gbias = out[4:]
        parts = [p.ravel() for gW, gb in zip(gWs, gbs) for p in (gW, gb)]
        g[:] = np.concatenate(parts + [glam.ravel(), gbias.ravel()])
    return out[:4]
