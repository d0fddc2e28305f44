# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same contracts as ``_pykernels``."""
import numpy as np

from libc.math cimport exp, fabs, log, log1p
from scipy.linalg.cython_blas cimport dgemm


# Row-major helpers on top of column-major BLAS.

cdef void _gemm_nt(int N, int m, int n, const double* A, const double* W,
                   double* out) noexcept nogil:
    # out (N x n) = A (N x m) @ W.T, W is (n x m)
    cdef char ta = b'T', tb = b'N'
    cdef double one = 1.0, zero = 0.0
    cdef Py_ssize_t i
    if N == 0 or n == 0:
        return
    if m == 0:
        for i in range(N * n):
            out[i] = 0.0
        return
    dgemm(&ta, &tb, &n, &N, &m, &one, <double*>W, &m, <double*>A, &m, &zero, out, &n)


cdef void _gemm_tn(int N, int n, int m, const double* D, const double* A,
                   double* out) noexcept nogil:
    # out (n x m) = D.T @ A, D is (N x n), A is (N x m)
    cdef char ta = b'N', tb = b'T'
    cdef double one = 1.0, zero = 0.0
    if n == 0 or m == 0:
        return
    dgemm(&ta, &tb, &m, &n, &N, &one, <double*>A, &m, <double*>D, &n, &zero, out, &m)


cdef void _gemm_nn(int N, int n, int m, const double* D, const double* W,
                   double* out) noexcept nogil:
    # out (N x m) = D (N x n) @ W (n x m)
    cdef char ta = b'N', tb = b'N'
    cdef double one = 1.0, zero = 0.0
    cdef Py_ssize_t i
    if m == 0 or N == 0:
        return
    if n == 0:
        for i in range(N * m):
            out[i] = 0.0
        return
    dgemm(&ta, &tb, &m, &N, &n, &one, <double*>W, &m, <double*>D, &n, &zero, out, &m)


def config_probs(t):
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t xs = tv.shape[0], n = tv.shape[1]
    cdef Py_ssize_t nc = (<Py_ssize_t>1) << n
    out = np.empty((xs, nc))
    cdef double[:, ::1] q = out
    cdef Py_ssize_t x, c, i
    cdef double v
    for x in range(xs):
        for c in range(nc):
            v = 1.0
            for i in range(n):
                if (c >> i) & 1:
                    v *= tv[x, i]
                else:
                    v *= 1.0 - tv[x, i]
            q[x, c] = v
    return out


def me_dual_descent(target, support, omega, double lr, long max_iters,
                    double grad_tol):
    cdef const double[:, ::1] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef const unsigned char[:, ::1] sp = np.ascontiguousarray(support, dtype=np.uint8)
    out = np.array(omega, dtype=np.float64, order="C")
    cdef double[:, ::1] om = out
    cdef Py_ssize_t rows = tg.shape[0], cols = tg.shape[1]
    g_arr = np.zeros((rows, cols))
    cdef double[:, ::1] g = g_arr
    cdef Py_ssize_t r, c
    cdef long it = 0
    cdef double mx, s, gmax, d
    with nogil:
        while True:
            gmax = 0.0
            for r in range(rows):
                mx = -1e308
                for c in range(cols):
                    if sp[r, c] and om[r, c] > mx:
                        mx = om[r, c]
                s = 0.0
                for c in range(cols):
                    if sp[r, c]:
                        g[r, c] = exp(om[r, c] - mx)
                        s += g[r, c]
                for c in range(cols):
                    if sp[r, c]:
                        d = g[r, c] / s - tg[r, c]
                        g[r, c] = d
                        if fabs(d) > gmax:
                            gmax = fabs(d)
            if gmax < grad_tol or it >= max_iters:
                break
            for r in range(rows):
                for c in range(cols):
                    if sp[r, c]:
                        om[r, c] -= lr * g[r, c]
            it += 1
    return out, it, gmax


def work_size(widths, Py_ssize_t N):
    cdef Py_ssize_t total = 0, mx = 0, k
    for k in range(1, len(widths)):
        total += 2 * N * widths[k]
        mx = max(mx, widths[k - 1], widths[k])
    return total + 2 * N * mx


def stack_objective(const double[::1] v, const Py_ssize_t[::1] widths,
                    const double[:, ::1] X, const Py_ssize_t[::1] y,
                    const double[::1] w, const double[::1] betas,
                    double[::1] g, double[::1] work, bint need_grad=True):
    """Flat-vector objective; see ``_pykernels.stack_objective``."""
    cdef Py_ssize_t L = widths.shape[0] - 2
    cdef Py_ssize_t N = X.shape[0], Y = widths[L + 1]
    cdef Py_ssize_t l, n, i, k, m, width, best, po, wo, mxw = 0
    cdef double z, a, e, s, hsum, hl, mx, lse, beta
    cdef double reg = 0.0, penalty = 0.0, ce = 0.0, err = 0.0
    cdef const double* inp
    cdef double* Z
    cdef double* A
    cdef double* D
    cdef double* Dn
    cdef Py_ssize_t param_off[66]
    cdef Py_ssize_t z_off[66]
    if L + 1 > 64:
        raise ValueError("at most 64 layers")
    if work.shape[0] < work_size(widths, N):
        raise ValueError("work buffer too small")

    po = 0
    wo = 0
    for l in range(L + 1):
        param_off[l] = po
        po += widths[l + 1] * widths[l] + widths[l + 1]
        z_off[l] = wo
        wo += 2 * N * widths[l + 1]
        mxw = max(mxw, widths[l], widths[l + 1])
    if v.shape[0] != po or (need_grad and g.shape[0] != po):
        raise ValueError("parameter vector has the wrong length")

    with nogil:
        # forward
        for l in range(L + 1):
            m = widths[l]
            width = widths[l + 1]
            inp = &X[0, 0] if l == 0 and N * m > 0 else (&work[z_off[l - 1] + N * widths[l]] if l > 0 else NULL)
            Z = &work[z_off[l]]
            A = Z + N * width
            _gemm_nt(<int>N, <int>m, <int>width, inp, &v[param_off[l]], Z)
            if l < L:
                hl = 0.0
                for n in range(N):
                    hsum = 0.0
                    for i in range(width):
                        z = Z[n * width + i] + v[param_off[l] + width * m + i]
                        Z[n * width + i] = z
                        # binary entropy of sigmoid(z) is softplus(z) - z * sigmoid(z)
                        e = exp(-fabs(z))
                        if z >= 0:
                            a = 1.0 / (1.0 + e)
                            hsum += z + log1p(e) - a * z
                        else:
                            a = e / (1.0 + e)
                            hsum += log1p(e) - a * z
                        A[n * width + i] = a
                    hl += w[n] * hsum
                reg += hl
                penalty += betas[l] * hl
            else:
                for n in range(N):
                    mx = -1e308
                    best = 0
                    for k in range(Y):
                        Z[n * Y + k] += v[param_off[l] + Y * m + k]
                        if Z[n * Y + k] > mx:
                            mx = Z[n * Y + k]
                            best = k
                    ce -= w[n] * (Z[n * Y + y[n]] - mx)
                    s = 0.0
                    for k in range(Y):
                        Z[n * Y + k] = exp(Z[n * Y + k] - mx)
                        s += Z[n * Y + k]
                    ce += w[n] * log(s)
                    if best != y[n]:
                        err += w[n]
                    if need_grad:
                        for k in range(Y):
                            Z[n * Y + k] /= s
                        Z[n * Y + y[n]] -= 1.0
                        for k in range(Y):
                            Z[n * Y + k] *= w[n]

        if need_grad:
            D = &work[z_off[L]]
            for l in range(L, -1, -1):
                m = widths[l]
                width = widths[l + 1]
                inp = &X[0, 0] if l == 0 and N * m > 0 else (&work[z_off[l - 1] + N * widths[l]] if l > 0 else NULL)
                if l < L:
                    Z = &work[z_off[l]]
                    A = Z + N * width
                    beta = betas[l]
                    for n in range(N):
                        for i in range(width):
                            a = A[n * width + i]
                            s = a * (1.0 - a)
                            D[n * width + i] = D[n * width + i] * s + beta * w[n] * Z[n * width + i] * s
                if m > 0:
                    _gemm_tn(<int>N, <int>width, <int>m, D, inp, &g[param_off[l]])
                for i in range(width):
                    g[param_off[l] + width * m + i] = 0.0
                for n in range(N):
                    for i in range(width):
                        g[param_off[l] + width * m + i] += D[n * width + i]
                if l > 0:
                    # ping-pong between the two delta buffers
                    Dn = &work[wo + N * mxw] if D == &work[wo] else &work[wo]
                    _gemm_nn(<int>N, <int>width, <int>m, D, &v[param_off[l]], Dn)
                    D = Dn
    return ce - penalty, ce, reg, err


cdef double _softmax_eval(const double[:, ::1] X, const Py_ssize_t[::1] y,
                          const double[::1] w, double[:, ::1] lam, double[::1] bias,
                          double l2, double[:, ::1] glam, double[::1] gbias,
                          double[::1] buf) noexcept nogil:
    cdef Py_ssize_t N = X.shape[0], d = X.shape[1], Y = lam.shape[0]
    cdef Py_ssize_t n, k, i
    cdef double loss = 0.0, mx, s, lse, v
    glam[:, :] = 0.0
    gbias[:] = 0.0
    for n in range(N):
        mx = -1e308
        for k in range(Y):
            v = bias[k]
            for i in range(d):
                v += lam[k, i] * X[n, i]
            buf[k] = v
            if v > mx:
                mx = v
        loss -= w[n] * (buf[y[n]] - mx)
        s = 0.0
        for k in range(Y):
            buf[k] = exp(buf[k] - mx)
            s += buf[k]
        loss += w[n] * log(s)
        for k in range(Y):
            v = buf[k] / s
            if k == y[n]:
                v -= 1.0
            v *= w[n]
            gbias[k] += v
            for i in range(d):
                glam[k, i] += v * X[n, i]
    if l2 > 0:
        for k in range(Y):
            for i in range(d):
                loss += 0.5 * l2 * lam[k, i] * lam[k, i]
                glam[k, i] += l2 * lam[k, i]
    return loss


cdef double _gmax(double[:, ::1] glam, double[::1] gbias) noexcept nogil:
    cdef double g = 0.0
    cdef Py_ssize_t k, i
    for k in range(glam.shape[0]):
        if fabs(gbias[k]) > g:
            g = fabs(gbias[k])
        for i in range(glam.shape[1]):
            if fabs(glam[k, i]) > g:
                g = fabs(glam[k, i])
    return g


cdef double TIE_RTOL = 8 * 2.220446049250313e-16


cdef inline bint _accept(double loss, double tloss, double gmax, double tgmax) noexcept nogil:
    # a rise within rounding noise counts as a tie, broken by the gradient norm
    if tloss < loss:
        return True
    return tloss <= loss + TIE_RTOL * fabs(loss) and tgmax < gmax


def softmax_descent(X, y, w, lam0, bias0, double lr, long max_iters,
                    double grad_tol, double l2):
    cdef const double[:, ::1] Xv = X
    cdef const Py_ssize_t[::1] yv = y
    cdef const double[::1] wv = w
    cdef Py_ssize_t Y = lam0.shape[0], d = lam0.shape[1], k, i
    lam_a = np.array(lam0, dtype=np.float64, order="C")
    bias_a = np.array(bias0, dtype=np.float64)
    tlam_a = np.empty_like(lam_a)
    tbias_a = np.empty_like(bias_a)
    cdef double[:, ::1] lam = lam_a, tlam = tlam_a
    cdef double[::1] bias = bias_a, tbias = tbias_a
    cdef double[:, ::1] glam = np.empty_like(lam_a), tglam = np.empty_like(lam_a)
    cdef double[::1] gbias = np.empty_like(bias_a), tgbias = np.empty_like(bias_a)
    cdef double[::1] buf = np.empty(Y)
    cdef double loss, tloss, gmax
    cdef long it = 0
    with nogil:
        loss = _softmax_eval(Xv, yv, wv, lam, bias, l2, glam, gbias, buf)
        while True:
            gmax = _gmax(glam, gbias)
            if gmax < grad_tol or it >= max_iters or lr < 1e-300:
                break
            for k in range(Y):
                tbias[k] = bias[k] - lr * gbias[k]
                for i in range(d):
                    tlam[k, i] = lam[k, i] - lr * glam[k, i]
            tloss = _softmax_eval(Xv, yv, wv, tlam, tbias, l2, tglam, tgbias, buf)
            if _accept(loss, tloss, gmax, _gmax(tglam, tgbias)):
                lam[:, :] = tlam
                bias[:] = tbias
                glam[:, :] = tglam
                gbias[:] = tgbias
                loss = tloss
            else:
                lr *= 0.5
            it += 1
    return lam_a, bias_a, it, gmax, loss
