# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-wise kernels; same signatures as ``_kernels_py``."""
import numpy as np
from libc.math cimport exp, log, sqrt


def softmax_fwd(const double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0], k = z.shape[1], i, j
    cdef double mx, s
    out = np.empty((n, k))
    cdef double[:, ::1] o = out
    for i in range(n):
        mx = z[i, 0]
        for j in range(1, k):
            if z[i, j] > mx:
                mx = z[i, j]
        s = 0.0
        for j in range(k):
            o[i, j] = exp(z[i, j] - mx)
            s += o[i, j]
        for j in range(k):
            o[i, j] /= s
    return out


def log_softmax_fwd(const double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0], k = z.shape[1], i, j
    cdef double mx, s, lse
    out = np.empty((n, k))
    cdef double[:, ::1] o = out
    for i in range(n):
        mx = z[i, 0]
        for j in range(1, k):
            if z[i, j] > mx:
                mx = z[i, j]
        s = 0.0
        for j in range(k):
            s += exp(z[i, j] - mx)
        lse = log(s)
        for j in range(k):
            o[i, j] = z[i, j] - mx - lse
    return out


def softmax_bwd(const double[:, ::1] p, const double[:, ::1] g):
    cdef Py_ssize_t n = p.shape[0], k = p.shape[1], i, j
    cdef double dot
    out = np.empty((n, k))
    cdef double[:, ::1] o = out
    for i in range(n):
        dot = 0.0
        for j in range(k):
            dot += g[i, j] * p[i, j]
        for j in range(k):
            o[i, j] = p[i, j] * (g[i, j] - dot)
    return out


def log_softmax_bwd(const double[:, ::1] lp, const double[:, ::1] g):
    cdef Py_ssize_t n = lp.shape[0], k = lp.shape[1], i, j
    cdef double s
    out = np.empty((n, k))
    cdef double[:, ::1] o = out
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += g[i, j]
        for j in range(k):
            o[i, j] = g[i, j] - exp(lp[i, j]) * s
    return out


def l2norm_fwd(const double[:, ::1] x, double eps):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    cdef double s
    out = np.empty((n, k))
    norms = np.empty(n)
    cdef double[:, ::1] o = out
    cdef double[::1] nv = norms
    for i in range(n):
        s = eps
        for j in range(k):
            s += x[i, j] * x[i, j]
        s = sqrt(s)
        nv[i] = s
        for j in range(k):
            o[i, j] = x[i, j] / s
    return out, norms


def l2norm_bwd(const double[:, ::1] y, const double[::1] norms, const double[:, ::1] g):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    cdef double dot
    out = np.empty((n, k))
    cdef double[:, ::1] o = out
    for i in range(n):
        dot = 0.0
        for j in range(k):
            dot += g[i, j] * y[i, j]
        for j in range(k):
            o[i, j] = (g[i, j] - y[i, j] * dot) / norms[i]
    return out


def batchnorm_fwd(const double[:, ::1] x, const double[::1] gamma, const double[::1] beta, double eps):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    cdef double inv_std, d
    out = np.empty((n, k))
    xhat_a = np.empty((n, k))
    mean_a = np.zeros(k)
    var_a = np.zeros(k)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] xh = xhat_a
    cdef double[::1] mean = mean_a
    cdef double[::1] var = var_a
    for i in range(n):
        for j in range(k):
            mean[j] += x[i, j]
    for j in range(k):
        mean[j] /= n
    for i in range(n):
        for j in range(k):
            d = x[i, j] - mean[j]
            var[j] += d * d
    for j in range(k):
        var[j] /= n
    for j in range(k):
        inv_std = 1.0 / sqrt(var[j] + eps)
        for i in range(n):
            xh[i, j] = (x[i, j] - mean[j]) * inv_std
            o[i, j] = xh[i, j] * gamma[j] + beta[j]
    return out, xhat_a, mean_a, var_a


def batchnorm_bwd(const double[:, ::1] g, const double[:, ::1] xhat, const double[::1] var,
                  const double[::1] gamma, double eps):
    cdef Py_ssize_t n = g.shape[0], k = g.shape[1], i, j
    cdef double inv_std, sd, sdx, dxh
    dx_a = np.empty((n, k))
    dgamma_a = np.zeros(k)
    dbeta_a = np.zeros(k)
    cdef double[:, ::1] dx = dx_a
    cdef double[::1] dgamma = dgamma_a
    cdef double[::1] dbeta = dbeta_a
    for j in range(k):
        sd = 0.0
        sdx = 0.0
        for i in range(n):
            dgamma[j] += g[i, j] * xhat[i, j]
            dbeta[j] += g[i, j]
            dxh = g[i, j] * gamma[j]
            sd += dxh
            sdx += dxh * xhat[i, j]
        inv_std = 1.0 / sqrt(var[j] + eps)
        for i in range(n):
            dxh = g[i, j] * gamma[j]
            dx[i, j] = inv_std / n * (n * dxh - sd - xhat[i, j] * sdx)
    return dx_a, dgamma_a, dbeta_a


def adam_update(double[::1] p, const double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, long t, double weight_decay):
    cdef Py_ssize_t n = p.shape[0], i
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double d
    for i in range(n):
        d = g[i] + weight_decay * p[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * d
        v[i] = beta2 * v[i] + (1.0 - beta2) * d * d
        p[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)


def sgd_update(double[::1] p, const double[::1] g, double[::1] buf, double lr,
               double momentum, double weight_decay, bint nesterov):
    cdef Py_ssize_t n = p.shape[0], i
    cdef double d
    for i in range(n):
        d = g[i] + weight_decay * p[i]
        if momentum != 0.0:
            buf[i] = momentum * buf[i] + d
            if nesterov:
                d = d + momentum * buf[i]
            else:
                d = buf[i]
        p[i] -= lr * d
