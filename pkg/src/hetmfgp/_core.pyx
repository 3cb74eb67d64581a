# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quadrature kernels for the thermal models.

Both kernels take pre-scaled nodes and weights and return the raw quadrature
sum per field point; prefactors and T_0 are applied by the caller.  A point
whose sum is not finite is reported through ``bad`` (index, or -1).
"""
import numpy as np

from libc.math cimport exp, sqrt, isfinite


def lf_sum(const double[:, ::1] pts, const double[::1] tau,
           const double[::1] wq, double a, double sigma2, double v):
    cdef Py_ssize_t n = pts.shape[0], m = tau.shape[0], i, j
    cdef double x, y, z, s, d, t, xs
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            x = pts[i, 0]
            y = pts[i, 1]
            z = pts[i, 2]
            s = 0.0
            for j in range(m):
                t = tau[j]
                d = 2.0 * a * t + sigma2
                xs = x + v * t
                s = s + wq[j] / d * exp(-(xs * xs + y * y) / (2.0 * d)
                                        - z * z / (4.0 * a * t))
            res[i] = s
            if bad < 0 and not isfinite(s):
                bad = i
    return out, bad


def hf_sum(const double[:, ::1] pts, const double[::1] xi,
           const double[::1] eta, const double[::1] qw, double v, double a):
    cdef Py_ssize_t n = pts.shape[0], m = xi.shape[0], i, j
    cdef double x, y, z, s, dx, dy, r, c = v / (2.0 * a)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            x = pts[i, 0]
            y = pts[i, 1]
            z = pts[i, 2]
            s = 0.0
            for j in range(m):
                dx = x - xi[j]
                dy = y - eta[j]
                r = sqrt(dx * dx + dy * dy + z * z)
                s = s + qw[j] * exp(-c * (dx + r)) / r
            res[i] = s
            if bad < 0 and not isfinite(s):
                bad = i
    return out, bad
