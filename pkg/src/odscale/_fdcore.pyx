# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fundamental-diagram kernels.

Function-for-function equivalent of :mod:`odscale._fdcore_py`; see that
module for the contract and clamping rules. Kept free of the numpy C API
(only typed memoryviews) so no include path is needed at build time.
"""

from libc.math cimport pow
from libc.stdint cimport int64_t

import numpy as np


cdef inline double _powf(double base, double e) nogil:
    # the FD exponents are almost always small integers; skip libc pow then
    if e == 1.0:
        return base
    if e == 2.0:
        return base * base
    if e == 3.0:
        return base * base * base
    if e == 4.0:
        return (base * base) * (base * base)
    return pow(base, e)


cdef inline double _speed(double r, double v_min, double v_max,
                          double a1, double a2) nogil:
    cdef double resp, v
    if r > 1.0:
        r = 1.0
    resp = 1.0 - _powf(r, a1)
    if resp < 0.0:
        resp = 0.0
    elif resp > 1.0:
        resp = 1.0
    resp = _powf(resp, a2)
    if resp < 0.0:
        resp = 0.0
    elif resp > 1.0:
        resp = 1.0
    v = v_min + (v_max - v_min) * resp
    if v < v_min:
        v = v_min
    elif v > v_max:
        v = v_max
    return v


def segment_state(double[::1] c, double[::1] lanes, double[::1] v_min,
                  double[::1] v_max, double k_jam, double kappa,
                  double a1, double a2, double x):
    cdef Py_ssize_t n = c.shape[0]
    lam_arr = np.empty(n)
    k_arr = np.empty(n)
    v_arr = np.empty(n)
    cdef double[::1] lam = lam_arr
    cdef double[::1] k = k_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t i
    for i in range(n):
        lam[i] = x * c[i]
        k[i] = kappa * k_jam * lam[i] / lanes[i]
        v[i] = _speed(k[i] / k_jam, v_min[i], v_max[i], a1, a2)
    return lam_arr, k_arr, v_arr


def segment_time_grads(double[::1] c, double[::1] lanes, double[::1] length,
                       double[::1] v_min, double[::1] v_max, double k_jam,
                       double kappa, double a1, double a2, double x):
    cdef Py_ssize_t n = c.shape[0]
    g_arr = np.zeros(n)
    cdef double[::1] g = g_arr
    cdef Py_ssize_t i
    cdef double r, u, v
    for i in range(n):
        r = kappa * x * c[i] / lanes[i]
        if r >= 1.0:
            continue
        if r > 1.0:
            r = 1.0
        u = 1.0 - _powf(r, a1)
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        v = _speed(r, v_min[i], v_max[i], a1, a2)
        g[i] = (length[i] / (v * v)) * (v_max[i] - v_min[i]) * a1 * a2 \
            * _powf(r, a1 - 1.0) * _powf(u, a2 - 1.0) * kappa * c[i] / lanes[i]
    return g_arr


def path_sums(double[::1] values, int64_t[::1] indptr, int64_t[::1] segidx):
    cdef Py_ssize_t n_paths = indptr.shape[0] - 1
    out_arr = np.empty(n_paths)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, j
    cdef double acc
    for p in range(n_paths):
        acc = 0.0
        for j in range(indptr[p], indptr[p + 1]):
            acc += values[segidx[j]]
        out[p] = acc
    return out_arr


def objective_with_grad(double x, double[::1] c, double[::1] lanes,
                        double[::1] length, double[::1] v_min,
                        double[::1] v_max, double k_jam, double kappa,
                        double a1, double a2, int64_t[::1] indptr,
                        int64_t[::1] segidx, double[::1] gt_hours,
                        double[::1] weights):
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t n_paths = indptr.shape[0] - 1
    v_arr = np.empty(n)
    g_arr = np.empty(n)
    cdef double[::1] v = v_arr
    cdef double[::1] g = g_arr
    cdef Py_ssize_t i, p, j
    cdef double r, u, vi, t, dt, resid, f, fp
    for i in range(n):
        r = kappa * x * c[i] / lanes[i]
        vi = _speed(r, v_min[i], v_max[i], a1, a2)
        v[i] = vi
        if r < 1.0:
            u = 1.0 - _powf(r, a1)
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            g[i] = (length[i] / (vi * vi)) * (v_max[i] - v_min[i]) * a1 * a2 \
                * _powf(r, a1 - 1.0) * _powf(u, a2 - 1.0) * kappa * c[i] / lanes[i]
        else:
            g[i] = 0.0
    f = 0.0
    fp = 0.0
    for p in range(n_paths):
        t = 0.0
        dt = 0.0
        for j in range(indptr[p], indptr[p + 1]):
            i = segidx[j]
            t += length[i] / v[i]
            dt += g[i]
        resid = t - gt_hours[p]
        f += weights[p] * resid * resid
        fp += weights[p] * resid * dt
    return f / n_paths, 2.0 * fp / n_paths


def objective_batch(xs, double[::1] c, double[::1] lanes, double[::1] length,
                    double[::1] v_min, double[::1] v_max, double k_jam,
                    double kappa, double a1, double a2, int64_t[::1] indptr,
                    int64_t[::1] segidx, double[::1] gt_hours,
                    double[::1] weights):
    xs_arr = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] xv = xs_arr
    cdef Py_ssize_t n_x = xv.shape[0]
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t n_paths = indptr.shape[0] - 1
    out_arr = np.empty(n_x)
    cdef double[::1] out = out_arr
    v_arr = np.empty(n)
    cdef double[::1] v = v_arr
    cdef Py_ssize_t m, i, p, j
    cdef double x, t, resid, f
    with nogil:
        for m in range(n_x):
            x = xv[m]
            for i in range(n):
                v[i] = _speed(kappa * x * c[i] / lanes[i],
                              v_min[i], v_max[i], a1, a2)
            f = 0.0
            for p in range(n_paths):
                t = 0.0
                for j in range(indptr[p], indptr[p + 1]):
                    i = segidx[j]
                    t += length[i] / v[i]
                resid = t - gt_hours[p]
                f += weights[p] * resid * resid
            out[m] = f / n_paths
    return out_arr
