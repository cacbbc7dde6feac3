# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled capital-process kernels (see ``_kernels_py`` for the reference)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, ceil, floor

cnp.import_array()


def kahan_cumsum(const double[::1] k0, const double[:, ::1] inc):
    cdef Py_ssize_t rows = inc.shape[0], n = inc.shape[1], r, i
    out_arr = np.empty((rows, n + 1))
    cdef double[:, ::1] out = out_arr
    cdef double s, comp, y, t
    for r in range(rows):
        s = k0[r]
        comp = 0.0
        out[r, 0] = s
        for i in range(n):
            y = inc[r, i] - comp
            t = s + y
            comp = (t - s) - y
            s = t
            out[r, i + 1] = s
    return out_arr


def product_capital(const double[::1] k0, const double[:, ::1] f):
    cdef Py_ssize_t rows = f.shape[0], n = f.shape[1], r, i
    out_arr = np.empty((rows, n + 1))
    cdef double[:, ::1] out = out_arr
    cdef double k
    for r in range(rows):
        k = k0[r]
        out[r, 0] = k
        for i in range(n):
            k = k * (1.0 + f[r, i])
            out[r, i + 1] = k
    return out_arr


cdef inline double _trap(double t, long k) nogil:
    if k == 0:
        if t <= 1.0:
            return 1.0
        if t <= 2.0:
            return 2.0 - t
        return 0.0
    if t <= k - 1:
        return 0.0
    if t <= k:
        return t - (k - 1)
    if t <= k + 1:
        return 1.0
    if t <= k + 2:
        return k + 2 - t
    return 0.0


def trapezoid_sums(const double[:, ::1] t, double weight_exp):
    cdef Py_ssize_t rows = t.shape[0], n = t.shape[1], r, i
    out_arr = np.zeros((rows, n))
    cdef double[:, ::1] out = out_arr
    cdef double tv, acc, v
    cdef long lo, hi, k, rnd
    for r in range(rows):
        for i in range(n):
            tv = t[r, i]
            rnd = i + 1
            if tv < 1e300:
                lo = <long>ceil(tv) - 2
                hi = <long>floor(tv) + 1
            else:
                lo = rnd
                hi = rnd
            if lo < 0:
                lo = 0
            if hi > rnd - 1:
                hi = rnd - 1
            acc = 0.0
            k = lo
            while k <= hi:
                v = _trap(tv, k)
                if v != 0.0:
                    acc += pow(k + 1.0, weight_exp) * v
                k += 1
            out[r, i] = acc
    return out_arr


def upcrossing_overlay(const double[:, ::1] cap, double a, double b, double k0):
    cdef Py_ssize_t rows = cap.shape[0], m = cap.shape[1], r, i
    out_arr = np.empty((rows, m))
    cdef double[:, ::1] out = out_arr
    cdef double s, prev
    cdef bint active
    for r in range(rows):
        s = k0
        active = False
        out[r, 0] = s
        for i in range(1, m):
            prev = cap[r, i - 1]
            if not active and prev <= a:
                active = True
            elif active and prev >= b:
                active = False
            if active:
                s = s + (cap[r, i] - prev)
            out[r, i] = s
    return out_arr


def upcrossing_count(const double[:, ::1] cap, double a, double b):
    cdef Py_ssize_t rows = cap.shape[0], m = cap.shape[1], r, i
    out_arr = np.zeros(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef bint below
    cdef long count
    cdef double v
    for r in range(rows):
        below = False
        count = 0
        for i in range(m):
            v = cap[r, i]
            if v <= a:
                below = True
            elif below and v >= b:
                count += 1
                below = False
        out[r] = count
    return out_arr
