# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numeric loops.

Mirrors `_ref` exactly: f32 arithmetic throughout, same stabilization. Kept
to plain sequential loops so results track the numpy fallback to within
float rounding of the reduction order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport expf, fabsf, fmaxf, isfinite, logf, sqrtf

cnp.import_array()


def merge_lse_f32(const float[:, ::1] va, const float[::1] sa, const float[:, ::1] vb, const float[::1] sb):
    cdef Py_ssize_t n = va.shape[0]
    cdef Py_ssize_t d = va.shape[1]
    vout_arr = np.empty((n, d), dtype=np.float32)
    sout_arr = np.empty(n, dtype=np.float32)
    cdef float[:, ::1] vout = vout_arr
    cdef float[::1] sout = sout_arr
    cdef Py_ssize_t i, j
    cdef float smax, wa, wb, inv
    for i in range(n):
        smax = fmaxf(sa[i], sb[i])
        wa = expf(sa[i] - smax)
        wb = expf(sb[i] - smax)
        inv = 1.0 / (wa + wb)
        for j in range(d):
            vout[i, j] = (wa * va[i, j] + wb * vb[i, j]) * inv
        sout[i] = smax + logf(wa + wb)
    return vout_arr, sout_arr


def fused_add_rmsnorm_f32(const float[:, ::1] x, const float[:, ::1] r, const float[::1] w, float eps):
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.empty((rows, d), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef float h, acc, inv
    for i in range(rows):
        acc = 0.0
        for j in range(d):
            h = x[i, j] + r[i, j]
            out[i, j] = h
            acc += h * h
        inv = 1.0 / sqrtf(acc / <float>d + eps)
        for j in range(d):
            out[i, j] = out[i, j] * inv * w[j]
    return out_arr


def silu_mul_f32(const float[::1] x, const float[::1] g):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    cdef Py_ssize_t i
    cdef float sig
    for i in range(n):
        sig = 1.0 / (1.0 + expf(-x[i]))
        out[i] = x[i] * sig * g[i]
    return out_arr


def max_abs_diff_f32(const float[::1] a, const float[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i
    cdef float best = 0.0
    for i in range(n):
        if not isfinite(a[i]) or not isfinite(b[i]):
            return float("inf")
        best = fmaxf(best, fabsf(a[i] - b[i]))
    return float(best)
