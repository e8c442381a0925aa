# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled dense-layer kernels.

Row-major arrays are handed to column-major BLAS by swapping operand roles,
so no transposed copies are made.
"""
import numpy as np
from libc.math cimport tanh
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "compiled"


def dense_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b, int act):
    cdef int n = x.shape[0]
    cdef int k = x.shape[1]
    cdef int m = w.shape[0]
    cdef int i, j
    cdef double alpha = 1.0, beta = 1.0, v
    cdef char ta = b'T'
    cdef char tb = b'N'
    if w.shape[1] != k or b.shape[0] != m:
        raise ValueError(f"dense_forward: weight {w.shape[0]}x{w.shape[1]} vs input width {k}")
    pre = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] z = pre
    for i in range(n):
        for j in range(m):
            z[i, j] = b[j]
    if n > 0:
        # z^T (m x n, col-major) += w (m x k) . x^T (k x n)
        dgemm(&ta, &tb, &m, &n, &k, &alpha, &w[0, 0], &k, &x[0, 0], &k, &beta, &z[0, 0], &m)
    if act == 0:
        return pre, pre
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    if act == 1:
        for i in range(n):
            for j in range(m):
                v = z[i, j]
                o[i, j] = v if v > 0.0 else 0.0
    else:
        for i in range(n):
            for j in range(m):
                o[i, j] = tanh(z[i, j])
    return pre, out


def dense_backward(double[:, ::1] dout, double[:, ::1] x, double[:, ::1] w,
                   double[:, ::1] pre, double[:, ::1] out, int act, bint need_dx):
    cdef int n = x.shape[0]
    cdef int k = x.shape[1]
    cdef int m = w.shape[0]
    cdef int i, j
    cdef double alpha = 1.0, beta = 0.0, o
    cdef char tn = b'N'
    cdef char tt = b'T'
    if dout.shape[0] != n or dout.shape[1] != m:
        raise ValueError(f"dense_backward: gradient {dout.shape[0]}x{dout.shape[1]}, expected {n}x{m}")
    dz_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] dz = dz_arr
    if act == 0:
        dz[:, :] = dout
    elif act == 1:
        for i in range(n):
            for j in range(m):
                dz[i, j] = dout[i, j] if pre[i, j] > 0.0 else 0.0
    else:
        for i in range(n):
            for j in range(m):
                o = out[i, j]
                dz[i, j] = dout[i, j] * (1.0 - o * o)

    dw_arr = np.zeros((m, k), dtype=np.float64)
    db_arr = np.zeros(m, dtype=np.float64)
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    for i in range(n):
        for j in range(m):
            db[j] += dz[i, j]
    cdef double[:, ::1] dxv
    dx_arr = None
    if n > 0:
        # dw^T (k x m) = x^T (k x n) . dz (n x m)
        dgemm(&tn, &tt, &k, &m, &n, &alpha, &x[0, 0], &k, &dz[0, 0], &m, &beta, &dw[0, 0], &k)
    if need_dx:
        dx_arr = np.zeros((n, k), dtype=np.float64)
        dxv = dx_arr
        if n > 0:
            # dx^T (k x n) = w^T (k x m) . dz^T (m x n)
            dgemm(&tn, &tn, &k, &n, &m, &alpha, &w[0, 0], &k, &dz[0, 0], &m, &beta, &dxv[0, 0], &k)
    return dw_arr, db_arr, dx_arr

