# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exterior-algebra kernels (see _kernels_py for the reference)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef double complex cplx


def wedge(const cplx[::1] a, const cplx[::1] b, const long[::1] ia,
          const long[::1] ib, const long[::1] out, const double[::1] sign,
          Py_ssize_t nout):
    res = np.zeros(nout, dtype=np.complex128)
    cdef cplx[::1] r = res
    cdef Py_ssize_t t, n = ia.shape[0]
    for t in range(n):
        r[out[t]] += sign[t] * a[ia[t]] * b[ib[t]]
    return res


def wedge_left_matrix(const cplx[::1] a, const long[::1] ia, const long[::1] ib,
                      const long[::1] out, const double[::1] sign,
                      Py_ssize_t nout, Py_ssize_t ncols):
    mat = np.zeros((nout, ncols), dtype=np.complex128)
    cdef cplx[:, ::1] m = mat
    cdef Py_ssize_t t, n = ia.shape[0]
    for t in range(n):
        m[out[t], ib[t]] += sign[t] * a[ia[t]]
    return mat


cdef inline double cabs1(cplx z) nogil:
    return fabs(z.real) + fabs(z.imag)


cdef cplx _det(cplx* buf, Py_ssize_t r) nogil:
    # in-place LU with partial pivoting on an r x r row-major buffer
    cdef Py_ssize_t i, j, k, p
    cdef cplx det = 1.0, piv, f, tmp
    cdef double best, cur
    for k in range(r):
        p = k
        best = cabs1(buf[k * r + k])
        for i in range(k + 1, r):
            cur = cabs1(buf[i * r + k])
            if cur > best:
                best = cur
                p = i
        if best == 0.0:
            return 0.0
        if p != k:
            for j in range(r):
                tmp = buf[k * r + j]
                buf[k * r + j] = buf[p * r + j]
                buf[p * r + j] = tmp
            det = -det
        piv = buf[k * r + k]
        det = det * piv
        for i in range(k + 1, r):
            f = buf[i * r + k] / piv
            if f != 0:
                for j in range(k + 1, r):
                    buf[i * r + j] -= f * buf[k * r + j]
    return det


def compound(A, rows, cols):
    cdef const cplx[:, :] a = np.ascontiguousarray(A, dtype=np.complex128)
    cdef const long[:, ::1] R = np.ascontiguousarray(rows, dtype=np.int_)
    cdef const long[:, ::1] C = np.ascontiguousarray(cols, dtype=np.int_)
    cdef Py_ssize_t nr = R.shape[0], nc = C.shape[0], r = R.shape[1]
    if r == 0:
        return np.ones((1, 1), dtype=np.complex128)
    out = np.empty((nr, nc), dtype=np.complex128)
    cdef cplx[:, ::1] o = out
    buf_arr = np.empty(r * r, dtype=np.complex128)
    cdef cplx[::1] buf = buf_arr
    cdef Py_ssize_t s, t, i, j
    for s in range(nr):
        for t in range(nc):
            for i in range(r):
                for j in range(r):
                    buf[i * r + j] = a[R[s, i], C[t, j]]
            o[s, t] = _det(&buf[0], r)
    return out
