# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tensor Hermite evaluation kernels.

Same signatures and results as :mod:`vpbspec._hermite_py`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _fill_1d(double x, int K, double* out, const double* rt) noexcept nogil:
    cdef int n
    out[0] = 1.0
    if K >= 1:
        out[1] = x
    for n in range(1, K):
        out[n + 1] = (x * out[n] - rt[n] * out[n - 1]) / rt[n + 1]


def hermite_1d(x, int K):
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(np.ravel(x), dtype=float)
    cdef Py_ssize_t N = xs.shape[0], i
    cdef cnp.ndarray[double, ndim=2] out = np.empty((N, K + 1))
    cdef cnp.ndarray[double, ndim=1] rt = np.sqrt(np.arange(K + 2, dtype=float))
    for i in range(N):
        _fill_1d(xs[i], K, &out[i, 0], &rt[0])
    return out.reshape(np.shape(x) + (K + 1,))


def tensor_hermite(points, int K, index_map):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=float)
    cdef long[:, ::1] idx = np.ascontiguousarray(index_map, dtype=np.int_)
    cdef Py_ssize_t N = p.shape[0], dim = idx.shape[0], i, a
    cdef cnp.ndarray[double, ndim=2] out = np.empty((N, dim))
    cdef double[:, ::1] o = out
    cdef double[::1] rt = np.sqrt(np.arange(K + 2, dtype=float))
    cdef double[:, ::1] h = np.empty((3, K + 1))
    with nogil:
        for i in range(N):
            _fill_1d(p[i, 0], K, &h[0, 0], &rt[0])
            _fill_1d(p[i, 1], K, &h[1, 0], &rt[0])
            _fill_1d(p[i, 2], K, &h[2, 0], &rt[0])
            for a in range(dim):
                o[i, a] = h[0, idx[a, 0]] * h[1, idx[a, 1]] * h[2, idx[a, 2]]
    return out


def tensor_hermite_even(center, offset, int K, index_map):
    cdef double[:, ::1] c = np.ascontiguousarray(center, dtype=float)
    cdef double[:, ::1] d = np.ascontiguousarray(offset, dtype=float)
    cdef long[:, ::1] idx = np.ascontiguousarray(index_map, dtype=np.int_)
    cdef Py_ssize_t N = c.shape[0], dim = idx.shape[0], i, a
    cdef cnp.ndarray[double, ndim=2] out = np.empty((N, dim))
    cdef double[:, ::1] o = out
    cdef double[::1] rt = np.sqrt(np.arange(K + 2, dtype=float))
    cdef double[:, ::1] hp = np.empty((3, K + 1))
    cdef double[:, ::1] hm = np.empty((3, K + 1))
    cdef int ax
    if d.shape[0] != N:
        raise ValueError("center and offset must have the same number of rows")
    with nogil:
        for i in range(N):
            for ax in range(3):
                _fill_1d(c[i, ax] + d[i, ax], K, &hp[ax, 0], &rt[0])
                _fill_1d(c[i, ax] - d[i, ax], K, &hm[ax, 0], &rt[0])
            for a in range(dim):
                o[i, a] = (hp[0, idx[a, 0]] * hp[1, idx[a, 1]] * hp[2, idx[a, 2]]
                           + hm[0, idx[a, 0]] * hm[1, idx[a, 1]] * hm[2, idx[a, 2]])
    return out
