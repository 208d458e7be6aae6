# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-iteration kernels; contract-identical to ``_numpy_backend``.

Every kernel performs the same floating-point operations in the same order
as the numpy backend, so outputs are bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

name = "compiled"


cdef inline void _split(tuple shape, Py_ssize_t axis,
                        Py_ssize_t *a, Py_ssize_t *i, Py_ssize_t *b):
    cdef Py_ssize_t d
    a[0] = 1
    b[0] = 1
    for d in range(axis):
        a[0] *= shape[d]
    i[0] = shape[axis]
    for d in range(axis + 1, len(shape)):
        b[0] *= shape[d]


def unfold(const double[::1] flat, shape, Py_ssize_t axis):
    """Mode unfolding of a flat buffer; returns an (I_axis, prod rest) matrix."""
    cdef Py_ssize_t A, I, B, a, i, b, src, dst
    _split(shape, axis, &A, &I, &B)
    out = np.empty(A * I * B, dtype=np.float64)
    cdef double[::1] o = out
    # flat index a + A*i + A*I*b  ->  matrix (i, a + A*b), column-major
    for b in range(B):
        for a in range(A):
            dst = I * a + I * A * b
            src = a + A * I * b
            for i in range(I):
                o[dst + i] = flat[src + A * i]
    return out.reshape((I, A * B), order="F")


def fold(const double[:, :] mat, shape, Py_ssize_t axis):
    """Inverse of :func:`unfold`; returns the flat buffer."""
    cdef Py_ssize_t A, I, B, a, i, b, base
    _split(shape, axis, &A, &I, &B)
    out = np.empty(A * I * B, dtype=np.float64)
    cdef double[::1] o = out
    for b in range(B):
        for i in range(I):
            base = A * i + A * I * b
            for a in range(A):
                o[base + a] = mat[i, a + A * b]
    return out


def apply_mask(const double[::1] flat, const long long[::1] indices):
    """Zero everything outside the observed index set."""
    cdef Py_ssize_t k, j
    out = np.zeros(flat.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    for k in range(indices.shape[0]):
        j = indices[k]
        o[j] = flat[j]
    return out


def consensus_update(list ms, list us, shape,
                     const double[::1] observed_flat, const long long[::1] indices):
    """Fused X-update: average the folded (M_n - U_n), then pin observed entries."""
    cdef Py_ssize_t N = len(shape)
    cdef Py_ssize_t P = observed_flat.shape[0]
    cdef Py_ssize_t A, I, B, a, i, b, base, col, axis, k, j
    out = np.zeros(P, dtype=np.float64)
    cdef double[::1] o = out
    cdef const double[:, :] m
    cdef const double[:, :] u
    for axis in range(N):
        m = ms[axis]
        u = us[axis]
        _split(shape, axis, &A, &I, &B)
        for b in range(B):
            for i in range(I):
                base = A * i + A * I * b
                for a in range(A):
                    col = a + A * b
                    o[base + a] += m[i, col] - u[i, col]
    for k in range(P):
        o[k] /= N
    for k in range(indices.shape[0]):
        j = indices[k]
        o[j] = observed_flat[j]
    return out
