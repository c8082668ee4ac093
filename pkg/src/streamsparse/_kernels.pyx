# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Signatures mirror :mod:`streamsparse._pykernels`."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, isfinite, INFINITY

cnp.import_array()


def hard_threshold(z, double lam):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t j, p = zv.shape[0]
    out = np.empty(p, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for j in range(p):
            ov[j] = zv[j] if fabs(zv[j]) >= lam else 0.0
    return out


def iht_step(beta, grad_b, inter, hess, double eta, double lam):
    cdef const double[::1] bv = beta
    cdef const double[::1] gv = grad_b
    cdef const double[::1] iv = inter
    cdef const double[:, ::1] hv
    cdef Py_ssize_t p = bv.shape[0], i, j, k, nnz = 0
    cdef bint use_hess = hess is not None
    cdef double[::1] acc = np.empty(p, dtype=np.float64)
    cdef Py_ssize_t[::1] nz = np.empty(p, dtype=np.intp)
    out = np.empty(p, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double bj, s, h, step_sq = 0.0, h_max = 0.0
    cdef bint finite = True
    if use_hess:
        hv = hess
    with nogil:
        for i in range(p):
            acc[i] = gv[i] + iv[i]
            if bv[i] != 0.0:
                nz[nnz] = i
                nnz += 1
        if use_hess:
            # hess is symmetric: column j equals row j, which is contiguous.
            for k in range(nnz):
                j = nz[k]
                bj = bv[j]
                for i in range(p):
                    acc[i] += hv[j, i] * bj
        for i in range(p):
            s = eta * acc[i]
            step_sq += s * s
            h = bv[i] - s
            if not isfinite(h):
                finite = False
            elif fabs(h) > h_max:
                h_max = fabs(h)
            ov[i] = h if fabs(h) >= lam else 0.0
    if not finite:
        h_max = INFINITY
    return out, sqrt(step_sq), h_max
