# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Jacobi rotation kernels.

Both kernels return raw (unsorted, unnormalised) factors; ordering, sign
convention and basis completion happen in :mod:`vaebounds.linalg`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def jacobi_eigh(double[:, ::1] a_in, double tol=1e-15, int max_sweeps=100):
    """Cyclic Jacobi eigenvalue iteration on a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvectors in columns.
    """
    cdef Py_ssize_t n = a_in.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(a_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t i, p, q, k
    cdef double off, total, apq, tau, t, c, s, akp, akq, app, aqq
    cdef int sweep = 0

    total = 0.0
    for i in range(n):
        for k in range(n):
            total += a[i, k] * a[i, k]
    if total == 0.0:
        return np.zeros(n), v_arr, 0

    while sweep < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= tol * tol * total:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq

    w = np.empty(n, dtype=np.float64)
    for i in range(n):
        w[i] = a[i, i]
    return w, v_arr, sweep


def jacobi_svd(double[:, ::1] a_in, double tol=1e-15, int max_sweeps=100):
    """One-sided (Hestenes) Jacobi orthogonalisation of the columns of ``a``.

    Returns ``(w, v, sweeps)`` where ``w = a @ v`` has mutually orthogonal
    columns; their norms are the singular values.
    """
    cdef Py_ssize_t m = a_in.shape[0]
    cdef Py_ssize_t n = a_in.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w_arr = np.array(a_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef double alpha, beta, gamma, zeta, t, c, s, wp, wq
    cdef int sweep = 0
    cdef bint rotated = True

    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    alpha += w[k, p] * w[k, p]
                    beta += w[k, q] * w[k, q]
                    gamma += w[k, p] * w[k, q]
                if gamma == 0.0 or fabs(gamma) <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(m):
                    wp = w[k, p]
                    wq = w[k, q]
                    w[k, p] = c * wp - s * wq
                    w[k, q] = s * wp + c * wq
                for k in range(n):
                    wp = v[k, p]
                    wq = v[k, q]
                    v[k, p] = c * wp - s * wq
                    v[k, q] = s * wp + c * wq
    return w_arr, v_arr, sweep
