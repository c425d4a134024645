"""Pure-Python Jacobi kernels, used when the compiled extension is unavailable.

Same algorithms and return conventions as ``_jacobi.pyx``; rotations act on
whole rows/columns through numpy.
"""
import math

import numpy as np


def _rotation(num, den2):
    # tangent of the smaller rotation angle solving t^2 + 2*zeta*t - 1 = 0
    zeta = num / den2
    if zeta >= 0.0:
        t = 1.0 / (zeta + math.sqrt(1.0 + zeta * zeta))
    else:
        t = -1.0 / (-zeta + math.sqrt(1.0 + zeta * zeta))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c


def jacobi_eigh(a_in, tol=1e-15, max_sweeps=100):
    a = np.array(a_in, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    total = float(np.sum(a * a))
    if total == 0.0:
        return np.zeros(n), v, 0
    sweep = 0
    iu = np.triu_indices(n, 1)
    while sweep < max_sweeps:
        off = float(np.sum(a[iu] ** 2))
        if off <= tol * tol * total:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[q, q] - a[p, p], 2.0 * apq)
                cp = a[:, p].copy()
                a[:, p] = c * cp - s * a[:, q]
                a[:, q] = s * cp + c * a[:, q]
                rp = a[p, :].copy()
                a[p, :] = c * rp - s * a[q, :]
                a[q, :] = s * rp + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    return np.diag(a).copy(), v, sweep


def jacobi_svd(a_in, tol=1e-15, max_sweeps=100):
    w = np.array(a_in, dtype=np.float64, copy=True)
    n = w.shape[1]
    v = np.eye(n)
    sweep = 0
    rotated = True
    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = w[:, p], w[:, q]
                alpha = float(wp @ wp)
                beta = float(wq @ wq)
                gamma = float(wp @ wq)
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                c, s = _rotation(beta - alpha, 2.0 * gamma)
                cp = wp.copy()
                w[:, p] = c * cp - s * wq
                w[:, q] = s * cp + c * w[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    return w, v, sweep
