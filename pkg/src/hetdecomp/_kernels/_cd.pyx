# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic coordinate descent for the lasso."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _soft(double z, double t) nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def lasso_cd(double[::1, :] x, double[::1] y, double[::1] beta,
             double lam, double tol, int max_iter):
    """Minimize 0.5/n ||y - x beta||^2 + lam ||beta||_1 in place.

    ``x`` must be Fortran-ordered and ``y`` centered. Returns
    ``(sweeps, max_change)``.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t i, j
    cdef int sweep = 0
    cdef double inv_n = 1.0 / n
    cdef double z, old, new, delta, max_change = 0.0, acc
    cdef double[::1] resid = np.array(y, dtype=np.float64, copy=True)
    cdef double[::1] col_ms = np.empty(p, dtype=np.float64)

    with nogil:
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc = acc + x[i, j] * x[i, j]
            col_ms[j] = acc * inv_n
            if beta[j] != 0.0:
                for i in range(n):
                    resid[i] = resid[i] - x[i, j] * beta[j]

        while sweep < max_iter:
            sweep = sweep + 1
            max_change = 0.0
            for j in range(p):
                if col_ms[j] == 0.0:
                    continue
                old = beta[j]
                acc = 0.0
                for i in range(n):
                    acc = acc + x[i, j] * resid[i]
                z = acc * inv_n + col_ms[j] * old
                new = _soft(z, lam) / col_ms[j]
                delta = new - old
                if delta != 0.0:
                    beta[j] = new
                    for i in range(n):
                        resid[i] = resid[i] - x[i, j] * delta
                    if fabs(delta) > max_change:
                        max_change = fabs(delta)
            if max_change < tol:
                break

    return sweep, max_change
