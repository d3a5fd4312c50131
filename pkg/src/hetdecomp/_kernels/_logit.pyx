# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled monotone FISTA for the l1-penalized multinomial logit."""
import numpy as np
from libc.math cimport exp, log, fabs, sqrt


cdef double _objective(const double[:, ::1] xa, const long long[::1] t, double[:, ::1] th,
                       double lam, double[::1] eta) noexcept nogil:
    cdef Py_ssize_t n = xa.shape[0], q = xa.shape[1], k1 = th.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double total = 0.0, top, tot, s, pen = 0.0
    for i in range(n):
        top = 0.0
        for c in range(k1):
            s = 0.0
            for j in range(q):
                s += xa[i, j] * th[j, c]
            eta[c] = s
            if s > top:
                top = s
        tot = exp(-top)
        for c in range(k1):
            tot += exp(eta[c] - top)
        total += top + log(tot)
        if t[i] > 0:
            total -= eta[t[i] - 1]
    for j in range(1, q):
        for c in range(k1):
            pen += fabs(th[j, c])
    return total / n + lam * pen


cdef void _gradient(const double[:, ::1] xa, const long long[::1] t, double[:, ::1] th,
                    double[:, ::1] grad, double[::1] eta) noexcept nogil:
    cdef Py_ssize_t n = xa.shape[0], q = xa.shape[1], k1 = th.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double top, tot, s, r
    for j in range(q):
        for c in range(k1):
            grad[j, c] = 0.0
    for i in range(n):
        top = 0.0
        for c in range(k1):
            s = 0.0
            for j in range(q):
                s += xa[i, j] * th[j, c]
            eta[c] = s
            if s > top:
                top = s
        tot = exp(-top)
        for c in range(k1):
            eta[c] = exp(eta[c] - top)
            tot += eta[c]
        for c in range(k1):
            r = eta[c] / tot
            if t[i] == c + 1:
                r -= 1.0
            for j in range(q):
                grad[j, c] += xa[i, j] * r
    for j in range(q):
        for c in range(k1):
            grad[j, c] /= n


def logit_fista(const double[:, ::1] xa, const long long[::1] t, double[:, ::1] theta,
                double lam, double step, double tol, int max_iter, double[::1] trace):
    """FISTA with function-value restart on ``-loglik/n + lam * ||theta[1:]||_1``.

    ``theta`` is updated in place and the objective never increases. A
    step that would raise the objective resets the momentum; if a plain
    proximal-gradient step from the current point is also rejected, the
    point is stationary to machine precision and the solver stops.

    Returns ``(iterations, n_trace)``; iterations is -1 without convergence.
    Objective values are written to ``trace`` while it has room.
    """
    cdef Py_ssize_t q = theta.shape[0], k1 = theta.shape[1]
    cdef Py_ssize_t j, c
    cdef int it, n_trace = 0, result = -1
    cdef double[:, ::1] y = np.array(theta, dtype=np.float64)
    cdef double[:, ::1] z = np.empty((q, k1))
    cdef double[:, ::1] grad = np.empty((q, k1))
    cdef double[::1] eta = np.empty(k1)
    cdef double obj, obj_z, tk = 1.0, tk1, v, thr = step * lam, old, nw, change, zdist
    cdef bint stalled = False
    with nogil:
        obj = _objective(xa, t, theta, lam, eta)
        if trace.shape[0] > 0:
            trace[0] = obj
            n_trace = 1
        for it in range(1, max_iter + 1):
            _gradient(xa, t, y, grad, eta)
            for j in range(q):
                for c in range(k1):
                    v = y[j, c] - step * grad[j, c]
                    if j > 0:
                        if v > thr:
                            v = v - thr
                        elif v < -thr:
                            v = v + thr
                        else:
                            v = 0.0
                    z[j, c] = v
            obj_z = _objective(xa, t, z, lam, eta)
            change = 0.0
            zdist = 0.0
            if obj_z <= obj:
                tk1 = 0.5 * (1.0 + sqrt(1.0 + 4.0 * tk * tk))
                for j in range(q):
                    for c in range(k1):
                        old = theta[j, c]
                        nw = z[j, c]
                        y[j, c] = nw + ((tk - 1.0) / tk1) * (nw - old)
                        if fabs(nw - old) > change:
                            change = fabs(nw - old)
                        theta[j, c] = nw
                obj = obj_z
                tk = tk1
                stalled = False
            else:
                # restart momentum; a rejected plain step means no descent is left
                for j in range(q):
                    for c in range(k1):
                        if fabs(z[j, c] - theta[j, c]) > zdist:
                            zdist = fabs(z[j, c] - theta[j, c])
                        y[j, c] = theta[j, c]
                tk = 1.0
                if stalled:
                    result = it
                    break
                stalled = True
            if n_trace < trace.shape[0]:
                trace[n_trace] = obj
                n_trace += 1
            if change < tol and zdist < tol:
                result = it
                break
    return result, n_trace
