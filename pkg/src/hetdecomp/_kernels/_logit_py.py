"""Pure-Python FISTA with restart for the l1 multinomial logit (fallback kernel)."""
import numpy as np


def _objective(xa, onehot, theta, lam):
    eta = np.zeros((xa.shape[0], theta.shape[1] + 1))
    eta[:, 1:] = xa @ theta
    top = eta.max(axis=1)
    lse = top + np.log(np.exp(eta - top[:, None]).sum(axis=1))
    nll = lse.mean() - np.einsum("ij,ij->", eta, onehot) / xa.shape[0]
    return float(nll + lam * np.abs(theta[1:]).sum())


def _gradient(xa, onehot, theta):
    eta = np.zeros((xa.shape[0], theta.shape[1] + 1))
    eta[:, 1:] = xa @ theta
    eta -= eta.max(axis=1, keepdims=True)
    prob = np.exp(eta)
    prob /= prob.sum(axis=1, keepdims=True)
    return xa.T @ (prob[:, 1:] - onehot[:, 1:]) / xa.shape[0]


def logit_fista(xa, t, theta, lam, step, tol, max_iter, trace):
    """Same contract as the compiled kernel: ``theta`` updated in place,
    returns ``(iterations or -1, n_trace)``."""
    onehot = np.zeros((xa.shape[0], theta.shape[1] + 1))
    onehot[np.arange(xa.shape[0]), t] = 1.0
    thr = step * lam
    obj = _objective(xa, onehot, theta, lam)
    n_trace = 0
    if trace.shape[0]:
        trace[0] = obj
        n_trace = 1
    y = theta.copy()
    tk = 1.0
    stalled = False
    for it in range(1, max_iter + 1):
        z = y - step * _gradient(xa, onehot, y)
        z[1:] = np.sign(z[1:]) * np.maximum(np.abs(z[1:]) - thr, 0.0)
        obj_z = _objective(xa, onehot, z, lam)
        change = zdist = 0.0
        if obj_z <= obj:
            tk1 = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            y = z + ((tk - 1.0) / tk1) * (z - theta)
            change = np.max(np.abs(z - theta))
            theta[...] = z
            obj, tk, stalled = obj_z, tk1, False
        else:
            # restart momentum; a rejected plain step means no descent is left
            zdist = np.max(np.abs(z - theta))
            y = theta.copy()
            tk = 1.0
            if stalled:
                return it, _record(trace, n_trace, obj)
            stalled = True
        n_trace = _record(trace, n_trace, obj)
        if change < tol and zdist < tol:
            return it, n_trace
    return -1, n_trace


def _record(trace, n_trace, obj):
    if n_trace < trace.shape[0]:
        trace[n_trace] = obj
        return n_trace + 1
    return n_trace
