"""Pure-Python coordinate descent, used when the compiled kernel is unavailable."""
import numpy as np


def lasso_cd(x, y, beta, lam, tol, max_iter):
    """Minimize ``0.5/n ||y - x beta||^2 + lam ||beta||_1`` in place.

    Same contract as the compiled kernel: ``y`` centered, ``beta`` updated
    in place, returns ``(sweeps, max_change)``.
    """
    n, p = x.shape
    col_ms = np.einsum("ij,ij->j", x, x) / n
    resid = y - x @ beta
    sweep = 0
    max_change = 0.0
    while sweep < max_iter:
        sweep += 1
        max_change = 0.0
        for j in range(p):
            if col_ms[j] == 0.0:
                continue
            old = beta[j]
            xj = x[:, j]
            z = xj @ resid / n + col_ms[j] * old
            if z > lam:
                new = (z - lam) / col_ms[j]
            elif z < -lam:
                new = (z + lam) / col_ms[j]
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                resid -= xj * delta
                max_change = max(max_change, abs(delta))
        if max_change < tol:
            break
    return sweep, max_change
