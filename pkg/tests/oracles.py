"""Independent reference solutions shared by the unit and acceptance tests."""
import itertools

import numpy as np

from hetdecomp.learners.linear import _prepare


def standardized(x, y):
    _, y, _, xs = _prepare(x, y)
    return xs, y - y.mean()


def lasso_value(xs, yc, b, lam):
    r = yc - xs @ b
    return 0.5 * r @ r / yc.size + lam * np.abs(b).sum()


def active_set_oracle(xs, yc, lam):
    """Exact lasso minimum by enumerating every sign pattern (3^p candidates)."""
    n, p = xs.shape
    best = lasso_value(xs, yc, np.zeros(p), lam)
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        act = np.flatnonzero(s)
        if act.size == 0:
            continue
        xa = xs[:, act]
        b_act = np.linalg.solve(xa.T @ xa / n, xa.T @ yc / n - lam * s[act])
        if np.all(np.sign(b_act) == s[act]):
            b = np.zeros(p)
            b[act] = b_act
            best = min(best, lasso_value(xs, yc, b, lam))
    return best


def zoom_grid_oracle(xs, yc, lam, half=4.0, points=21, rounds=60):
    """Nested grid search; the objective is convex so zooming on the best cell converges."""
    center = np.zeros(xs.shape[1])
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, points) for c in center]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(xs.shape[1], -1).T
        r = yc[None, :] - grid @ xs.T
        vals = 0.5 * (r * r).sum(axis=1) / yc.size + lam * np.abs(grid).sum(axis=1)
        center = grid[np.argmin(vals)]
        half *= 0.5
    return lasso_value(xs, yc, center, lam)
