"""K-fold cross-validation of penalty parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._folds import make_folds
from .linear import _prepare as _prepare_linear
from .linear import fit_lasso, fit_ridge, lasso_lambda_max
from .logit import fit_multinomial_logit, logit_lambda_max, multinomial_deviance

FAMILIES = ("lasso", "ridge", "logit_l1", "logit_l2")


@dataclass(frozen=True, eq=False)
class CVResult:
    lam: float
    grid: np.ndarray
    curve: np.ndarray
    family: str


def default_grid(family, x, y, n_lambda=25, min_ratio=1e-3, n_classes=None):
    """Descending penalty grid for ``family`` on data ``(x, y)``."""
    n = np.asarray(y).shape[0]
    if family == "lasso":
        top = lasso_lambda_max(x, y)
    elif family == "logit_l1":
        top = logit_lambda_max(x, y, n_classes)
    elif family == "ridge":
        return n * np.logspace(2, -4, n_lambda)
    elif family == "logit_l2":
        return np.logspace(1, -5, n_lambda)
    else:
        raise ValueError(f"unknown learner family {family!r}; expected one of {FAMILIES}")
    if top <= 0:
        return np.array([0.0])
    return top * np.logspace(0, np.log10(min_ratio), n_lambda)


def cross_validate(family, x, y, grid=None, folds: int = 5, seed=0, n_classes=None,
                   tol=None, max_iter=10_000) -> CVResult:
    """Pick the penalty minimizing out-of-fold loss over ``grid``.

    Loss is mean squared error for ``lasso``/``ridge`` and multinomial
    deviance for ``logit_l1``/``logit_l2``. Exact ties go to the larger
    penalty. Classification folds are stratified by class.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown learner family {family!r}; expected one of {FAMILIES}")
    if folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(y)
    classify = family.startswith("logit")
    if classify:
        y = y.astype(np.int64)
        n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if grid is None:
        grid = default_grid(family, x, y, n_classes=n_classes)
    grid = np.sort(np.asarray(grid, dtype=np.float64))[::-1]
    if grid.size == 0:
        raise ValueError("empty penalty grid")
    if np.any(grid < 0):
        raise ValueError("penalties must be nonnegative")
    if grid.size == 1:
        return CVResult(float(grid[0]), grid, np.array([np.nan]), family)

    plan = make_folds(y.shape[0], folds, seed, stratify_by=y if classify else None)
    loss = np.zeros(grid.size)
    for f in range(folds):
        tr, te = plan.train_rows(f), plan.test_rows(f)
        if classify:
            missing = np.setdiff1d(np.arange(n_classes), y[tr])
            if missing.size:
                raise ValueError(f"cross-validation fold {f} leaves classes {missing.tolist()} untrained")
            loss += te.size * _logit_path_loss(family, x[tr], y[tr], x[te], y[te], grid, n_classes,
                                               tol or 1e-8, max_iter)
        else:
            loss += te.size * _linear_path_loss(family, x[tr], y[tr], x[te], y[te], grid,
                                                tol or 1e-7, max_iter)
    loss /= y.shape[0]
    best = np.flatnonzero(loss == loss.min())[0]  # grid descends: first hit is the largest penalty
    return CVResult(float(grid[best]), grid, loss, family)


def _linear_path_loss(family, xtr, ytr, xte, yte, grid, tol, max_iter):
    out = np.empty(grid.size)
    if family == "ridge":
        for k, lam in enumerate(grid):
            out[k] = np.mean((yte - fit_ridge(xtr, ytr, lam).predict(xte)) ** 2)
        return out
    warm = None
    for k, lam in enumerate(grid):
        fit = fit_lasso(xtr, ytr, lam, tol=tol, max_iter=max_iter, coef_init=warm)
        warm = fit.coef_std
        out[k] = np.mean((yte - fit.predict(xte)) ** 2)
    return out


def _logit_path_loss(family, xtr, ttr, xte, tte, grid, n_classes, tol, max_iter):
    penalty = family.split("_")[1]
    out = np.empty(grid.size)
    warm = None
    for k, lam in enumerate(grid):
        fit = fit_multinomial_logit(xtr, ttr, lam, penalty, n_classes=n_classes, tol=tol,
                                    max_iter=max_iter, theta_init=warm)
        warm = _theta_std(fit, xtr)
        out[k] = multinomial_deviance(fit, xte, tte)
    return out


def _theta_std(fit, x):
    """Map an original-scale logit fit back to standardized parameters."""
    _, _, st, _ = _prepare_linear(x, np.zeros(x.shape[0]))
    scale = np.where(st.active, st.scale, 1.0)
    mean = np.where(st.active, st.mean, 0.0)
    slopes = fit.coef[1:, 1:].T * scale[:, None]
    intercept = fit.coef[1:, 0] + (mean[:, None] * fit.coef[1:, 1:].T).sum(axis=0)
    return np.vstack([intercept, slopes])
