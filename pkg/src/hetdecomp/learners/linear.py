"""Ridge and lasso regression on internally standardized columns."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels import lasso_cd


class ConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap."""

    def __init__(self, msg, gap=None):
        super().__init__(msg)
        self.gap = gap


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x):
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        # constant columns carry nothing beyond the intercept; keep them at zero
        scale = np.where(scale > 1e-12 * np.maximum(1.0, np.abs(mean)), scale, np.inf)
        return cls(mean, scale)

    def transform(self, x):
        return (x - self.mean) / self.scale

    @property
    def active(self):
        return np.isfinite(self.scale)


@dataclass(frozen=True, eq=False)
class LinearFit:
    """Affine predictor ``intercept + x @ coef`` on the original scale.

    ``coef_std`` are the coefficients on standardized columns, the scale
    the penalty acts on.
    """

    intercept: float
    coef: np.ndarray
    coef_std: np.ndarray
    penalty: str
    lam: float
    standardizer: Standardizer
    n_iter: int = 0

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        return self.intercept + x @ self.coef

    def standardized_design(self, x):
        return np.nan_to_num(self.standardizer.transform(np.asarray(x, dtype=np.float64)), nan=0.0)


def _prepare(x, y):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y have different numbers of rows")
    if y.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    st = Standardizer.fit(x)
    xs = st.transform(x)
    xs[:, ~st.active] = 0.0
    return x, y, st, xs


def _to_original(st, coef_std, y_mean):
    coef = np.where(st.active, coef_std / np.where(st.active, st.scale, 1.0), 0.0)
    intercept = y_mean - float(np.dot(np.where(st.active, st.mean, 0.0), coef))
    return intercept, coef


def fit_ridge(x, y, lam: float) -> LinearFit:
    """Closed-form ridge: minimizes ``||y - a - Xb||^2 + lam ||b||^2``.

    ``X`` is standardized (mean 0, SD 1) and the intercept unpenalized;
    ``lam = 0`` gives ordinary least squares.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x, y, st, xs = _prepare(x, y)
    y_mean = y.mean()
    act = np.flatnonzero(st.active)
    coef_std = np.zeros(x.shape[1])
    if act.size:
        xa = xs[:, act]
        gram = xa.T @ xa
        evals = np.linalg.eigvalsh(gram)
        if lam == 0 and evals[0] <= 1e-10 * max(evals[-1], 1e-300):
            raise RankDeficientError(
                "design is rank deficient; use a ridge penalty lambda > 0"
            )
        coef_std[act] = np.linalg.solve(gram + lam * np.eye(act.size), xa.T @ (y - y_mean))
    intercept, coef = _to_original(st, coef_std, y_mean)
    return LinearFit(intercept, coef, coef_std, "ridge" if lam > 0 else "none", float(lam), st)


def fit_ols(x, y) -> LinearFit:
    return fit_ridge(x, y, 0.0)


def lasso_lambda_max(x, y) -> float:
    """Smallest penalty at which every lasso coefficient is zero."""
    _, y, _, xs = _prepare(x, y)
    return float(np.max(np.abs(xs.T @ (y - y.mean()))) / y.shape[0]) if xs.shape[1] else 0.0


def lasso_gap(xs, yc, coef_std, lam) -> float:
    """Duality gap of the standardized lasso problem at ``coef_std``."""
    n = yc.shape[0]
    r = yc - xs @ coef_std
    primal = 0.5 * r @ r / n + lam * np.abs(coef_std).sum()
    corr = np.max(np.abs(xs.T @ r)) if xs.shape[1] else 0.0
    s = 1.0 if corr <= n * lam else n * lam / corr
    theta = s * r
    dual = (theta @ yc - 0.5 * theta @ theta) / n
    return float(primal - dual)


def fit_lasso(x, y, lam: float, tol: float = 1e-7, max_iter: int = 10_000,
              coef_init=None) -> LinearFit:
    """Lasso by cyclic coordinate descent with soft-thresholding.

    Minimizes ``0.5/n ||y - a - Xb||^2 + lam ||b||_1`` over standardized
    columns. Stops when the largest coefficient change in a sweep falls
    below ``tol``; raises :class:`ConvergenceError` (carrying the duality
    gap) if ``max_iter`` sweeps are not enough. ``coef_init`` warm-starts
    from standardized-scale coefficients.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x, y, st, xs = _prepare(x, y)
    y_mean = y.mean()
    yc = y - y_mean
    xf = np.asfortranarray(xs)
    coef_std = np.zeros(x.shape[1]) if coef_init is None else np.array(coef_init, dtype=np.float64)
    sweeps, change = lasso_cd(xf, yc, coef_std, float(lam), float(tol), int(max_iter))
    if change >= tol:
        gap = lasso_gap(xs, yc, coef_std, lam)
        raise ConvergenceError(
            f"lasso did not converge in {max_iter} sweeps (last change {change:.3g}, duality gap {gap:.3g})",
            gap=gap,
        )
    intercept, coef = _to_original(st, coef_std, y_mean)
    return LinearFit(intercept, coef, coef_std, "lasso", float(lam), st, n_iter=int(sweeps))


def lasso_objective(x, y, fit: LinearFit) -> float:
    """Penalized objective of ``fit`` on standardized columns."""
    _, y, _, xs = _prepare(x, y)
    r = y - y.mean() - xs @ fit.coef_std
    return float(0.5 * r @ r / y.shape[0] + fit.lam * np.abs(fit.coef_std).sum())


def lasso_kkt_violation(x, y, fit: LinearFit) -> float:
    """Largest violation of the lasso stationarity conditions.

    Zero coefficients need ``|x_j'r/n| <= lam``; nonzero ones need
    ``x_j'r/n = lam * sign(b_j)``.
    """
    _, y, _, xs = _prepare(x, y)
    r = y - y.mean() - xs @ fit.coef_std
    grad = xs.T @ r / y.shape[0]
    b = fit.coef_std
    nz = b != 0
    viol = np.zeros_like(b)
    viol[nz] = np.abs(grad[nz] - fit.lam * np.sign(b[nz]))
    viol[~nz] = np.maximum(np.abs(grad[~nz]) - fit.lam, 0.0)
    return float(viol.max()) if viol.size else 0.0


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
