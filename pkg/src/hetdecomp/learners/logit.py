"""Penalized multinomial logistic regression with class 0 as reference."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .linear import ConvergenceError, Standardizer


# On standardized columns a slope this large moves log-odds by 30 per SD:
# only reachable when the likelihood has no finite maximizer.
SEPARATION_SLOPE = 30.0


class SeparationError(RuntimeError):
    """Unpenalized likelihood has no finite maximizer."""


@dataclass(frozen=True, eq=False)
class MultinomialLogitFit:
    """Fitted class-probability model.

    ``coef`` is ``(J + 1, p + 1)`` on the original scale with the intercept
    in column 0 and row 0 (the reference class) identically zero.
    """

    coef: np.ndarray
    lam: float
    penalty: str
    n_iter: int = 0
    objective_trace: tuple = ()

    @property
    def n_classes(self) -> int:
        return self.coef.shape[0]

    def decision(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        return self.coef[:, 0] + x @ self.coef[:, 1:].T

    def predict_proba(self, x):
        eta = self.decision(x)
        eta -= eta.max(axis=1, keepdims=True)
        p = np.exp(eta)
        return p / p.sum(axis=1, keepdims=True)


def _softmax_ref(xa, theta):
    """Softmax over ``[0, xa @ theta]`` returning ``(probs, eta, lse)``."""
    n = xa.shape[0]
    eta = np.empty((n, theta.shape[1] + 1))
    eta[:, 0] = 0.0
    eta[:, 1:] = xa @ theta
    top = eta.max(axis=1)
    ex = np.exp(eta - top[:, None])
    tot = ex.sum(axis=1)
    ex /= tot[:, None]
    return ex, eta, top + np.log(tot)


def _nll(xa, theta, onehot):
    _, eta, lse = _softmax_ref(xa, theta)
    return float(lse.mean() - np.einsum("ij,ij->", eta, onehot) / xa.shape[0])


def _penalty(theta, lam, kind):
    w = theta[1:]
    if kind == "l1":
        return lam * np.abs(w).sum()
    if kind == "l2":
        return 0.5 * lam * (w * w).sum()
    return 0.0


def logit_lambda_max(x, t, n_classes=None) -> float:
    """Smallest l1 penalty at which every slope is zero."""
    x, t, st, xs, onehot = _prepare(x, t, n_classes)
    freq = onehot.mean(axis=0)
    grad = xs.T @ (freq[None, 1:] - onehot[:, 1:]) / x.shape[0]
    return float(np.abs(grad).max()) if grad.size else 0.0


def _prepare(x, t, n_classes):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    t = np.asarray(t, dtype=np.int64)
    k = int(t.max()) + 1 if n_classes is None else int(n_classes)
    if k < 2:
        raise ValueError("need at least two classes")
    counts = np.bincount(t, minlength=k)
    if np.any(counts == 0):
        raise ValueError(f"classes {np.flatnonzero(counts == 0).tolist()} have no observations")
    st = Standardizer.fit(x) if x.shape[1] else Standardizer(np.zeros(0), np.ones(0))
    xs = st.transform(x)
    if xs.shape[1]:
        xs[:, ~st.active] = 0.0
    onehot = np.zeros((t.shape[0], k))
    onehot[np.arange(t.shape[0]), t] = 1.0
    return x, t, st, xs, onehot


def fit_multinomial_logit(x, t, lam: float = 0.0, penalty: str = "l1", n_classes=None,
                          tol: float = 1e-8, max_iter: int = 10_000, theta_init=None,
                          track_objective: bool = False) -> MultinomialLogitFit:
    """Penalized multinomial logit.

    Minimizes ``-loglik/n + lam * P(W)`` over intercepts and standardized
    slopes ``W``, with ``P = ||W||_1`` (``penalty="l1"``) or
    ``P = ||W||^2 / 2`` (``"l2"``); intercepts are unpenalized. l1 uses
    FISTA with function-value restart and the Böhning curvature bound as
    step size; l2 and
    the unpenalized case use damped Newton steps. ``x`` may have zero
    columns, giving the intercept-only model.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if penalty not in ("l1", "l2"):
        raise ValueError("penalty must be 'l1' or 'l2'")
    x, t, st, xs, onehot = _prepare(x, t, n_classes)
    n, p = xs.shape
    k = onehot.shape[1]
    xa = np.hstack([np.ones((n, 1)), xs])
    if theta_init is None:
        freq = onehot.mean(axis=0)
        theta = np.zeros((p + 1, k - 1))
        theta[0] = np.log(freq[1:] / freq[0])
    else:
        theta = np.array(theta_init, dtype=np.float64)
    kind = penalty if lam > 0 else "none"
    if kind == "l1":
        theta, n_iter, trace = _fista(xa, onehot, theta, lam, tol, max_iter, track_objective)
    else:
        theta, n_iter, trace = _newton(xa, onehot, theta, lam if kind == "l2" else 0.0, tol,
                                       max_iter, track_objective)
    coef = np.zeros((k, p + 1))
    if p:
        scale = np.where(st.active, st.scale, 1.0)
        slopes = np.where(st.active[:, None], theta[1:] / scale[:, None], 0.0)
        coef[1:, 1:] = slopes.T
        coef[1:, 0] = theta[0] - np.where(st.active, st.mean, 0.0) @ slopes
    else:
        coef[1:, 0] = theta[0]
    return MultinomialLogitFit(coef, float(lam), kind, n_iter, tuple(trace))


def _fista(xa, onehot, theta, lam, tol, max_iter, track):
    n = xa.shape[0]
    smax = np.linalg.norm(xa, 2)
    step = 1.0 / (0.5 * smax * smax / n)
    t = np.ascontiguousarray(onehot.argmax(axis=1), dtype=np.int64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    trace = np.empty(max_iter + 1 if track else 0)
    it, n_trace = _kernels.logit_fista(np.ascontiguousarray(xa), t, theta, float(lam), step,
                                       float(tol), int(max_iter), trace)
    if it < 0:
        raise ConvergenceError(f"l1 multinomial logit did not converge in {max_iter} iterations")
    return theta, it, trace[:n_trace].tolist()


def _newton(xa, onehot, theta, lam, tol, max_iter, track):
    n, q = xa.shape
    k1 = onehot.shape[1] - 1
    pen = np.ones(q)
    pen[0] = 0.0
    pen_vec = np.tile(pen, k1) * lam

    def objective(th):
        return _nll(xa, th, onehot) + _penalty(th, lam, "l2")

    obj = objective(theta)
    trace = [obj] if track else []
    for it in range(1, max_iter + 1):
        prob, _, _ = _softmax_ref(xa, theta)
        pr = prob[:, 1:]
        grad = (xa.T @ (pr - onehot[:, 1:]) / n).T.ravel() + pen_vec * theta.T.ravel()
        hess = np.empty((k1 * q, k1 * q))
        for a in range(k1):
            for b in range(a, k1):
                w = pr[:, a] * ((a == b) - pr[:, b])
                blk = (xa * w[:, None]).T @ xa / n
                hess[a * q:(a + 1) * q, b * q:(b + 1) * q] = blk
                hess[b * q:(b + 1) * q, a * q:(a + 1) * q] = blk.T
        hess[np.diag_indices_from(hess)] += pen_vec
        try:
            direction = np.linalg.solve(hess + 1e-12 * np.eye(k1 * q), grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError("singular Hessian; use a penalty lambda > 0") from exc
        step = 1.0
        while True:
            cand = theta - step * direction.reshape(k1, q).T
            cand_obj = objective(cand)
            if cand_obj <= obj - 1e-4 * step * grad @ direction or step < 1e-10:
                break
            step *= 0.5
        change = np.max(np.abs(cand - theta))
        if cand_obj > obj:
            cand, cand_obj = theta, obj
        theta, obj = cand, cand_obj
        if track:
            trace.append(obj)
        if lam == 0 and q > 1 and np.max(np.abs(theta[1:])) > 1e3:
            raise SeparationError(
                "coefficients diverge (likely separated classes); use a penalty lambda > 0"
            )
        if change < tol:
            if lam == 0 and q > 1 and np.max(np.abs(theta[1:])) > SEPARATION_SLOPE:
                raise SeparationError(
                    "fitted slopes are implausibly large (likely separated classes); "
                    "use a penalty lambda > 0"
                )
            return theta, it, trace
    if lam == 0:
        raise SeparationError("Newton iterations did not converge; classes may be separated, use lambda > 0")
    raise ConvergenceError(f"multinomial logit did not converge in {max_iter} iterations")


def multinomial_deviance(fit: MultinomialLogitFit, x, t) -> float:
    """Mean negative log-likelihood of labels ``t`` under ``fit``."""
    p = fit.predict_proba(x)
    t = np.asarray(t, dtype=np.int64)
    return float(-np.mean(np.log(np.maximum(p[np.arange(t.shape[0]), t], 1e-300))))
