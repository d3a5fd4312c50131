"""Learner objects used for nuisance estimation.

Regressors expose ``fit(x, y)`` returning a model with ``predict(x)``;
classifiers expose ``fit(x, t, n_classes)`` returning a model with
``predict_proba(x)``. All of them are deterministic given their
configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .._folds import make_folds
from .linear import fit_lasso, fit_ridge
from .logit import fit_multinomial_logit
from .selection import cross_validate


@dataclass(frozen=True, eq=False)
class ConstantFit:
    value: float

    def predict(self, x):
        return np.full(np.asarray(x).shape[0], self.value)


@dataclass(frozen=True, eq=False)
class FrequencyFit:
    probs: np.ndarray

    def predict_proba(self, x):
        return np.tile(self.probs, (np.asarray(x).shape[0], 1))


@dataclass(frozen=True, eq=False)
class SubsetFit:
    inner: object
    columns: tuple

    def predict(self, x):
        return self.inner.predict(np.asarray(x)[:, list(self.columns)])

    def predict_proba(self, x):
        return self.inner.predict_proba(np.asarray(x)[:, list(self.columns)])


class MeanRegressor:
    name = "mean"

    def fit(self, x, y):
        return ConstantFit(float(np.mean(y)))


@dataclass
class RidgeRegressor:
    """Ridge regression; ``lam=None`` selects the penalty by K-fold CV."""

    lam: float | None = None
    grid: tuple | None = None
    cv: int = 5
    seed: int = 0
    name: str = "ridge"

    def fit(self, x, y):
        lam = self.lam
        if lam is None:
            lam = cross_validate("ridge", x, y, self.grid, self.cv, self.seed).lam
        return fit_ridge(x, y, lam)


@dataclass
class OLSRegressor:
    name: str = "ols"

    def fit(self, x, y):
        return fit_ridge(x, y, 0.0)


@dataclass
class LassoRegressor:
    """Lasso regression; ``lam=None`` selects the penalty by K-fold CV."""

    lam: float | None = None
    grid: tuple | None = None
    cv: int = 5
    seed: int = 0
    tol: float = 1e-7
    max_iter: int = 10_000
    name: str = "lasso"

    def fit(self, x, y):
        lam = self.lam
        if lam is None:
            lam = cross_validate("lasso", x, y, self.grid, self.cv, self.seed, tol=self.tol,
                                 max_iter=self.max_iter).lam
        return fit_lasso(x, y, lam, tol=self.tol, max_iter=self.max_iter)


class FrequencyClassifier:
    name = "frequency"

    def fit(self, x, t, n_classes):
        counts = np.bincount(np.asarray(t, dtype=np.int64), minlength=n_classes)
        return FrequencyFit(counts / counts.sum())


@dataclass
class MultinomialLogitClassifier:
    """Multinomial logit; ``lam=None`` selects the penalty by stratified CV."""

    penalty: str = "l1"
    lam: float | None = None
    grid: tuple | None = None
    cv: int = 5
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 10_000
    name: str = "logit"

    def fit(self, x, t, n_classes):
        lam = self.lam
        if lam is None:
            lam = cross_validate(f"logit_{self.penalty}", x, t, self.grid, self.cv, self.seed,
                                 n_classes=n_classes, tol=self.tol, max_iter=self.max_iter).lam
        return fit_multinomial_logit(x, t, lam, self.penalty, n_classes=n_classes, tol=self.tol,
                                     max_iter=self.max_iter)


@dataclass
class OnColumns:
    """Restrict a learner to a subset of confounder columns."""

    learner: object
    columns: tuple

    @property
    def name(self):
        return f"{self.learner.name}[{','.join(map(str, self.columns))}]"

    def fit(self, x, *args):
        x = np.asarray(x)[:, list(self.columns)]
        return SubsetFit(self.learner.fit(x, *args), tuple(self.columns))


@dataclass(frozen=True, eq=False)
class EnsembleFit:
    """Convex combination of fitted members."""

    members: tuple
    weights: np.ndarray

    def predict(self, x):
        return sum(w * m.predict(x) for w, m in zip(self.weights, self.members))

    def predict_proba(self, x):
        return sum(w * m.predict_proba(x) for w, m in zip(self.weights, self.members))


def _identical(preds, atol=1e-12):
    return all(np.allclose(preds[0], p, rtol=0.0, atol=atol) for p in preds[1:])


def simplex_least_squares(preds, y):
    """Weights on the simplex minimizing ``||y - preds @ w||^2``."""
    m = preds.shape[1]
    if m == 1:
        return np.ones(1)
    gram = preds.T @ preds
    lin = preds.T @ y
    scale = max(float(np.trace(gram)), 1e-300)

    def obj(w):
        return (w @ gram @ w - 2 * lin @ w) / scale

    def jac(w):
        return 2 * (gram @ w - lin) / scale

    res = minimize(obj, np.full(m, 1.0 / m), jac=jac, method="SLSQP", bounds=[(0.0, 1.0)] * m,
                   constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                                 "jac": lambda w: np.ones(m)}],
                   options={"ftol": 1e-14, "maxiter": 500})
    w = np.clip(res.x, 0.0, None)
    return w / w.sum()


def simplex_log_score(probs, tol=1e-12, max_iter=10_000):
    """Mixture weights maximizing ``sum_i log(probs[i] @ w)`` (EM updates)."""
    m = probs.shape[1]
    w = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        mix = probs @ w
        new = w * (probs / mix[:, None]).mean(axis=0)
        new /= new.sum()
        if np.max(np.abs(new - w)) < tol:
            return new
        w = new
    return w


@dataclass
class EnsembleRegressor:
    """Stack of regressors with simplex weights from out-of-fold predictions."""

    members: list = field(default_factory=lambda: [MeanRegressor(), RidgeRegressor(),
                                                   LassoRegressor()])
    folds: int = 2
    seed: int = 0
    name: str = "ensemble"

    def fit(self, x, y):
        return fit_ensemble(self.members, x, y, self.folds, self.seed)


@dataclass
class EnsembleClassifier:
    members: list = field(default_factory=lambda: [FrequencyClassifier(),
                                                   MultinomialLogitClassifier("l1"),
                                                   MultinomialLogitClassifier("l2")])
    folds: int = 2
    seed: int = 0
    name: str = "ensemble"

    def fit(self, x, t, n_classes):
        return fit_ensemble(self.members, x, t, self.folds, self.seed, n_classes=n_classes)


def fit_ensemble(members, x, y_or_t, folds: int = 2, seed=0, n_classes=None) -> EnsembleFit:
    """Fit a convex stack of ``members``.

    Weights minimize squared error (regression) or maximize the
    log-likelihood of the observed classes (``n_classes`` given) of
    ``folds``-fold out-of-fold member predictions, subject to the weights
    lying on the probability simplex. Identical member predictions get
    uniform weights. Members are then refit on all rows.
    """
    if not members:
        raise ValueError("ensemble needs at least one member")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y_or_t)
    classify = n_classes is not None
    m = len(members)
    if m == 1:
        weights = np.ones(1)
    else:
        n = y.shape[0]
        plan = make_folds(n, folds, seed, stratify_by=y if classify else None)
        oof = np.zeros((n, m))
        for f in range(folds):
            tr, te = plan.train_rows(f), plan.test_rows(f)
            for k, member in enumerate(members):
                if classify:
                    pr = member.fit(x[tr], y[tr], n_classes).predict_proba(x[te])
                    oof[te, k] = pr[np.arange(te.size), y[te]]
                else:
                    oof[te, k] = member.fit(x[tr], y[tr]).predict(x[te])
        cols = [oof[:, k] for k in range(m)]
        if _identical(cols):
            weights = np.full(m, 1.0 / m)
        elif classify:
            weights = simplex_log_score(np.maximum(oof, 1e-300))
        else:
            weights = simplex_least_squares(oof, y.astype(np.float64))
    if classify:
        fitted = tuple(member.fit(x, y, n_classes) for member in members)
    else:
        fitted = tuple(member.fit(x, y) for member in members)
    return EnsembleFit(fitted, weights)
