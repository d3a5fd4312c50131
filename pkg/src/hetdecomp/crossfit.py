"""Cross-fitted nuisance estimation.

For every fold ``f`` the outcome means ``mu_t`` are fit on the
treatment-``t`` rows outside ``f`` and the propensities on all rows
outside ``f``; predictions for the rows in ``f`` come only from those
models.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ._folds import FoldPlan, make_folds
from .data import ObservationTable
from .learners import LearnerConfig

PROPENSITY_FLOOR = 1e-6


class CrossFitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CrossFittedNuisances:
    """Out-of-fold ``mu_hat`` and ``e_hat`` (both ``n x (J + 1)``) and ``pi_hat``."""

    mu_hat: np.ndarray
    e_hat: np.ndarray
    pi_hat: np.ndarray
    clip_count: int = 0
    clip_by_treatment: tuple = ()
    fold_of: np.ndarray | None = None

    def __post_init__(self):
        for name in ("mu_hat", "e_hat", "pi_hat"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mu_hat.shape != self.e_hat.shape:
            raise ValueError("mu_hat and e_hat must have the same shape")
        if self.pi_hat.shape != (self.e_hat.shape[1],):
            raise ValueError("pi_hat needs one entry per treatment")
        if not np.all(self.e_hat > 0):
            raise ValueError("propensities must be strictly positive")

    @property
    def n(self) -> int:
        return self.mu_hat.shape[0]

    def to_frame(self, labels=None) -> pd.DataFrame:
        k = self.mu_hat.shape[1]
        labels = labels or list(range(k))
        cols = {}
        for j in range(k):
            cols[f"mu_{labels[j]}"] = self.mu_hat[:, j]
        for j in range(k):
            cols[f"e_{labels[j]}"] = self.e_hat[:, j]
        df = pd.DataFrame(cols)
        if self.fold_of is not None:
            df.insert(0, "fold", self.fold_of)
        return df

    def dump(self, path, labels=None):
        """Write per-row nuisances and, as a trailing block, ``pi_hat`` to CSV."""
        df = self.to_frame(labels)
        df.to_csv(path, index=False)
        pi = pd.DataFrame({"treatment": labels or list(range(self.pi_hat.size)),
                           "pi_hat": self.pi_hat})
        pi.to_csv(str(path).replace(".csv", "") + "_pi.csv", index=False)


def estimate_pi(table: ObservationTable) -> np.ndarray:
    """Treatment shares ``pi_t = E_n[1(T = t)]``, with ``pi_0 = 1 - E_n[D]``."""
    shares = table.mean(table.indicators())
    shares[0] = 1.0 - table.mean(table.d)
    return shares


def floor_propensities(e, floor=PROPENSITY_FLOOR):
    """Clip propensities below ``floor`` and renormalize rows.

    Returns the adjusted matrix and the number of clipped entries per
    treatment.
    """
    e = np.asarray(e, dtype=np.float64)
    low = e < floor
    out = np.where(low, floor, e)
    out = out / out.sum(axis=1, keepdims=True)
    return out, low.sum(axis=0)


def oracle_nuisances(table: ObservationTable, mu, e, pi=None,
                     floor: float | None = None) -> CrossFittedNuisances:
    """Bypass fitting and use known nuisance values.

    ``mu`` and ``e`` are ``n x (J + 1)`` arrays or callables of ``x``.
    ``pi`` defaults to the sample (or population) treatment shares.
    """
    mu = mu(table.x) if callable(mu) else np.asarray(mu, dtype=np.float64)
    e = e(table.x) if callable(e) else np.asarray(e, dtype=np.float64)
    k = table.n_treatments
    if mu.shape != (table.n, k) or e.shape != (table.n, k):
        raise ValueError(f"oracle nuisances must have shape {(table.n, k)}")
    clips = np.zeros(k, dtype=int)
    if floor is not None:
        e, clips = floor_propensities(e, floor)
    pi = estimate_pi(table) if pi is None else np.asarray(pi, dtype=np.float64)
    return CrossFittedNuisances(mu, e, pi, int(clips.sum()), tuple(int(c) for c in clips))


def cross_fit(table: ObservationTable, plan: FoldPlan | None, config: LearnerConfig | None = None,
              floor: float = PROPENSITY_FLOOR) -> CrossFittedNuisances:
    """Cross-fitted nuisance predictions for every row.

    With ``plan=None`` all models are fit once on the full sample and
    predict in-sample (for correctly specified parametric models, where
    cross-fitting is not required).
    """
    config = config or LearnerConfig()
    n, k = table.n, table.n_treatments
    if plan is not None and plan.n != n:
        raise CrossFitError("fold plan does not match the table")
    mu_hat = np.empty((n, k))
    e_hat = np.empty((n, k))
    folds = range(plan.K) if plan is not None else [None]
    out_learner = config.outcome_learner()
    prop_learner = config.propensity_learner()
    for f in folds:
        if f is None:
            train = test = np.arange(n)
        else:
            train, test = plan.train_rows(f), plan.test_rows(f)
        t_train = table.t[train]
        x_train = table.x[train]
        counts = np.bincount(t_train, minlength=k)
        for t in range(k):
            if counts[t] < 2:
                where = f"fold {f}" if f is not None else "the sample"
                raise CrossFitError(
                    f"treatment {table.treatment_labels[t]!r} has {counts[t]} training rows outside "
                    f"{where}; need at least 2"
                )
        for t in range(k):
            rows = t_train == t
            model = out_learner.fit(x_train[rows], table.y[train][rows])
            mu_hat[test, t] = model.predict(table.x[test])
        model = prop_learner.fit(x_train, t_train, k)
        e_hat[test] = model.predict_proba(table.x[test])
    e_hat, clips = floor_propensities(e_hat, floor)
    if clips.sum():
        warnings.warn(f"{int(clips.sum())} propensity predictions floored at {floor}", stacklevel=2)
    return CrossFittedNuisances(mu_hat, e_hat, estimate_pi(table), int(clips.sum()),
                                tuple(int(c) for c in clips),
                                plan.fold_of if plan is not None else None)


__all__ = ["CrossFitError", "CrossFittedNuisances", "FoldPlan", "PROPENSITY_FLOOR", "cross_fit",
           "estimate_pi", "floor_propensities", "make_folds", "oracle_nuisances"]
