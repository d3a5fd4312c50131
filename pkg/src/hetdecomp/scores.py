"""Doubly robust scores and decomposition pseudo-outcomes.

Per row ``i`` and treatment ``t``::

    psi_t   = mu_t + D_t (Y - mu_t) / e_t
    Psi     = m + D (Y - m) / ebar,  ebar = sum_{t>0} e_t,
                                     m = sum_{t>0} mu_t e_t / ebar
    mix     = sum_{t>0} pi_t psi_t / sum_{t>0} pi_t

and the pseudo-outcomes are ``nATE = Psi - psi_0``, ``rATE = mix - psi_0``
and ``Delta = Psi - mix``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .crossfit import CrossFittedNuisances
from .data import ObservationTable

PARAMETERS = ("nATE", "rATE", "Delta")


@dataclass(frozen=True, eq=False)
class ScoreSet:
    psi_t: np.ndarray
    psi_agg: np.ndarray
    pseudo: dict
    pi_hat: np.ndarray

    def __getitem__(self, label):
        return self.pseudo[label]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({label: self.pseudo[label] for label in PARAMETERS})

    def export(self, path):
        self.to_frame().to_csv(path, index=False)


def score_apo(nuis: CrossFittedNuisances, table: ObservationTable) -> np.ndarray:
    """AIPW scores for every average potential outcome, shape ``(n, J + 1)``."""
    if np.any(nuis.e_hat <= 0):
        raise ValueError("propensities must be strictly positive")
    dt = table.indicators()
    resid = table.y[:, None] - nuis.mu_hat
    return nuis.mu_hat + dt * resid / nuis.e_hat


def score_aggregate(nuis: CrossFittedNuisances, table: ObservationTable) -> np.ndarray:
    """Doubly robust score for the mean outcome of the treated group ``D = 1``."""
    e_treated = nuis.e_hat[:, 1:]
    ebar = e_treated.sum(axis=1)
    if np.any(ebar <= 0):
        raise ValueError("aggregate treatment propensity must be positive")
    m = (nuis.mu_hat[:, 1:] * e_treated).sum(axis=1) / ebar
    return m + table.d * (table.y - m) / ebar


def mixture_weights(pi) -> np.ndarray:
    """Population treatment-share weights ``pi_t / sum_{s>0} pi_s`` for ``t > 0``."""
    pi = np.asarray(pi, dtype=np.float64)
    treated = pi[1:].sum()
    if not treated > 0:
        raise ValueError("no treated units: pi_0 = 1")
    return pi[1:] / treated


def pseudo_outcomes(psi_t, psi_agg, pi_hat) -> dict:
    """The three decomposition pseudo-outcomes (Delta built directly, not as a difference)."""
    w = mixture_weights(pi_hat)
    mix = psi_t[:, 1:] @ w
    return {
        "nATE": psi_agg - psi_t[:, 0],
        "rATE": mix - psi_t[:, 0],
        "Delta": psi_agg - mix,
    }


def compute_scores(nuis: CrossFittedNuisances, table: ObservationTable, pi=None) -> ScoreSet:
    pi = nuis.pi_hat if pi is None else np.asarray(pi, dtype=np.float64)
    psi_t = score_apo(nuis, table)
    psi_agg = score_aggregate(nuis, table)
    return ScoreSet(psi_t, psi_agg, pseudo_outcomes(psi_t, psi_agg, pi), pi.copy())


@dataclass(frozen=True)
class OrthogonalityResult:
    steps: tuple
    estimates: dict
    limit: dict

    def max_abs(self) -> float:
        return max(abs(v) for v in self.limit.values())


def population_score_means(table: ObservationTable, mu, e, pi) -> dict:
    """Population (weighted) means of the three pseudo-outcomes."""
    nuis = CrossFittedNuisances(mu, e, pi)
    scores = compute_scores(nuis, table)
    return {label: float(table.mean(scores[label])) for label in PARAMETERS}


def orthogonality_check(population: ObservationTable, mu, e, mu_dir=None, e_dir=None, pi=None,
                        steps=(1e-2, 1e-3, 1e-4)) -> OrthogonalityResult:
    """Gateaux derivatives of the population-mean scores along a nuisance path.

    The path is ``(mu + r (mu_dir - mu), e + r (e_dir - e))``; omitted
    directions stay at the truth. Central differences at each step ``h``
    are combined by Richardson extrapolation over consecutive steps
    (``limit``), which cancels the ``h^2`` error term.
    """
    mu = np.asarray(mu, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    mu_dir = mu if mu_dir is None else np.asarray(mu_dir, dtype=np.float64)
    e_dir = e if e_dir is None else np.asarray(e_dir, dtype=np.float64)
    pi = np.asarray(population.mean(population.indicators()) if pi is None else pi)

    def at(r):
        e_r = e + r * (e_dir - e)
        if np.any(e_r <= 0):
            raise ValueError(f"perturbed propensities nonpositive at r={r}")
        return population_score_means(population, mu + r * (mu_dir - mu), e_r, pi)

    steps = tuple(sorted(steps, reverse=True))
    est = {label: [] for label in PARAMETERS}
    for h in steps:
        up, down = at(h), at(-h)
        for label in PARAMETERS:
            est[label].append((up[label] - down[label]) / (2 * h))
    limit = {}
    for label in PARAMETERS:
        d = est[label]
        if len(d) == 1:
            limit[label] = d[0]
            continue
        extrap = []
        for a, b, ha, hb in zip(d[:-1], d[1:], steps[:-1], steps[1:]):
            ratio2 = (ha / hb) ** 2
            extrap.append((ratio2 * b - a) / (ratio2 - 1))
        limit[label] = extrap[-1]
    return OrthogonalityResult(steps, {k: tuple(v) for k, v in est.items()}, limit)
