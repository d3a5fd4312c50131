"""End-to-end decomposition of one dataset: nuisances, scores, projections, diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blp import BasisSpec, BasisSelection, default_candidates, estimate_all, loocv_select_basis
from .crossfit import PROPENSITY_FLOOR, CrossFittedNuisances, cross_fit, make_folds, oracle_nuisances
from .data import ObservationTable
from .diagnostics import (
    OVERLAP_THRESHOLD,
    ApoTable,
    IdentityAudit,
    OverlapReport,
    apo_table,
    identity_audit,
    overlap_report,
)
from .learners import LearnerConfig
from .scores import ScoreSet, compute_scores

# Named substreams of the run seed.
STREAM_FOLDS = 1
STREAM_LEARNERS = 2


def substream_seed(seed: int, stream: int) -> int:
    """A 32-bit seed for one named use of the run seed."""
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class Decomposition:
    table: ObservationTable
    nuisances: CrossFittedNuisances
    scores: ScoreSet
    fits: dict
    overlap: OverlapReport
    apo: ApoTable
    audit: IdentityAudit
    selection: BasisSelection | None = None


def estimate_nuisances(table: ObservationTable, learners: LearnerConfig | None = None, folds: int = 2,
                       seed: int = 0, stratified: bool = True,
                       floor: float = PROPENSITY_FLOOR) -> CrossFittedNuisances:
    """Cross-fit with ``folds`` folds; ``folds=0`` fits once on the full sample."""
    learners = learners or LearnerConfig(seed=substream_seed(seed, STREAM_LEARNERS))
    plan = None
    if folds:
        plan = make_folds(table.n, folds, substream_seed(seed, STREAM_FOLDS),
                          stratify_by=table.t if stratified else None)
    return cross_fit(table, plan, learners, floor)


def decompose(table: ObservationTable, nuisances: CrossFittedNuisances, basis="loocv",
              candidates=None, overlap_threshold: float = OVERLAP_THRESHOLD) -> Decomposition:
    """Scores plus projections on ``basis`` (with diagnostics) for given nuisances.

    ``basis`` is a :class:`BasisSpec` or ``"loocv"`` to pick a B-spline
    basis by leave-one-out CV (the most flexible per-parameter winner is
    used for all three parameters).
    """
    scores = compute_scores(nuisances, table)
    selection = None
    if isinstance(basis, str):
        if basis != "loocv":
            raise ValueError("basis must be a BasisSpec or 'loocv'")
        selection = loocv_select_basis(scores.pseudo, table, candidates or default_candidates())
        basis = selection.common
    fits = estimate_all(scores, table, basis)
    labels = table.treatment_labels
    return Decomposition(table, nuisances, scores, fits,
                         overlap_report(nuisances, labels, overlap_threshold),
                         apo_table(scores, labels, table), identity_audit(fits), selection)


def decompose_with_oracle(table: ObservationTable, mu, e, basis: BasisSpec, pi=None) -> Decomposition:
    return decompose(table, oracle_nuisances(table, mu, e, pi), basis)
