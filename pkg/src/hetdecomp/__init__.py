"""Decomposition of treatment effect heterogeneity under a multi-valued effective treatment.

The natural effect of a binary treatment indicator splits into a
share-weighted effect (rATE) and a selection/composition term (Delta),
each estimated from doubly robust pseudo-outcomes and projected on a
basis of heterogeneity variables.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .blp import (
    BasisSpec,
    BlpFit,
    build_basis,
    confidence_interval,
    estimate_all,
    fit_blp,
    loocv_select_basis,
    variance,
    wald_test,
)
from .crossfit import CrossFittedNuisances, cross_fit, make_folds, oracle_nuisances
from .data import ColumnSpec, DataError, ObservationTable, load_table, toy_population
from .diagnostics import apo_table, identity_audit, overlap_report
from .learners import LearnerConfig
from .pipeline import decompose, estimate_nuisances
from .scores import PARAMETERS, ScoreSet, compute_scores, orthogonality_check
from .simulate import McDesign, McResult, generate_dataset, run_study, true_blp_params

__all__ = [
    "BACKEND", "BasisSpec", "BlpFit", "ColumnSpec", "CrossFittedNuisances", "DataError",
    "LearnerConfig", "McDesign", "McResult", "ObservationTable", "PARAMETERS", "ScoreSet",
    "apo_table", "build_basis", "compute_scores", "confidence_interval", "cross_fit", "decompose",
    "estimate_all", "estimate_nuisances", "fit_blp", "generate_dataset", "identity_audit",
    "load_table", "loocv_select_basis", "make_folds", "oracle_nuisances", "orthogonality_check",
    "overlap_report", "run_study", "toy_population", "true_blp_params", "variance", "wald_test",
]
