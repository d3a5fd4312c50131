"""Nuisance learners: ridge, lasso, penalized multinomial logit, stacking."""
from dataclasses import dataclass

from .estimators import (
    ConstantFit,
    EnsembleClassifier,
    EnsembleFit,
    EnsembleRegressor,
    FrequencyClassifier,
    LassoRegressor,
    MeanRegressor,
    MultinomialLogitClassifier,
    OLSRegressor,
    OnColumns,
    RidgeRegressor,
    fit_ensemble,
    simplex_least_squares,
    simplex_log_score,
)
from .linear import (
    ConvergenceError,
    LinearFit,
    RankDeficientError,
    fit_lasso,
    fit_ols,
    fit_ridge,
    lasso_gap,
    lasso_kkt_violation,
    lasso_lambda_max,
    lasso_objective,
    soft_threshold,
)
from .logit import (
    MultinomialLogitFit,
    SeparationError,
    fit_multinomial_logit,
    logit_lambda_max,
    multinomial_deviance,
)
from .selection import CVResult, cross_validate, default_grid

OUTCOME_LEARNERS = ("mean", "ols", "ridge", "lasso", "ensemble")
PROPENSITY_LEARNERS = ("frequency", "logit", "logit_l1", "logit_l2", "ensemble")


@dataclass(frozen=True)
class LearnerConfig:
    """Which learners estimate the outcome means and the propensities."""

    outcome: str = "lasso"
    propensity: str = "logit_l1"
    cv_folds: int = 5
    ensemble_folds: int = 2
    grid: tuple | None = None
    tol: float = 1e-7
    max_iter: int = 10_000
    seed: int = 0
    propensity_columns: tuple | None = None
    outcome_columns: tuple | None = None

    def __post_init__(self):
        if self.outcome not in OUTCOME_LEARNERS:
            raise ValueError(f"unknown outcome learner {self.outcome!r}; choose from {OUTCOME_LEARNERS}")
        if self.propensity not in PROPENSITY_LEARNERS:
            raise ValueError(
                f"unknown propensity learner {self.propensity!r}; choose from {PROPENSITY_LEARNERS}"
            )
        if self.cv_folds < 2 or self.ensemble_folds < 2:
            raise ValueError("fold counts must be at least 2")

    def outcome_learner(self):
        grid = self.grid
        learner = {
            "mean": lambda: MeanRegressor(),
            "ols": lambda: OLSRegressor(),
            "ridge": lambda: RidgeRegressor(grid=grid, cv=self.cv_folds, seed=self.seed),
            "lasso": lambda: LassoRegressor(grid=grid, cv=self.cv_folds, seed=self.seed,
                                            tol=self.tol, max_iter=self.max_iter),
            "ensemble": lambda: EnsembleRegressor(
                [MeanRegressor(), RidgeRegressor(cv=self.cv_folds, seed=self.seed),
                 LassoRegressor(cv=self.cv_folds, seed=self.seed, tol=self.tol,
                                max_iter=self.max_iter)],
                folds=self.ensemble_folds, seed=self.seed),
        }[self.outcome]()
        if self.outcome_columns is not None:
            learner = OnColumns(learner, tuple(self.outcome_columns))
        return learner

    def propensity_learner(self):
        grid = self.grid
        learner = {
            "frequency": lambda: FrequencyClassifier(),
            "logit": lambda: MultinomialLogitClassifier("l2", lam=0.0),
            "logit_l1": lambda: MultinomialLogitClassifier("l1", grid=grid, cv=self.cv_folds,
                                                           seed=self.seed),
            "logit_l2": lambda: MultinomialLogitClassifier("l2", grid=grid, cv=self.cv_folds,
                                                           seed=self.seed),
            "ensemble": lambda: EnsembleClassifier(
                [FrequencyClassifier(),
                 MultinomialLogitClassifier("l1", cv=self.cv_folds, seed=self.seed),
                 MultinomialLogitClassifier("l2", cv=self.cv_folds, seed=self.seed)],
                folds=self.ensemble_folds, seed=self.seed),
        }[self.propensity]()
        if self.propensity_columns is not None:
            learner = OnColumns(learner, tuple(self.propensity_columns))
        return learner


__all__ = [
    "CVResult", "ConstantFit", "ConvergenceError", "EnsembleClassifier", "EnsembleFit",
    "EnsembleRegressor", "FrequencyClassifier", "LassoRegressor", "LearnerConfig", "LinearFit",
    "MeanRegressor", "MultinomialLogitClassifier", "MultinomialLogitFit", "OLSRegressor",
    "OnColumns", "RankDeficientError", "RidgeRegressor", "SeparationError", "cross_validate",
    "default_grid", "fit_ensemble", "fit_lasso", "fit_multinomial_logit", "fit_ols", "fit_ridge",
    "lasso_gap", "lasso_kkt_violation", "lasso_lambda_max", "lasso_objective", "logit_lambda_max",
    "multinomial_deviance", "simplex_least_squares", "simplex_log_score", "soft_threshold",
]
