import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetdecomp.learners import (
    ConvergenceError,
    EnsembleRegressor,
    FrequencyClassifier,
    LassoRegressor,
    LearnerConfig,
    MeanRegressor,
    MultinomialLogitClassifier,
    RankDeficientError,
    SeparationError,
    cross_validate,
    fit_ensemble,
    fit_lasso,
    fit_multinomial_logit,
    fit_ridge,
    lasso_kkt_violation,
    lasso_lambda_max,
    lasso_objective,
    multinomial_deviance,
    simplex_least_squares,
    simplex_log_score,
)
from oracles import active_set_oracle, standardized, zoom_grid_oracle


@pytest.mark.parametrize("lam", [0.02, 0.2, 0.6])
def test_lasso_matches_bruteforce_on_three_coefficients(rng, lam):
    x = rng.standard_normal((80, 3))
    y = x @ np.array([1.0, -0.5, 0.0]) + 0.5 * rng.standard_normal(80)
    fit = fit_lasso(x, y, lam, tol=1e-12, max_iter=100_000)
    xs, yc = standardized(x, y)
    exact = active_set_oracle(xs, yc, lam)
    grid = zoom_grid_oracle(xs, yc, lam)
    assert abs(lasso_objective(x, y, fit) - exact) <= 1e-8
    assert abs(grid - exact) <= 1e-8


def test_lasso_kkt_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(20):
        n, p = rng.integers(30, 120), rng.integers(2, 25)
        x = rng.standard_normal((n, p))
        y = x[:, 0] - x[:, 1] + rng.standard_normal(n)
        lam = lasso_lambda_max(x, y) * rng.uniform(0.01, 0.9)
        fit = fit_lasso(x, y, lam, tol=1e-10, max_iter=100_000)
        assert lasso_kkt_violation(x, y, fit) <= 1e-6


def test_lasso_zero_at_lambda_max(rng):
    x = rng.standard_normal((50, 5))
    y = x[:, 0] + rng.standard_normal(50)
    fit = fit_lasso(x, y, lasso_lambda_max(x, y))
    assert np.all(fit.coef == 0)
    assert fit.intercept == pytest.approx(y.mean())


def test_lasso_nonconvergence_carries_gap(rng):
    x = rng.standard_normal((60, 30))
    x[:, 1] = x[:, 0] + 1e-3 * rng.standard_normal(60)
    y = x[:, 0] + rng.standard_normal(60)
    with pytest.raises(ConvergenceError) as info:
        fit_lasso(x, y, 1e-4, tol=1e-14, max_iter=2)
    assert info.value.gap is not None and info.value.gap >= 0


def test_ridge_matches_augmented_least_squares(rng):
    x = rng.standard_normal((40, 4)) * [1, 2, 3, 4] + 5
    y = rng.standard_normal(40)
    lam = 3.0
    fit = fit_ridge(x, y, lam)
    xs, yc = standardized(x, y)
    aug_x = np.vstack([xs, np.sqrt(lam) * np.eye(4)])
    aug_y = np.concatenate([yc, np.zeros(4)])
    ref = np.linalg.lstsq(aug_x, aug_y, rcond=None)[0]
    np.testing.assert_allclose(fit.coef_std, ref, atol=1e-12)


def test_ols_equals_lstsq_and_rank_check(rng):
    x = rng.standard_normal((30, 3))
    y = 1 + x @ [1.0, 2.0, 3.0] + rng.standard_normal(30)
    fit = fit_ridge(x, y, 0.0)
    ref = np.linalg.lstsq(np.column_stack([np.ones(30), x]), y, rcond=None)[0]
    np.testing.assert_allclose([fit.intercept, *fit.coef], ref, atol=1e-10)
    with pytest.raises(RankDeficientError, match="lambda > 0"):
        fit_ridge(np.column_stack([x, x[:, 0] * 2]), y, 0.0)


def test_constant_column_is_ignored(rng):
    x = np.column_stack([rng.standard_normal(40), np.full(40, 3.0)])
    y = x[:, 0] + rng.standard_normal(40)
    fit = fit_lasso(x, y, 0.01)
    assert fit.coef[1] == 0.0


@given(seed=st.integers(0, 10_000), lam=st.sampled_from([0.0, 0.001, 0.05]),
       penalty=st.sampled_from(["l1", "l2"]))
@settings(max_examples=25, deadline=None)
def test_logit_probabilities_sum_to_one(seed, lam, penalty):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (150, 3))
    t = rng.integers(0, 4, 150)
    fit = fit_multinomial_logit(x, t, lam, penalty, n_classes=4)
    probs = fit.predict_proba(rng.uniform(-50, 50, (200, 3)))
    assert np.all(probs >= 0)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-12


def test_logit_l1_objective_is_monotone(rng):
    x = rng.uniform(-1, 1, (300, 5))
    t = rng.integers(0, 3, 300)
    fit = fit_multinomial_logit(x, t, 0.01, "l1", track_objective=True)
    trace = np.array(fit.objective_trace)
    assert trace.size > 2 and np.all(np.diff(trace) <= 0)


def test_logit_recovers_true_model():
    rng = np.random.default_rng(3)
    n = 20_000
    x = rng.uniform(-1, 1, (n, 1))
    eta = np.column_stack([np.zeros(n), 1.0 * x[:, 0], np.zeros(n)])
    prob = np.exp(eta) / np.exp(eta).sum(axis=1, keepdims=True)
    t = (rng.uniform(size=n)[:, None] > prob.cumsum(axis=1)).sum(axis=1)
    fit = fit_multinomial_logit(x, t, 0.0)
    np.testing.assert_allclose(fit.coef[1:, 1], [1.0, 0.0], atol=0.08)


def test_unpenalized_logit_detects_separation():
    x = np.linspace(-1, 1, 40).reshape(-1, 1)
    t = (x[:, 0] > 0).astype(int)
    with pytest.raises(SeparationError):
        fit_multinomial_logit(x, t, 0.0)


def test_logit_intercept_only_matches_frequencies(rng):
    t = rng.integers(0, 3, 200)
    fit = fit_multinomial_logit(np.empty((200, 0)), t, 0.0)
    np.testing.assert_allclose(fit.predict_proba(np.empty((1, 0)))[0],
                               np.bincount(t) / 200, atol=1e-8)


def test_cv_picks_larger_lambda_on_ties(rng):
    x = rng.standard_normal((60, 3))
    y = rng.standard_normal(60)
    top = lasso_lambda_max(x, y)
    res = cross_validate("lasso", x, y, grid=[top * 4, top * 2, top], folds=3)
    # every grid value zeroes all slopes in every fold, so losses tie exactly
    assert res.lam == top * 4


def test_cv_lasso_selects_sparse_signal(rng):
    x = rng.standard_normal((300, 10))
    y = 2 * x[:, 0] + rng.standard_normal(300)
    res = cross_validate("lasso", x, y)
    fit = fit_lasso(x, y, res.lam)
    assert abs(fit.coef[0] - 2) < 0.35
    assert np.count_nonzero(fit.coef[1:]) <= 5


def test_simplex_weights(rng):
    target = rng.standard_normal(100)
    preds = np.column_stack([target, rng.standard_normal(100)])
    w = simplex_least_squares(preds, target)
    assert w.sum() == pytest.approx(1.0) and w[0] > 0.99
    probs = np.column_stack([np.full(50, 0.9), np.full(50, 0.1)])
    w2 = simplex_log_score(probs)
    assert w2[0] > 0.99


def test_ensemble_identical_members_get_uniform_weights(rng):
    x = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    fit = fit_ensemble([MeanRegressor(), MeanRegressor()], x, y)
    np.testing.assert_allclose(fit.weights, [0.5, 0.5])
    t = rng.integers(0, 3, 40)
    cfit = fit_ensemble([FrequencyClassifier(), FrequencyClassifier()], x, t, n_classes=3)
    np.testing.assert_allclose(cfit.weights, [0.5, 0.5])
    assert np.allclose(cfit.predict_proba(x).sum(axis=1), 1.0)


def test_ensemble_prefers_informative_member(rng):
    x = rng.standard_normal((200, 3))
    y = 3 * x[:, 0] + 0.1 * rng.standard_normal(200)
    fit = EnsembleRegressor([MeanRegressor(), LassoRegressor()]).fit(x, y)
    assert fit.weights[1] > 0.9


def test_deviance_of_intercept_model_is_entropy(rng):
    t = rng.integers(0, 3, 300)
    fit = fit_multinomial_logit(np.empty((300, 0)), t, 0.0)
    freq = np.bincount(t) / 300
    assert multinomial_deviance(fit, np.empty((300, 0)), t) == pytest.approx(-(freq * np.log(freq)).sum())


def test_learner_config_validates():
    with pytest.raises(ValueError, match="outcome"):
        LearnerConfig(outcome="forest")
    cfg = LearnerConfig(propensity="logit", propensity_columns=(0,))
    learner = cfg.propensity_learner()
    assert "logit" in learner.name
    assert isinstance(learner.learner, MultinomialLogitClassifier)
