import json

import numpy as np
import pytest

from hetdecomp.blp import BasisSpec, estimate_all
from hetdecomp.crossfit import CrossFittedNuisances, floor_propensities, oracle_nuisances
from hetdecomp.data import ObservationTable
from hetdecomp.diagnostics import (
    QUANTILE_NAMES,
    apo_table,
    diagnostics_dict,
    dumps,
    identity_audit,
    overlap_report,
    score_additivity,
)
from hetdecomp.scores import ScoreSet, compute_scores, pseudo_outcomes
from hetdecomp.simulate import McDesign, generate_dataset, outcome_means, propensities


def test_randomized_rescaled_scores_are_one():
    pi = np.array([0.5, 0.3, 0.2])
    nuis = CrossFittedNuisances(np.zeros((50, 3)), np.tile(pi, (50, 1)), pi)
    rep = overlap_report(nuis)
    np.testing.assert_allclose(rep.quantiles, 1.0, rtol=1e-14)
    assert rep.flags == ()


def test_quantiles_nondecreasing(mc_table, mc_design):
    nuis = oracle_nuisances(mc_table, outcome_means(mc_design, mc_table.n),
                            propensities(mc_table.x[:, 0], mc_design.slopes()))
    rep = overlap_report(nuis, mc_table.treatment_labels)
    assert np.all(np.diff(rep.quantiles, axis=1) >= 0)
    assert rep.quantiles[:, 0].min() > 0


def test_rescaled_minimum_matches_closed_form(mc_table, mc_design):
    # treatment 1: e_1(x) = e^x / (2 + e^x) is increasing, so its minimum sits at min x
    e = propensities(mc_table.x[:, 0], mc_design.slopes())
    nuis = oracle_nuisances(mc_table, outcome_means(mc_design, mc_table.n), e)
    rep = overlap_report(nuis)
    xmin = mc_table.x[:, 0].min()
    expected = np.exp(xmin) / (2 + np.exp(xmin)) / nuis.pi_hat[1]
    assert rep.quantiles[1, 0] == pytest.approx(expected, rel=1e-12)


def test_floored_treatment_flags(rng):
    n = 200
    e = rng.dirichlet(np.full(3, 5.0), n)
    e[:20, 2] = 0.0  # 10% of rows
    e, clips = floor_propensities(e, 1e-6)
    nuis = CrossFittedNuisances(np.zeros((n, 3)), e, np.array([0.4, 0.3, 0.3]), int(clips.sum()),
                                tuple(int(c) for c in clips))
    rep = overlap_report(nuis, ("a", "b", "c"))
    assert rep.clip_count == 20
    assert rep.clip_by_treatment == (0, 0, 20)
    assert any("c" in f and "floored" in f for f in rep.flags)
    assert any("c" in f and "1% quantile" in f for f in rep.flags)


def test_threshold_configurable():
    pi = np.array([0.5, 0.5])
    e = np.column_stack([np.linspace(0.1, 0.9, 101), np.linspace(0.9, 0.1, 101)])
    nuis = CrossFittedNuisances(np.zeros((101, 2)), e, pi)
    assert overlap_report(nuis, threshold=0.05).flags == ()
    assert len(overlap_report(nuis, threshold=0.5).flags) == 2


def test_overlap_outputs(mc_table, mc_design):
    nuis = oracle_nuisances(mc_table, outcome_means(mc_design, mc_table.n),
                            propensities(mc_table.x[:, 0], mc_design.slopes()))
    rep = overlap_report(nuis, mc_table.treatment_labels)
    df = rep.to_frame()
    assert list(df.columns) == ["treatment", *QUANTILE_NAMES]
    assert "no flags" in rep.to_text()
    json.loads(dumps(rep.to_dict()))


def test_toy_apo_exact(toy, toy_scores):
    pop = toy[0]
    apo = apo_table(toy_scores, pop.treatment_labels, pop)
    np.testing.assert_allclose(apo.mean, [0.0, -1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(apo.diff, [0.0, -1.0, 1.0], atol=1e-12)


def test_constant_world_apo(rng):
    n = 30
    t = np.arange(n) % 3
    table = ObservationTable.from_arrays(np.full(n, 7.0), t, rng.normal(size=(n, 1)))
    nuis = CrossFittedNuisances(np.full((n, 3), 7.0), rng.dirichlet(np.ones(3), n), np.full(3, 1 / 3))
    apo = apo_table(compute_scores(nuis, table))
    np.testing.assert_allclose(apo.mean, 7.0, atol=1e-12)
    np.testing.assert_allclose(apo.se, 0.0, atol=1e-12)


def test_apo_se_is_sd_over_root_n(mc_scores):
    apo = apo_table(mc_scores)
    psi = mc_scores.psi_t
    np.testing.assert_allclose(apo.se, psi.std(axis=0, ddof=1) / np.sqrt(psi.shape[0]), rtol=1e-12)


def test_simulated_effect_recovered():
    design = McDesign(n=5000, p=2, reps=1, mode="oracle")
    table = generate_dataset(design, 31)
    nuis = oracle_nuisances(table, outcome_means(design, table.n), propensities(table.x[:, 0], design.slopes()))
    apo = apo_table(compute_scores(nuis, table))
    assert abs(apo.diff[1] - design.tau) <= 3 * apo.diff_se[1]


def test_identity_audit_passes(mc_table, mc_scores):
    audit = identity_audit(estimate_all(mc_scores, mc_table, BasisSpec("polynomial", degree=1)))
    assert audit.passed
    assert score_additivity(mc_scores) <= 1e-12


def test_identity_audit_toy_exact(toy, toy_scores):
    audit = identity_audit(estimate_all(toy_scores, toy[0], BasisSpec("group_dummies")))
    assert audit.max_deviation == 0.0


def test_identity_audit_catches_mismatched_shares(mc_table, mc_scores):
    good = pseudo_outcomes(mc_scores.psi_t, mc_scores.psi_agg, mc_scores.pi_hat)
    bad = pseudo_outcomes(mc_scores.psi_t, mc_scores.psi_agg, np.array([0.2, 0.2, 0.6]))
    mixed = ScoreSet(mc_scores.psi_t, mc_scores.psi_agg,
                     {"nATE": good["nATE"], "rATE": good["rATE"], "Delta": bad["Delta"]}, mc_scores.pi_hat)
    audit = identity_audit(estimate_all(mixed, mc_table, BasisSpec("polynomial", degree=1)))
    assert not audit.passed


def test_identity_audit_rejects_mismatched_bases(mc_table, mc_scores):
    a = estimate_all(mc_scores, mc_table, BasisSpec("polynomial", degree=1))
    b = estimate_all(mc_scores, mc_table, BasisSpec("intercept"))
    with pytest.raises(ValueError, match="common basis"):
        identity_audit({"nATE": a["nATE"], "rATE": a["rATE"], "Delta": b["Delta"]})


def test_reports_are_deterministic(mc_table, mc_scores, mc_design):
    def render():
        nuis = oracle_nuisances(mc_table, outcome_means(mc_design, mc_table.n),
                                propensities(mc_table.x[:, 0], mc_design.slopes()))
        scores = compute_scores(nuis, mc_table)
        return dumps(diagnostics_dict(overlap_report(nuis), apo_table(scores)))

    assert render() == render()
