from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from hetdecomp.simulate import (
    McDesign,
    adaptive_simpson,
    generate_dataset,
    population_shares,
    propensities,
    run_study,
    true_blp_params,
)


def _quad_truth(design):
    slopes = design.slopes()

    def e(v):
        return propensities(np.array([v]), slopes)[0]

    pi = [integrate.quad(lambda v, j=j: e(v)[j], -1, 1, epsabs=1e-13)[0] / 2 for j in range(design.J + 1)]
    g = lambda v: design.tau * e(v)[1] / (1 - e(v)[0])  # noqa: E731
    alpha = integrate.quad(g, -1, 1, epsabs=1e-13)[0] / 2
    beta = 3 * integrate.quad(lambda v: g(v) * v, -1, 1, epsabs=1e-13)[0] / 2
    r_alpha = design.tau * pi[1] / (1 - pi[0])
    return {"rATE": (r_alpha, 0.0), "nATE": (alpha, beta), "Delta": (alpha - r_alpha, beta)}


def test_truth_matches_independent_quadrature():
    design = McDesign()
    ours, ref = true_blp_params(design), _quad_truth(design)
    for label in ours:
        np.testing.assert_allclose(ours[label], ref[label], atol=1e-8)


def test_truth_frozen_values():
    truth = true_blp_params(McDesign())
    assert truth["nATE"][0] == pytest.approx(5.0, abs=1e-9)
    assert truth["nATE"][1] == pytest.approx(2.383279514926789, abs=1e-8)
    assert truth["rATE"][0] == pytest.approx(5.127070092234289, abs=1e-8)
    assert truth["Delta"][0] == pytest.approx(-0.127070092234289, abs=1e-8)


def test_truth_scales_with_tau():
    base = true_blp_params(McDesign())
    for tau in (0.0, 3.5):
        scaled = true_blp_params(McDesign(tau=tau))
        for label in base:
            np.testing.assert_allclose(scaled[label], np.array(base[label]) * tau / 10, atol=1e-9)


def test_adaptive_simpson_polynomial_and_smooth():
    assert adaptive_simpson(lambda v: v**3 - v + 2, -1, 1) == pytest.approx(4.0, abs=1e-12)
    assert adaptive_simpson(np.exp, 0, 1, tol=1e-12) == pytest.approx(np.e - 1, abs=1e-11)


def test_zero_slope_gives_equal_propensities():
    design = McDesign(n=500, p=2, beta=(0.0, 0.0), reps=1)
    table = generate_dataset(design, 0)
    np.testing.assert_allclose(propensities(table.x[:, 0], design.slopes()), 1 / 3, rtol=1e-15)
    np.testing.assert_allclose(population_shares(design), 1 / 3, atol=1e-12)


def test_class_shares_at_large_n():
    design = McDesign(n=100_000, p=1, reps=1)
    table = generate_dataset(design, 4)
    empirical = np.bincount(table.t, minlength=3) / table.n
    np.testing.assert_allclose(empirical, population_shares(design), atol=0.005)


def test_dataset_shape_and_ranges():
    design = McDesign(n=300, p=4, reps=1)
    table = generate_dataset(design, 1)
    assert table.x.shape == (300, 4)
    assert table.x.min() >= -1 and table.x.max() <= 1
    assert table.treatment_labels == ("0", "1", "2")
    assert table.z_cols == (0,)


def test_zero_effect_leaves_outcomes_untouched():
    design = McDesign(n=20_000, p=1, tau=0.0, reps=1)
    table = generate_dataset(design, 8)
    means = [table.y[table.t == t].mean() for t in range(3)]
    assert np.ptp(means) < 0.1


def test_same_seed_same_data():
    design = McDesign(n=50, p=2, reps=1)
    a, b = generate_dataset(design, 42), generate_dataset(design, 42)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.t, b.t)


def test_invalid_mode_lists_choices():
    with pytest.raises(ValueError, match="oracle, parametric, dml"):
        McDesign(mode="bootstrap")


def test_beta_length_checked():
    with pytest.raises(ValueError, match="J=2"):
        McDesign(beta=(1.0,))


def test_study_is_deterministic_and_worker_independent():
    design = McDesign(n=300, p=3, reps=12, mode="parametric", seed=5)
    a = run_study(design)
    b = run_study(design)
    assert a == b
    assert a.to_dict() == b.to_dict()
    c = run_study(replace(design, threads=2))
    assert c.to_dict() == a.to_dict()


def test_coverage_in_unit_interval():
    res = run_study(McDesign(n=300, p=2, reps=20, mode="oracle", seed=3))
    assert res.reps_ok == 20 and res.failures == 0
    assert all(0.0 <= v <= 1.0 for v in res.coverage.values())
    table = res.table()
    assert list(table.columns) == ["p", "coefficient", "rATE", "nATE", "Delta"]


@pytest.mark.filterwarnings("ignore:cannot stratify")
def test_failures_are_counted_not_raised():
    # n=6 leaves some treatment cells with fewer than two rows in most reps
    res = run_study(McDesign(n=6, p=2, reps=10, mode="dml", seed=0))
    assert res.failures > 0
    assert res.reps_ok + res.failures == 10
    assert res.failure_messages


def test_seed_split_self_consistency():
    # two disjoint seed blocks of oracle reps agree within 3 binomial SDs of each other
    r = 300
    a = run_study(McDesign(n=400, p=2, reps=r, mode="oracle", seed=100))
    b = run_study(McDesign(n=400, p=2, reps=r, mode="oracle", seed=200))
    bound = 3 * np.sqrt(2 * 0.95 * 0.05 / r)
    for key in a.coverage:
        assert abs(a.coverage[key] - b.coverage[key]) <= bound
