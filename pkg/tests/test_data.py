
import numpy as np
import pandas as pd
import pytest

from hetdecomp.data import (
    ColumnSpec,
    DataError,
    ObservationTable,
    column_spec_for,
    enumerate_population,
    load_table,
    toy_population,
    write_table,
)


def _table(rng, n=50):
    return ObservationTable.from_arrays(rng.standard_normal(n), rng.integers(0, 3, n),
                                        rng.standard_normal((n, 2)), z_cols=(0,))


def test_binary_indicator_derived_from_treatment(rng):
    tab = _table(rng)
    np.testing.assert_array_equal(tab.d, (tab.t != 0).astype(int))
    assert tab.J == 2 and tab.n_treatments == 3


def test_arrays_are_read_only_copies(rng):
    y = rng.standard_normal(10)
    tab = ObservationTable.from_arrays(y, np.arange(10) % 2, rng.standard_normal((10, 1)))
    assert y.flags.writeable
    with pytest.raises(ValueError):
        tab.y[0] = 1.0


def test_inconsistent_indicator_rejected():
    with pytest.raises(DataError, match="inconsistent"):
        ObservationTable(y=[0.0, 1.0], t=[0, 1], d=[1, 1], x=[[0.0], [1.0]])


def test_missing_level_is_recoded_with_note():
    with pytest.warns(UserWarning, match="no rows"):
        tab = ObservationTable.from_arrays([0.0, 1.0, 2.0], [0, 2, 2], [[0.0], [1.0], [2.0]],
                                           treatment_labels=("a", "b", "c"))
    assert tab.treatment_labels == ("a", "c")
    assert tab.J == 1 and tab.notes


def test_missing_control_rejected():
    with pytest.raises(DataError, match="control"):
        ObservationTable.from_arrays([0.0, 1.0], [1, 2], [[0.0], [1.0]])


def test_nonfinite_rejected():
    with pytest.raises(DataError, match="non-finite"):
        ObservationTable.from_arrays([np.nan, 1.0], [0, 1], [[0.0], [1.0]])


def test_weights_must_sum_to_one(rng):
    tab = _table(rng, 4)
    with pytest.raises(DataError, match="sum to 1"):
        enumerate_population(tab, [1.0, 1.0, 1.0, 1.0])
    pop = enumerate_population(tab, [0.25] * 4)
    assert pop.mean(np.arange(4.0)) == pytest.approx(1.5)


def test_toy_population_shape():
    pop = toy_population()
    assert pop.n == 6
    assert pop.weights.sum() == pytest.approx(1.0, abs=1e-15)
    # P(T = t) marginal: control 1/2, the others 1/4 each
    np.testing.assert_allclose(pop.mean(pop.indicators()), [0.5, 0.25, 0.25], atol=1e-15)


def test_heterogeneity_must_be_confounders():
    with pytest.raises(DataError, match="heterogeneity"):
        ColumnSpec("y", "t", 0, ("a",), ("b",))


def test_csv_round_trip_is_bit_exact(tmp_path, rng):
    tab = ObservationTable.from_arrays(rng.standard_normal(30) / 3, rng.integers(0, 3, 30),
                                       rng.standard_normal((30, 2)) * np.pi, z_cols=(1,),
                                       column_names=("a", "b"), treatment_labels=("0", "1", "2"))
    path = write_table(tab, tmp_path / "t.csv")
    back = load_table(path, column_spec_for(tab))
    np.testing.assert_array_equal(back.y, tab.y)
    np.testing.assert_array_equal(back.x, tab.x)
    np.testing.assert_array_equal(back.t, tab.t)
    assert back.z_cols == tab.z_cols


def test_load_errors_name_the_problem(tmp_path):
    path = tmp_path / "d.csv"
    pd.DataFrame({"t": [0, 1], "x": [0.1, 0.2]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="'?y'?"):
        load_table(path, ColumnSpec("y", "t", 0, ("x",)))
    pd.DataFrame({"y": [1.0, "oops"], "t": [0, 1], "x": [0.1, 0.2]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="non-numeric"):
        load_table(path, ColumnSpec("y", "t", 0, ("x",)))
    pd.DataFrame({"y": [1.0, 2.0], "t": [1, 2], "x": [0.1, 0.2]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="control label"):
        load_table(path, ColumnSpec("y", "t", 0, ("x",)))


def test_string_labels_control_first(tmp_path):
    path = tmp_path / "d.csv"
    pd.DataFrame({"y": [1.0, 2.0, 3.0, 4.0], "t": ["heavy", "none", "light", "none"],
                  "x": [0.0, 1.0, 2.0, 3.0]}).to_csv(path, index=False)
    tab = load_table(path, ColumnSpec("y", "t", "none", ("x",)))
    assert tab.treatment_labels == ("none", "heavy", "light")
    np.testing.assert_array_equal(tab.t, [1, 0, 2, 0])


def test_take_permutes_rows(rng):
    tab = _table(rng, 10)
    perm = rng.permutation(10)
    sub = tab.take(perm)
    np.testing.assert_array_equal(sub.y, tab.y[perm])
