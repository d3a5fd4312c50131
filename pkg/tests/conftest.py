import numpy as np
import pytest

from hetdecomp.crossfit import oracle_nuisances
from hetdecomp.data import toy_nuisances, toy_population
from hetdecomp.scores import compute_scores
from hetdecomp.simulate import McDesign, generate_dataset, outcome_means, propensities


@pytest.fixture(scope="session")
def toy():
    pop = toy_population()
    mu, e = toy_nuisances(pop)
    return pop, mu, e


@pytest.fixture(scope="session")
def toy_scores(toy):
    pop, mu, e = toy
    return compute_scores(oracle_nuisances(pop, mu, e), pop)


@pytest.fixture(scope="session")
def mc_design():
    return McDesign(n=2000, p=3, reps=1, mode="oracle")


@pytest.fixture(scope="session")
def mc_table(mc_design):
    return generate_dataset(mc_design, 12345)


@pytest.fixture(scope="session")
def mc_scores(mc_design, mc_table):
    nuis = oracle_nuisances(mc_table, outcome_means(mc_design, mc_table.n),
                            propensities(mc_table.x[:, 0], mc_design.slopes()))
    return compute_scores(nuis, mc_table)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
