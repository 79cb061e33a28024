import numpy as np
import pytest
from hypothesis import strategies as st

from patchhopf import as_model, find_dstar
from patchhopf.catalog import A1, A2, A3, A4, M2, M4, SYMMETRIC

B3 = np.array([[-1.5, 0.5, 0.3], [0.7, -1.0, 0.4], [0.2, 0.3, -1.2]])
M3 = np.array([1.0, 1.5, 2.0])


@pytest.fixture(scope="session")
def sym():
    return as_model(SYMMETRIC, [1.0, 1.0])


@pytest.fixture(scope="session")
def sym_perron():
    return find_dstar(SYMMETRIC, [1.0, 1.0])


@pytest.fixture(scope="session")
def a3():
    return as_model(A3, M2)


@pytest.fixture(scope="session")
def a3_perron():
    return find_dstar(A3, M2)


@pytest.fixture(scope="session")
def a4():
    return as_model(A4, M2)


@pytest.fixture(scope="session")
def a1():
    return as_model(A1, M4)


@pytest.fixture(scope="session")
def b3():
    return as_model(B3, M3)


def random_valid(rng, n):
    """Irreducible, essentially nonnegative, with loss in at least one column."""
    off = rng.uniform(0.05, 2.0, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    # a directed ring keeps the positivity graph strongly connected
    for j in range(n):
        off[(j + 1) % n, j] = max(off[(j + 1) % n, j], 0.1)
    np.fill_diagonal(off, 0.0)
    loss = rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.5)
    loss[rng.integers(n)] += rng.uniform(0.1, 1.0)
    A = off - np.diag(off.sum(axis=0) + loss)
    m = rng.uniform(0.2, 5.0, n)
    return A, m


@st.composite
def valid_models(draw, max_n=6):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_valid(np.random.default_rng(seed), n)


__all__ = ["ACCEPTANCE", "A1", "A2", "A3", "A4", "M2", "M4", "SYMMETRIC", "B3", "M3", "random_valid", "valid_models"]


# PASS/FAIL lines from tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
