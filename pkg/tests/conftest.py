import numpy as np
import pytest

from opsyslab.core import ToleranceConfig, build_system

E = {}
for i in range(3):
    for j in range(3):
        m = np.zeros((2, 2), dtype=complex)
        if i < 2 and j < 2:
            m[i, j] = 1.0
        E[(i, j)] = m


def unit(d, i, j):
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


@pytest.fixture(scope="session")
def tol():
    return ToleranceConfig()


@pytest.fixture(scope="session")
def full2(tol):
    return build_system(
        [unit(2, i, j) for i in range(2) for j in range(2)],
        tol,
        name="full_matrix(2)",
    )


@pytest.fixture(scope="session")
def offdiag2(tol):
    return build_system([unit(2, 0, 1), unit(2, 1, 0)], tol, name="off_diagonal(2)")


@pytest.fixture(scope="session")
def diag2(tol):
    return build_system([unit(2, 0, 0), unit(2, 1, 1)], tol, name="diag_l_inf(2)")


@pytest.fixture(scope="session")
def diag3(tol):
    return build_system([unit(3, i, i) for i in range(3)], tol, name="diag_l_inf(3)")


@pytest.fixture(scope="session")
def interval01(tol):
    g = np.diag([0.0, 0.5, 1.0]).astype(complex)
    return build_system([g], tol, name="interval[0,1]")


@pytest.fixture(scope="session")
def interval_sym(tol):
    g = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    return build_system([g], tol, name="interval[-1,1]")


@pytest.fixture(scope="session")
def spin2(tol):
    """Span{1, E12+E21}: unital, not diagonal, no fast-path structure."""
    return build_system(
        [np.eye(2, dtype=complex), unit(2, 0, 1) + unit(2, 1, 0)],
        tol,
        name="spin(2)",
    )


@pytest.fixture(scope="session")
def staircase(tol):
    """Diagonal but not a partition span: {(a, a+b, b)}."""
    return build_system(
        [np.diag([1.0, 1.0, 0.0]).astype(complex), np.diag([0.0, 1.0, 1.0]).astype(complex)],
        tol,
        name="staircase(3)",
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
