import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from poprank import BiadjacencyMatrix, MatrixKind


def is_connected(a: np.ndarray) -> bool:
    a = sp.csr_matrix(a)
    graph = sp.bmat([[None, a], [a.T, None]])
    return connected_components(graph, directed=False)[0] == 1


def random_binary(rng, n_users, n_pages, density=0.4, connected=False, distinct=False):
    """Random 0/1 matrix without empty rows/columns (optionally connected,
    optionally with pairwise distinct rows and columns)."""
    while True:
        a = (rng.random((n_users, n_pages)) < density).astype(float)
        if a.sum(axis=0).min() == 0 or a.sum(axis=1).min() == 0:
            continue
        if connected and not is_connected(a):
            continue
        if distinct and (len({r.tobytes() for r in a}) < n_users
                         or len({c.tobytes() for c in a.T}) < n_pages):
            continue
        return a


def binary(a) -> BiadjacencyMatrix:
    return BiadjacencyMatrix.from_dense(a, kind=MatrixKind.BINARY_RCA)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance report ---------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
