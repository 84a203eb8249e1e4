import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poprank import BiadjacencyMatrix, DataError, MatrixKind, binarize, rca_matrix, rca_values


def rca_oracle(v: np.ndarray) -> np.ndarray:
    """Independent quadruple loop over the definition."""
    n_u, n_p = v.shape
    out = np.zeros_like(v, dtype=float)
    for u in range(n_u):
        for p in range(n_p):
            row = 0.0
            for q in range(n_p):
                row += v[u, q]
            col = 0.0
            for w in range(n_u):
                col += v[w, p]
            total = 0.0
            for w in range(n_u):
                for q in range(n_p):
                    total += v[w, q]
            out[u, p] = (v[u, p] / row) / (col / total)
    return out


def counts(shape=None):
    shape = shape or st.tuples(st.integers(1, 10), st.integers(1, 10))
    return shape.flatmap(lambda s: arrays(np.int64, s, elements=st.integers(0, 50))).filter(
        lambda a: a.sum(axis=0).min() > 0 and a.sum(axis=1).min() > 0)


def test_uniform_matrix_is_all_ones():
    v = BiadjacencyMatrix.from_dense([[1, 1], [1, 1]])
    np.testing.assert_array_equal(rca_values(v).toarray(), np.ones((2, 2)))
    np.testing.assert_array_equal(rca_matrix(v).dense(), np.ones((2, 2)))


def test_hand_example():
    v = BiadjacencyMatrix.from_dense([[4, 0], [1, 1]])
    expected = rca_oracle(np.array([[4.0, 0], [1, 1]]))
    np.testing.assert_allclose(expected, [[1.2, 0], [0.6, 3.0]], rtol=1e-15)
    np.testing.assert_allclose(rca_values(v).toarray(), expected, rtol=1e-15)
    m = binarize(rca_values(v))
    assert m.kind is MatrixKind.BINARY_RCA
    np.testing.assert_array_equal(m.dense(), [[1, 0], [0, 1]])


def test_threshold_zero_gives_all_ones():
    v = BiadjacencyMatrix.from_dense([[4, 0], [1, 1]])
    np.testing.assert_array_equal(binarize(rca_values(v), 0.0).dense(), np.ones((2, 2)))
    np.testing.assert_array_equal(binarize(np.array([[0.5, 0.0]]), 0.0).dense(), [[1, 1]])


def test_exactly_threshold_counts_as_one():
    np.testing.assert_array_equal(binarize(np.array([[1.0, 0.999999]])).dense(), [[1, 0]])


def test_zero_marginal_is_an_error():
    with pytest.raises(DataError, match="zero marginal"):
        rca_values(BiadjacencyMatrix.from_dense([[1, 0], [1, 0]]))
    with pytest.raises(DataError, match="zero marginal"):
        rca_values(BiadjacencyMatrix.from_dense([[1, 1], [0, 0]]))


def test_binarize_rejects_negative():
    with pytest.raises(DataError):
        binarize(np.array([[-1.0]]))


@settings(max_examples=150, deadline=None)
@given(counts())
def test_matches_oracle(v):
    got = rca_values(BiadjacencyMatrix.from_dense(v)).toarray()
    np.testing.assert_allclose(got, rca_oracle(v.astype(float)), rtol=1e-12, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(counts())
def test_share_weighted_mean_is_one(v):
    rca = rca_values(BiadjacencyMatrix.from_dense(v)).toarray()
    s = v.sum(axis=0) / v.sum()
    np.testing.assert_allclose(rca @ s, 1.0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(counts(), st.floats(1e-3, 1e3))
def test_scale_invariance(v, c):
    a = BiadjacencyMatrix.from_dense(v)
    b = BiadjacencyMatrix.from_dense(v * c)
    np.testing.assert_allclose(rca_values(a).toarray(), rca_values(b).toarray(), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(counts(), st.data())
def test_row_scaling_only_moves_column_shares(v, data):
    """Scaling one row by c leaves its own shares alone; RCA moves only
    through the column shares, which the oracle recomputes."""
    u = data.draw(st.integers(0, v.shape[0] - 1))
    c = data.draw(st.floats(0.1, 10))
    scaled = v.astype(float)
    scaled[u] *= c
    got = rca_values(BiadjacencyMatrix.from_dense(scaled)).toarray()
    np.testing.assert_allclose(got, rca_oracle(scaled), rtol=1e-12, atol=1e-12)
    own_share = scaled[u] / scaled[u].sum()
    np.testing.assert_allclose(own_share, v[u] / v[u].sum(), rtol=1e-12)
