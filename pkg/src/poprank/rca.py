"""Balassa revealed comparative advantage and its binarization."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import BiadjacencyMatrix, DataError, MatrixKind


def rca_values(v: BiadjacencyMatrix) -> sp.csr_matrix:
    """Elementwise RCA of a raw-count matrix.

    ``RCA[u, p] = (V[u, p] / sum_p' V[u, p']) / (sum_u' V[u', p] / sum V)``.
    Returned with the same sparsity pattern as ``v.weights``.
    """
    w = v.weights
    row = np.asarray(w.sum(axis=1)).ravel()
    col = np.asarray(w.sum(axis=0)).ravel()
    total = row.sum()
    if total <= 0 or (row == 0).any() or (col == 0).any():
        raise DataError("undefined RCA: zero marginal")
    out = w.copy()
    out.data = out.data.copy()
    row_of = np.repeat(np.arange(w.shape[0]), np.diff(w.indptr))
    out.data = (out.data / row[row_of]) / (col[out.indices] / total)
    return out


def binarize(rca, threshold: float = 1.0, users=None, pages=None) -> BiadjacencyMatrix:
    """``M[u, p] = 1`` iff ``RCA[u, p] >= threshold``.

    ``rca`` may be dense or sparse. With ``threshold <= 0`` every entry,
    including structural zeros, qualifies.
    """
    if sp.issparse(rca):
        r = sp.csr_matrix(rca, dtype=float)
        data = r.data
    else:
        r = np.atleast_2d(np.asarray(rca, dtype=float))
        data = r
    if not np.all(np.isfinite(data)) or (data.size and data.min() < 0):
        raise DataError("RCA values must be finite and nonnegative")
    n_u, n_p = r.shape
    if threshold <= 0:
        m = sp.csr_matrix(np.ones((n_u, n_p)))
    elif sp.issparse(r):
        m = r.copy()
        m.data = (m.data >= threshold).astype(float)
        m.eliminate_zeros()
    else:
        m = sp.csr_matrix((r >= threshold).astype(float))
    users = tuple(users) if users is not None else tuple(f"u{i}" for i in range(n_u))
    pages = tuple(pages) if pages is not None else tuple(f"p{j}" for j in range(n_p))
    return BiadjacencyMatrix(users, pages, m, MatrixKind.BINARY_RCA)


def rca_matrix(v: BiadjacencyMatrix, threshold: float = 1.0) -> BiadjacencyMatrix:
    """Binary RCA matrix of ``v`` carrying the same id maps."""
    return binarize(rca_values(v), threshold, v.user_index, v.page_index)
