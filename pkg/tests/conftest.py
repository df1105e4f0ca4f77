"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from amgkit import SparseMatrix


def random_sparse(rng, n, m=None, density=0.1, ensure_diag=False):
    """Random sparse matrix with entries in [-1, 1)."""
    m = n if m is None else m
    a = sp.random(n, m, density=density, random_state=rng, format="csr",
                  data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
    if ensure_diag:
        a = a + sp.eye(n, m, format="csr")
    a.sum_duplicates()
    a.sort_indices()
    a.eliminate_zeros()
    return SparseMatrix.from_scipy(a)


def random_spd(rng, n, density=0.1):
    """Random sparse SPD matrix: B Bᵀ plus a diagonal shift."""
    b = sp.random(n, n, density=density, random_state=rng, format="csr",
                  data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
    a = (b @ b.T).tocsr()
    a = a + sp.eye(n, format="csr") * (0.1 + float(np.abs(a.diagonal()).max()) * 1e-3)
    a.sum_duplicates()
    a.sort_indices()
    return SparseMatrix.from_scipy(a)


def poisson1d(n):
    """Tridiagonal [-1, 2, -1] operator on n interior nodes."""
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    a = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    return SparseMatrix.from_scipy(a)


def poisson2d(n):
    """Standard 5-point Laplacian on an n-by-n interior grid."""
    one = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                   [-1, 0, 1], format="csr")
    eye = sp.eye(n, format="csr")
    a = (sp.kron(one, eye) + sp.kron(eye, one)).tocsr()
    a.sort_indices()
    return SparseMatrix.from_scipy(a)


def gapped_spd(rng, n, lows=(1e-3, 4.2e-3, 2.1e-2)):
    """SPD matrix with a few isolated small eigenvalues below a O(1) bulk."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.sort(np.concatenate([lows, rng.uniform(1.0, 3.0, n - len(lows))]))
    dense = (q * lam) @ q.T
    return SparseMatrix.from_dense((dense + dense.T) / 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# A 13-node planar graph used by the interpolation-set tests.  Node 8 ("i")
# is the fine node under scrutiny; its strong fine neighbours each need a
# common coarse point with it.  Labels follow the sketch the fixture was
# drawn from so the expected sets are easy to audit by hand.
COVER_GRAPH_LABELS = ["m", "s", "k", "n", "p", "i", "j", "r", "o", "q", "l", "t", "u"]
COVER_GRAPH_EDGES = [
    ("m", "s"), ("m", "p"), ("m", "k"),
    ("s", "k"), ("s", "n"),
    ("p", "k"), ("p", "i"), ("p", "o"),
    ("k", "n"), ("k", "i"), ("k", "j"),
    ("n", "j"), ("n", "r"),
    ("i", "j"), ("i", "o"), ("i", "q"),
    ("j", "r"), ("j", "q"), ("j", "l"),
    ("r", "l"),
    ("o", "q"), ("o", "t"),
    ("q", "l"), ("q", "t"), ("q", "u"),
    ("l", "u"),
    ("t", "u"),
]
COVER_GRAPH_COARSE = ["m", "n", "l", "o"]


def cover_graph_matrix():
    """Laplacian-like SPD matrix whose strong graph is the 13-node fixture.

    Every off-diagonal entry is -1 and the diagonal is the node degree plus
    one, so with any relative threshold below 1 every edge is strong.
    """
    labels = {name: idx for idx, name in enumerate(COVER_GRAPH_LABELS)}
    n = len(COVER_GRAPH_LABELS)
    dense = np.zeros((n, n))
    for a, b in COVER_GRAPH_EDGES:
        ia, ib = labels[a], labels[b]
        dense[ia, ib] = -1.0
        dense[ib, ia] = -1.0
    np.fill_diagonal(dense, -dense.sum(axis=1) + 1.0)
    return SparseMatrix.from_dense(dense), labels
