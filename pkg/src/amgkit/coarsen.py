"""Strength of connection and coarse/fine splitting.

The strength graph shares the off-diagonal pattern of the operator (entries
stored row-wise in the operator's order, diagonal excluded) and carries one
nonnegative strength plus a kept flag per directed edge.  Splitting uses a
randomized maximal independent set over the kept graph, decided in
bulk-synchronous rounds so the outcome depends only on the seed, never on
traversal order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ZeroDiagonalError
from .sparse import CfPartition, SparseMatrix

__all__ = ["SocGraph", "compute_soc", "filter_soc", "pmis", "symmetrized_kept_graph"]

SOC_KINDS = ("classical", "strong_coupling", "affinity")


@dataclass
class SocGraph:
    """Directed strength graph on the operator's off-diagonal pattern."""

    kind: str
    nrows: int
    row_offsets: np.ndarray  # int64 (nrows + 1,)
    col_indices: np.ndarray  # int32, ascending per row
    strengths: np.ndarray  # float64, >= 0
    kept: np.ndarray  # bool

    @property
    def n_edges(self):
        return int(self.col_indices.size)

    @property
    def n_kept(self):
        return int(self.kept.sum())

    def row(self, i):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.kept[lo:hi]

    def kept_matrix(self):
        """Kept edges as a 0/1 CSR matrix (directed)."""
        return sp.csr_matrix(
            (self.kept.astype(np.float64), self.col_indices, self.row_offsets),
            shape=(self.nrows, self.nrows),
        )


def _offdiag_pattern(A):
    rows = np.repeat(np.arange(A.nrows, dtype=np.int64), np.diff(A.row_offsets))
    keep = A.col_indices != rows
    counts = np.bincount(rows[keep], minlength=A.nrows)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return offsets, A.col_indices[keep].astype(np.int32), A.values[keep], rows[keep]


def _segment_max(values, offsets, empty=0.0):
    out = np.full(offsets.size - 1, empty)
    if values.size == 0:
        return out
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    if not nonempty.any():
        return out
    # reduceat cannot express empty segments; reduce the nonempty ones only
    # (their starts strictly increase and each reduce ends at the next start)
    out[nonempty] = np.maximum.reduceat(values, starts[nonempty].astype(np.intp))
    return out


def compute_soc(A, kind, vectors=None):
    """Per-edge strength of connection.

    ``classical`` rates an edge by its negative coupling against the largest
    negative coupling touching the row (row or column side); ``strong_coupling``
    by |a_ij| / sqrt(a_ii a_jj); ``affinity`` by the squared normalized inner
    product of the two rows of the test vectors ``V``.
    """
    if kind not in SOC_KINDS:
        raise ValueError(f"unknown strength kind {kind!r}")
    if A.nrows != A.ncols:
        raise ValueError("strength of connection needs a square matrix")
    offsets, cols, vals, rows = _offdiag_pattern(A)

    if kind == "classical":
        neg = -vals
        # largest negated coupling per row and per column, then the max of both
        row_max = _segment_max(neg, offsets, empty=-np.inf)
        col_max = np.full(A.nrows, -np.inf)
        np.maximum.at(col_max, cols, neg)
        denom = np.maximum(row_max, col_max)
        s = np.where(
            denom[rows] > 0.0, np.maximum(neg, 0.0) / np.where(denom[rows] > 0.0, denom[rows], 1.0), 0.0
        )
    elif kind == "strong_coupling":
        d = A.diagonal()
        bad = np.flatnonzero(d < 0.0)
        if bad.size:
            raise ZeroDiagonalError(int(bad[0]), "negative diagonal")
        bad = np.flatnonzero(d == 0.0)
        if bad.size:
            raise ZeroDiagonalError(int(bad[0]))
        s = np.abs(vals) / np.sqrt(d[rows] * d[cols])
    else:
        if vectors is None:
            raise ValueError("affinity strength needs test vectors")
        V = np.asarray(vectors, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        dots = np.einsum("ij,ij->i", V[rows], V[cols])
        norms = np.einsum("ij,ij->i", V, V)
        denom = norms[rows] * norms[cols]
        s = np.where(denom > 0.0, dots * dots / np.where(denom > 0.0, denom, 1.0), 0.0)

    return SocGraph(
        kind=kind,
        nrows=A.nrows,
        row_offsets=offsets,
        col_indices=cols,
        strengths=s,
        kept=np.ones(s.size, dtype=bool),
    )


def filter_soc(G, theta=None, avg_degree=None):
    """Mark the kept edge set, in place, and return ``G``.

    Exactly one rule applies.  ``theta`` keeps edges at least ``theta`` times
    the row maximum (classical and strong coupling) or at least ``theta``
    outright (affinity, whose strengths are already normalized to [0, 1]).
    ``avg_degree`` keeps the globally strongest ``round(n * avg_degree)``
    edges and then symmetrizes the kept set by union.
    """
    if (theta is None) == (avg_degree is None):
        raise ValueError("pass exactly one of theta or avg_degree")
    if theta is not None:
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {theta}")
        if theta == 0.0:
            G.kept = np.ones(G.n_edges, dtype=bool)
        elif G.kind == "affinity":
            G.kept = G.strengths >= theta
        else:
            row_max = _segment_max(G.strengths, G.row_offsets)
            rows = np.repeat(
                np.arange(G.nrows, dtype=np.int64), np.diff(G.row_offsets)
            )
            G.kept = (G.strengths >= theta * row_max[rows]) & (G.strengths > 0.0)
        return G

    if avg_degree <= 0:
        raise ValueError(f"avg_degree must be positive, got {avg_degree}")
    k = min(G.n_edges, int(round(G.nrows * avg_degree)))
    kept = np.zeros(G.n_edges, dtype=bool)
    if k > 0:
        order = np.lexsort((np.arange(G.n_edges), -G.strengths))
        kept[order[:k]] = True
    G.kept = kept
    _symmetrize_kept(G)
    return G


def _symmetrize_kept(G):
    m = G.kept_matrix()
    u = m + m.T
    # read the union back on the stored pattern
    rows = np.repeat(np.arange(G.nrows, dtype=np.int64), np.diff(G.row_offsets))
    hit = np.asarray(u[rows, G.col_indices]).ravel()
    G.kept = hit > 0.0


def symmetrized_kept_graph(G):
    """Undirected kept adjacency as a canonical CSR of 0/1 values."""
    m = G.kept_matrix()
    u = m + m.T
    u = sp.csr_matrix(u)
    u.sort_indices()
    u.data[:] = 1.0
    u.eliminate_zeros()
    return u


def pmis(G, seed=0):
    """Coarse/fine splitting via a parallel maximal independent set.

    Every node gets the weight kept-degree + uniform(0, 1) from a generator
    seeded with ``seed``; ties fall back to the node id, so the outcome is a
    pure function of (graph, seed).  Rounds are bulk-synchronous: all nodes
    whose weight beats every undecided kept-neighbor turn coarse together,
    their undecided neighbors turn fine.  Nodes without kept edges turn
    coarse when fully disconnected in the operator, fine otherwise.
    """
    n = G.nrows
    adj = symmetrized_kept_graph(G)
    degree = np.diff(adj.indptr)
    rng = np.random.default_rng(seed)
    weights = degree + rng.random(n)
    # total order on (weight, id): rank comparisons are exact
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), weights))] = np.arange(n)

    UNDECIDED, COARSE, FINE = 0, 1, 2
    state = np.full(n, UNDECIDED, dtype=np.int8)

    isolated = degree == 0
    has_any_edge = np.diff(G.row_offsets) > 0
    state[isolated & ~has_any_edge] = COARSE
    state[isolated & has_any_edge] = FINE

    indptr, indices = adj.indptr, adj.indices
    while True:
        undecided = state == UNDECIDED
        if not undecided.any():
            break
        # per undecided node, the top rank among undecided kept-neighbors
        nbr_rank = np.where(undecided[indices], rank[indices], -1)
        seg = _segment_max(nbr_rank.astype(np.float64), indptr.astype(np.int64), empty=-1.0)
        winners = undecided & (rank > seg)
        state[winners] = COARSE
        # kept-neighbors of fresh coarse nodes become fine
        touched = (adj @ winners.astype(np.float64)) > 0.0
        state[touched & (state == UNDECIDED)] = FINE
    return CfPartition(state == COARSE)
