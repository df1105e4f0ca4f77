"""Compressed sparse row matrices and the kernels the rest of the toolkit builds on.

The storage invariants are strict: per-row column indices are sorted and
duplicate-free, offsets are monotone, values are finite.  Every routine here
either preserves them or re-canonicalizes before returning.  Reductions run
in a fixed left-to-right order over the stored entries so that repeated
single-threaded runs are bitwise reproducible.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError

__all__ = [
    "SparseMatrix",
    "CfPartition",
    "spmv",
    "transpose",
    "spgemm",
    "galerkin_product",
    "is_symmetric",
    "row_segment_sums",
]


def row_segment_sums(data, offsets):
    """Sum consecutive segments of ``data`` along axis 0.

    ``offsets`` has one more entry than there are segments; segment ``i``
    covers ``data[offsets[i]:offsets[i+1]]``.  Empty segments sum to zero.
    Both the CSR matvec and the striped matvec funnel through this helper so
    the two produce identical floating-point results by construction.
    """
    nseg = offsets.size - 1
    out = np.zeros((nseg,) + data.shape[1:])
    if data.shape[0] == 0 or nseg == 0:
        return out
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    if not nonempty.any():
        return out
    # reduceat cannot express empty segments, so reduce only the nonempty
    # ones; their starts are strictly increasing and consecutive nonempty
    # segments abut, so each reduce ends exactly at the next start.
    out[nonempty] = np.add.reduceat(data, starts[nonempty].astype(np.intp), axis=0)
    return out


class SparseMatrix:
    """CSR matrix with canonical storage.

    Attributes
    ----------
    nrows, ncols : int
    row_offsets : int64 array, shape (nrows + 1,)
    col_indices : int32 array, shape (nnz,), sorted and unique per row
    values : float64 array, shape (nnz,), all finite
    """

    __slots__ = ("nrows", "ncols", "row_offsets", "col_indices", "values")

    def __init__(self, nrows, ncols, row_offsets, col_indices, values, check=True):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int32)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if check:
            self._validate()

    def _validate(self):
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative matrix dimension")
        off = self.row_offsets
        if off.shape != (self.nrows + 1,):
            raise ValueError(
                f"row_offsets has length {off.size}, expected {self.nrows + 1}"
            )
        if off[0] != 0 or off[-1] != self.col_indices.size:
            raise ValueError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if self.col_indices.size != self.values.size:
            raise ValueError("col_indices and values length mismatch")
        if self.col_indices.size:
            if self.col_indices.min() < 0 or self.col_indices.max() >= self.ncols:
                raise ValueError("column index out of range")
            # sorted strictly increasing inside each row: differences may only
            # be <= 0 at row boundaries
            d = np.diff(self.col_indices.astype(np.int64))
            bad = np.flatnonzero(d <= 0) + 1
            if bad.size and not np.isin(bad, off[1:-1]).all():
                raise ValueError("column indices must be sorted and unique per row")
        if self.values.size and not np.isfinite(self.values).all():
            raise ValueError("matrix values must be finite")

    @property
    def nnz(self):
        return int(self.col_indices.size)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def row(self, i):
        """Views of the column indices and values of row ``i``."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def diagonal(self):
        """Main diagonal as a dense vector, zero where no entry is stored."""
        d = np.zeros(min(self.nrows, self.ncols))
        rows = np.repeat(
            np.arange(self.nrows, dtype=np.int64), np.diff(self.row_offsets)
        )
        hit = self.col_indices == rows
        d[rows[hit]] = self.values[hit]
        return d

    def copy(self):
        return SparseMatrix(
            self.nrows,
            self.ncols,
            self.row_offsets.copy(),
            self.col_indices.copy(),
            self.values.copy(),
            check=False,
        )

    # -- conversions -------------------------------------------------------

    @classmethod
    def from_scipy(cls, m, check=False):
        m = m.tocsr()
        if not m.has_canonical_format:
            m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data, check=check)

    def to_scipy(self):
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.nrows, self.ncols),
        )

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, sum_duplicates=True):
        """Build from triplets; duplicates are summed, exact zeros kept out."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
        if sum_duplicates:
            m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls.from_scipy(m)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        return cls.from_scipy(sp.csr_matrix(dense))

    def to_dense(self):
        return self.to_scipy().toarray()

    @classmethod
    def identity(cls, n):
        off = np.arange(n + 1, dtype=np.int64)
        return cls(n, n, off, np.arange(n, dtype=np.int32), np.ones(n), check=False)

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


class CfPartition:
    """Coarse/fine node labelling with a dense map into the coarse numbering.

    ``coarse_index[i]`` is the coarse node number of node ``i`` when
    ``is_coarse[i]`` and -1 otherwise; coarse numbers follow ascending node
    order, so the map is a bijection onto ``range(n_coarse)``.
    """

    __slots__ = ("is_coarse", "coarse_index", "n_coarse")

    def __init__(self, is_coarse):
        self.is_coarse = np.ascontiguousarray(is_coarse, dtype=bool)
        self.coarse_index = np.full(self.is_coarse.size, -1, dtype=np.int64)
        self.n_coarse = int(self.is_coarse.sum())
        self.coarse_index[self.is_coarse] = np.arange(self.n_coarse)

    @property
    def n(self):
        return self.is_coarse.size

    @property
    def coarse_nodes(self):
        return np.flatnonzero(self.is_coarse)

    def __repr__(self):
        return f"CfPartition(n={self.n}, coarse={self.n_coarse})"


def spmv(A, x):
    """Sparse matrix times dense vector or block of vectors.

    Row sums run over stored entries in ascending column order, so the result
    is reproducible across runs and matches the striped matvec to rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.ncols:
        raise DimensionMismatchError("spmv", A.shape, x.shape)
    gathered = x[A.col_indices]
    if x.ndim == 1:
        prod = A.values * gathered
    else:
        prod = A.values[:, None] * gathered
    return row_segment_sums(prod, A.row_offsets)


def transpose(A):
    """Exact transpose; values are permuted, never recomputed."""
    t = A.to_scipy().transpose().tocsr()
    t.sort_indices()
    return SparseMatrix.from_scipy(t)


def spgemm(A, B):
    """Sparse-sparse product with canonical output.

    Exact zeros produced by cancellation are dropped so downstream pattern
    logic never sees phantom couplings.
    """
    if A.ncols != B.nrows:
        raise DimensionMismatchError("spgemm", A.shape, B.shape)
    c = A.to_scipy() @ B.to_scipy()
    c = sp.csr_matrix(c)
    c.sum_duplicates()
    c.sort_indices()
    c.eliminate_zeros()
    return SparseMatrix.from_scipy(c)


def is_symmetric(A, rtol=1e-13):
    """True when ``A`` equals its transpose to a relative tolerance."""
    if A.nrows != A.ncols:
        return False
    if A.nnz == 0:
        return True
    d = A.to_scipy() - A.to_scipy().T
    if d.nnz == 0:
        return True
    scale = np.abs(A.values).max()
    return np.abs(d.data).max() <= rtol * scale


def galerkin_product(A, P, symmetrize=None):
    """Coarse-grid operator: transpose(P) @ A @ P.

    Parameters
    ----------
    symmetrize : bool, optional
        Force the result to exact symmetry via (R + R^T)/2.  Default detects
        the symmetry of ``A``: the triple product of a symmetric operator is
        symmetric up to roundoff and gets cleaned, while a deliberately
        nonsymmetric operator (as produced by coarse-operator filtering) is
        passed through untouched.
    """
    if A.nrows != A.ncols:
        raise DimensionMismatchError("galerkin_product", A.shape, A.shape)
    if A.ncols != P.nrows:
        raise DimensionMismatchError("galerkin_product", A.shape, P.shape)
    if symmetrize is None:
        symmetrize = is_symmetric(A)
    ps = P.to_scipy()
    r = ps.T @ (A.to_scipy() @ ps)
    if symmetrize:
        r = (r + r.T) * 0.5
    r = sp.csr_matrix(r)
    r.sum_duplicates()
    r.sort_indices()
    r.eliminate_zeros()
    return SparseMatrix.from_scipy(r)
