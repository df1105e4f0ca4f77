"""Block-striped sparse storage.

A square matrix is split into horizontal stripes of consecutive rows.  Each
stripe keeps one CSR block per coupled stripe, classified by position: blocks
left of the owner (columns owned by a lower stripe), the diagonal block, and
blocks to its right.  Column indices inside a block are local to the column
owner's range so each block fits 4-byte indices regardless of the global
size; blocks with no entries are not stored at all.

Stripes are independent by construction: the matvec may process them
concurrently without synchronization, and the per-stripe accumulation order
(ascending neighbor, i.e. left blocks, then diagonal, then right) is fixed so
results do not depend on the thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .sparse import SparseMatrix, row_segment_sums

__all__ = ["StripeBlock", "StripedMatrix", "partition_rows", "spmv_striped"]


def partition_rows(n, n_stripes):
    """Stripe boundaries for ``n`` rows: sizes differ by at most one.

    Every stripe gets ``n // n_stripes`` rows and the first ``n % n_stripes``
    stripes one extra.  Returns an array of ``n_stripes + 1`` offsets.
    """
    if n_stripes < 1:
        raise ValueError(f"need at least one stripe, got {n_stripes}")
    if n_stripes > n:
        raise ValueError(f"{n_stripes} stripes for {n} rows leaves empty stripes")
    base, extra = divmod(n, n_stripes)
    sizes = np.full(n_stripes, base, dtype=np.int64)
    sizes[:extra] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


@dataclass
class StripeBlock:
    """One CSR block of a stripe; ``neighbor`` owns the column range."""

    neighbor: int
    matrix: SparseMatrix

    def side(self, owner):
        if self.neighbor < owner:
            return "left"
        if self.neighbor > owner:
            return "right"
        return "diagonal"


class StripedMatrix:
    """Square sparse matrix stored as row stripes of CSR blocks."""

    def __init__(self, n, row_starts, stripes):
        self.n = int(n)
        self.row_starts = np.asarray(row_starts, dtype=np.int64)
        self.stripes = stripes  # list over stripes of lists of StripeBlock

    @property
    def n_stripes(self):
        return len(self.stripes)

    @property
    def nnz(self):
        return sum(b.matrix.nnz for blocks in self.stripes for b in blocks)

    @classmethod
    def from_csr(cls, A, n_stripes):
        """Split ``A`` (square) into ``n_stripes`` stripes of blocks."""
        if A.nrows != A.ncols:
            raise DimensionMismatchError("from_csr", A.shape, A.shape)
        starts = partition_rows(A.nrows, n_stripes)
        stripes = []
        for s in range(n_stripes):
            lo, hi = starts[s], starts[s + 1]
            off = A.row_offsets[lo : hi + 1]
            cols = A.col_indices[off[0] : off[-1]]
            vals = A.values[off[0] : off[-1]]
            off = off - off[0]
            # owner stripe of every entry's column
            owner = np.searchsorted(starts, cols, side="right") - 1
            blocks = []
            for nb in np.unique(owner):
                pick = owner == nb
                ncols_local = int(starts[nb + 1] - starts[nb])
                # entries keep their row-major, ascending-column order, so the
                # per-neighbor subsequence is already canonical CSR content
                local_cols = (cols[pick] - starts[nb]).astype(np.int32)
                counts = row_segment_sums(pick.astype(np.float64), off)
                boffsets = np.concatenate(
                    [[0], np.cumsum(counts.astype(np.int64))]
                )
                block = SparseMatrix(
                    hi - lo, ncols_local, boffsets, local_cols, vals[pick], check=False
                )
                blocks.append(StripeBlock(int(nb), block))
            stripes.append(blocks)
        return cls(A.nrows, starts, stripes)

    def to_csr(self):
        """Reassemble the global CSR matrix; an exact inverse of ``from_csr``."""
        chunks_cols, chunks_vals, row_counts = [], [], []
        for s, blocks in enumerate(self.stripes):
            nrows = int(self.row_starts[s + 1] - self.row_starts[s])
            counts = np.zeros(nrows, dtype=np.int64)
            # per-row concatenation across blocks in ascending neighbor order
            row_chunks_c = [[] for _ in range(nrows)]
            row_chunks_v = [[] for _ in range(nrows)]
            for b in blocks:
                m = b.matrix
                shift = self.row_starts[b.neighbor]
                for r in range(nrows):
                    lo, hi = m.row_offsets[r], m.row_offsets[r + 1]
                    if hi > lo:
                        row_chunks_c[r].append(m.col_indices[lo:hi].astype(np.int64) + shift)
                        row_chunks_v[r].append(m.values[lo:hi])
                        counts[r] += hi - lo
            for r in range(nrows):
                if row_chunks_c[r]:
                    chunks_cols.append(np.concatenate(row_chunks_c[r]))
                    chunks_vals.append(np.concatenate(row_chunks_v[r]))
            row_counts.append(counts)
        offsets = np.concatenate([[0], np.cumsum(np.concatenate(row_counts))])
        cols = (
            np.concatenate(chunks_cols) if chunks_cols else np.empty(0, dtype=np.int64)
        )
        vals = np.concatenate(chunks_vals) if chunks_vals else np.empty(0)
        return SparseMatrix(
            self.n, self.n, offsets, cols.astype(np.int32), vals, check=False
        )

    def block_inventory(self, stripe):
        """(neighbor, side) pairs stored by one stripe, ascending neighbor."""
        return [(b.neighbor, b.side(stripe)) for b in self.stripes[stripe]]

    def summary(self):
        lines = [f"striped matrix: n={self.n}, stripes={self.n_stripes}"]
        for s in range(self.n_stripes):
            inv = ", ".join(f"{nb}:{side[0].upper()}" for nb, side in self.block_inventory(s))
            lines.append(f"  stripe {s} rows [{self.row_starts[s]}, {self.row_starts[s + 1]}): {inv}")
        return "\n".join(lines)


def _stripe_apply(M, x, s):
    """One stripe's slice of the product, blocks in ascending neighbor order."""
    lo, hi = M.row_starts[s], M.row_starts[s + 1]
    shape = (hi - lo,) + x.shape[1:]
    y = np.zeros(shape)
    for b in M.stripes[s]:
        m = b.matrix
        seg = x[M.row_starts[b.neighbor] : M.row_starts[b.neighbor + 1]]
        gathered = seg[m.col_indices]
        prod = m.values * gathered if x.ndim == 1 else m.values[:, None] * gathered
        y += row_segment_sums(prod, m.row_offsets)
    return y


def spmv_striped(M, x, threads=1):
    """Matvec over the striped layout.

    Matches ``spmv`` on the reassembled matrix to high relative accuracy (the
    only difference is the association of per-block partial sums) and is
    bitwise reproducible for any thread count: each stripe's rows are computed
    independently in a fixed order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != M.n:
        raise DimensionMismatchError("spmv_striped", (M.n, M.n), x.shape)
    shape = (M.n,) + x.shape[1:]
    y = np.empty(shape)
    if threads > 1 and M.n_stripes > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: _stripe_apply(M, x, s), range(M.n_stripes)))
    else:
        parts = [_stripe_apply(M, x, s) for s in range(M.n_stripes)]
    for s, part in enumerate(parts):
        y[M.row_starts[s] : M.row_starts[s + 1]] = part
    return y
