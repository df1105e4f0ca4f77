"""Prolongation builders.

All schemes share the same skeleton: coarse rows interpolate by injection,
fine rows get a weight per member of an interpolatory set of coarse nodes.
The classical scheme uses direct plus distance-one redistributed couplings;
the extended variant reaches coarse nodes two strong edges away and folds the
fine node's own coupling into the scaling; the hybrid variant runs the same
formula on a greedily thinned set; the bootstrap variant fits each row
against test vectors over a well-conditioned coarse subset.

Sign filtering drops couplings whose sign matches the row's diagonal, so
oscillatory positive couplings never pollute the redistribution sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coarsen import symmetrized_kept_graph
from .errors import AmgError
from .smoothers import build_jacobi, estimate_relaxation
from .sparse import SparseMatrix, spgemm

__all__ = [
    "Prolongation",
    "classical_weights",
    "extended_i_weights",
    "hybrid_weights",
    "extended_set",
    "hybrid_set",
    "bamg_prolongation",
    "maxvol_select",
    "smooth_prolongation",
    "filter_with_compensation",
]


@dataclass
class Prolongation:
    """A prolongation operator plus per-row build diagnostics."""

    matrix: SparseMatrix
    scheme: str
    orphan_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    injection: bool = True
    distances: np.ndarray | None = None
    residuals: np.ndarray | None = None
    warnings: dict = field(default_factory=dict)


class InterpolationError(AmgError):
    """A fine row could not be given a well-defined weight row."""


def _kept_on_pattern(A, G):
    """Kept flag per stored entry of A (diagonal entries are never kept)."""
    rows = np.repeat(np.arange(A.nrows, dtype=np.int64), np.diff(A.row_offsets))
    off = A.col_indices != rows
    if int(off.sum()) != G.n_edges:
        raise ValueError("strength graph does not match the matrix pattern")
    kept = np.zeros(A.nnz, dtype=bool)
    kept[off] = G.kept
    return kept


def _assemble(n, cf, fine_cols, fine_weights, scheme, orphans, **diag):
    """Stack injection rows and fine interpolation rows into a CSR operator."""
    cidx = cf.coarse_index
    counts = np.zeros(n, dtype=np.int64)
    counts[cf.is_coarse] = 1
    for i, cols in fine_cols.items():
        counts[i] = len(cols)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    cols_out = np.empty(int(offsets[-1]), dtype=np.int32)
    vals_out = np.empty(int(offsets[-1]))
    for i in range(n):
        lo = offsets[i]
        if cf.is_coarse[i]:
            cols_out[lo] = cidx[i]
            vals_out[lo] = 1.0
        elif counts[i]:
            cc = fine_cols[i]
            cols_out[lo : lo + len(cc)] = cc
            vals_out[lo : lo + len(cc)] = fine_weights[i]
    p = SparseMatrix(n, cf.n_coarse, offsets, cols_out, vals_out, check=True)
    return Prolongation(
        matrix=p,
        scheme=scheme,
        orphan_rows=np.asarray(sorted(orphans), dtype=np.int64),
        **diag,
    )


def classical_weights(A, G, cf):
    """Distance-one interpolation with fine-neighbor redistribution.

    A fine row interpolates from its strong coarse neighbors.  Each strong
    fine neighbor k redistributes its coupling over those coarse nodes in
    proportion to k's sign-filtered couplings to them; strong fine neighbors
    with no usable coarse coupling fold into the diagonal like weak neighbors.
    """
    n = A.nrows
    kept = _kept_on_pattern(A, G).tolist()
    aoff = A.row_offsets.tolist()
    acol = A.col_indices.tolist()
    aval = A.values.tolist()
    is_c = cf.is_coarse.tolist()
    cidx = cf.coarse_index.tolist()
    diag_pos = (A.diagonal() > 0.0).tolist()

    mark = [-1] * n
    fine_cols, fine_weights = {}, {}
    orphans = []
    folded_warn = 0
    for i in range(n):
        if is_c[i]:
            continue
        lo, hi = aoff[i], aoff[i + 1]
        diag_val = 0.0
        weak_sum = 0.0
        clist = []
        num = []
        fs = []
        for t in range(lo, hi):
            c = acol[t]
            v = aval[t]
            if c == i:
                diag_val = v
            elif kept[t]:
                if is_c[c]:
                    mark[c] = len(clist)
                    clist.append(c)
                    num.append(v)
                else:
                    fs.append((c, v))
            else:
                weak_sum += v
        if not clist:
            orphans.append(i)
            continue
        for k, a_ik in fs:
            pos_k = diag_pos[k]
            d_k = 0.0
            saw_struct = False
            klo, khi = aoff[k], aoff[k + 1]
            for t in range(klo, khi):
                c2 = acol[t]
                if mark[c2] >= 0:
                    saw_struct = True
                    v2 = aval[t]
                    if (v2 > 0.0) != pos_k:
                        d_k += v2
            if d_k == 0.0:
                weak_sum += a_ik
                if saw_struct:
                    folded_warn += 1
                continue
            scale = a_ik / d_k
            for t in range(klo, khi):
                c2 = acol[t]
                m = mark[c2]
                if m >= 0:
                    v2 = aval[t]
                    if (v2 > 0.0) != pos_k:
                        num[m] += scale * v2
        denom = diag_val + weak_sum
        if denom == 0.0:
            raise InterpolationError(f"row {i}: interpolation denominator vanished")
        fine_cols[i] = [cidx[c] for c in clist]
        fine_weights[i] = [-x / denom for x in num]
        for c in clist:
            mark[c] = -1
    return _assemble(
        n,
        cf,
        fine_cols,
        fine_weights,
        "classical",
        orphans,
        warnings={"folded_strong_fine": folded_warn} if folded_warn else {},
    )


def _strong_sets(A, G, cf):
    """Per-node strong coarse/fine neighbor lists from the kept graph."""
    n = A.nrows
    kept = _kept_on_pattern(A, G)
    is_c = cf.is_coarse
    sc = [None] * n
    sf = [None] * n
    for i in range(n):
        lo, hi = A.row_offsets[i], A.row_offsets[i + 1]
        cols = A.col_indices[lo:hi]
        k = kept[lo:hi]
        scols = cols[k]
        lab = is_c[scols]
        sc[i] = scols[lab]
        sf[i] = scols[~lab]
    return sc, sf


def extended_set(A, G, cf):
    """Distance-two interpolatory sets: own strong coarse neighbors plus the
    strong coarse neighbors of strong fine neighbors."""
    sc, sf = _strong_sets(A, G, cf)
    out = [None] * A.nrows
    for i in range(A.nrows):
        if cf.is_coarse[i]:
            continue
        pieces = [sc[i]] + [sc[int(k)] for k in sf[i]]
        out[i] = np.unique(np.concatenate(pieces)) if pieces else np.empty(0, np.int64)
    return out


def hybrid_set(A, G, cf):
    """Greedy thinning of the distance-two sets.

    Start from the strong coarse neighbors; while some strong fine neighbor
    shares no coarse point with the set, add the distance-two coarse node
    covering the most uncovered fine neighbors (smallest id on ties).
    Returns (sets, uncovered_count).
    """
    sc, sf = _strong_sets(A, G, cf)
    out = [None] * A.nrows
    uncovered_total = 0
    for i in range(A.nrows):
        if cf.is_coarse[i]:
            continue
        base = set(int(c) for c in sc[i])
        fprime = [int(k) for k in sf[i] if base.isdisjoint(int(c) for c in sc[int(k)])]
        chat = set(base)
        while fprime:
            count = {}
            for k in fprime:
                for c in sc[k]:
                    c = int(c)
                    if c not in chat:
                        count[c] = count.get(c, 0) + 1
            if not count:
                uncovered_total += len(fprime)
                break
            best = min(count, key=lambda c: (-count[c], c))
            chat.add(best)
            fprime = [k for k in fprime if best not in set(int(c) for c in sc[k])]
        out[i] = np.array(sorted(chat), dtype=np.int64)
    return out, uncovered_total


def extended_i_weights(A, G, cf):
    """Distance-two interpolation over the full extended sets."""
    sets = extended_set(A, G, cf)
    return _extended_core(A, G, cf, sets, "extended_i")


def hybrid_weights(A, G, cf):
    """Distance-two interpolation over the greedily thinned sets."""
    sets, uncovered = hybrid_set(A, G, cf)
    p = _extended_core(A, G, cf, sets, "hybrid")
    if uncovered:
        p.warnings["uncovered_strong_fine"] = uncovered
    return p


def _extended_core(A, G, cf, sets, scheme):
    n = A.nrows
    kept = _kept_on_pattern(A, G).tolist()
    aoff = A.row_offsets.tolist()
    acol = A.col_indices.tolist()
    aval = A.values.tolist()
    is_c = cf.is_coarse.tolist()
    cidx = cf.coarse_index.tolist()
    diag_pos = (A.diagonal() > 0.0).tolist()

    mark = [-1] * n
    fine_cols, fine_weights = {}, {}
    orphans = []
    for i in range(n):
        if is_c[i]:
            continue
        chat = sets[i]
        if chat is None or len(chat) == 0:
            orphans.append(i)
            continue
        chat = [int(c) for c in chat]
        for p_, c in enumerate(chat):
            mark[c] = p_
        num = [0.0] * len(chat)
        atii = 0.0
        fs = []
        lo, hi = aoff[i], aoff[i + 1]
        for t in range(lo, hi):
            c = acol[t]
            v = aval[t]
            if c == i:
                atii += v
            elif mark[c] >= 0:
                num[mark[c]] += v
            elif kept[t] and not is_c[c]:
                fs.append((c, v))
            else:
                atii += v
        for k, a_ik in fs:
            pos_k = diag_pos[k]
            klo, khi = aoff[k], aoff[k + 1]
            d_k = 0.0
            for t in range(klo, khi):
                c2 = acol[t]
                if mark[c2] >= 0 or c2 == i:
                    v2 = aval[t]
                    if (v2 > 0.0) != pos_k:
                        d_k += v2
            if d_k == 0.0:
                atii += a_ik
                continue
            scale = a_ik / d_k
            for t in range(klo, khi):
                c2 = acol[t]
                v2 = aval[t]
                if (v2 > 0.0) != pos_k:
                    if c2 == i:
                        atii += scale * v2
                    elif mark[c2] >= 0:
                        num[mark[c2]] += scale * v2
        for c in chat:
            mark[c] = -1
        if atii == 0.0:
            raise InterpolationError(f"row {i}: interpolation denominator vanished")
        fine_cols[i] = [cidx[c] for c in chat]
        fine_weights[i] = [-x / atii for x in num]
    return _assemble(n, cf, fine_cols, fine_weights, scheme, orphans)


def maxvol_select(phi, delta=1e-2, max_swaps=50):
    """Rows of ``phi`` forming a dominant, well-conditioned square submatrix.

    Starts from pivoted-elimination rows, then swaps while some coefficient
    of phi against the selected basis exceeds 1 + delta.  Returns up to
    ``phi.shape[1]`` sorted row indices; fewer when the matrix is rank
    deficient (none when it vanishes).
    """
    phi = np.asarray(phi, dtype=np.float64)
    m, r = phi.shape
    if m == 0 or r == 0:
        return np.empty(0, dtype=np.int64)
    if m <= r:
        rank = np.linalg.matrix_rank(phi)
        return np.arange(m, dtype=np.int64) if rank else np.empty(0, dtype=np.int64)
    _, rr, piv = sla.qr(phi.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(rr))
    if d.size == 0 or d[0] == 0.0:
        return np.empty(0, dtype=np.int64)
    rank = int((d > max(m, r) * np.finfo(float).eps * d[0]).sum())
    sel = piv[:rank].astype(np.int64)
    if rank < r:
        return np.sort(sel)
    for _ in range(max_swaps):
        b = np.linalg.solve(phi[sel].T, phi.T).T  # coefficients of all rows
        ij = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        if abs(b[ij]) <= 1.0 + delta:
            break
        sel[ij[1]] = ij[0]
    return np.sort(sel)


def bamg_prolongation(
    A, G, cf, V, l_min=1, l_max=3, eps=None, mu=10.0, delta=1e-2, max_swaps=50
):
    """Least-squares interpolation of the test vectors.

    For each fine node, gather the coarse nodes within graph distance
    ``l`` over the strong (kept, symmetrized) edges, pick a well-conditioned
    subset of their test-vector rows by :func:`maxvol_select`, and fit the
    node's own row in the least-squares sense.  The search radius grows from
    ``l_min`` while the relative fit residual exceeds ``eps`` or the weight
    norm exceeds ``mu``, up to ``l_max``.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    n, n_t = V.shape
    if n != A.nrows:
        raise ValueError(f"test space has {n} rows for a {A.nrows}-row matrix")
    if eps is None:
        eps = 1e-10 if n_t <= 2 else 1e-8
    adj = symmetrized_kept_graph(G)
    indptr, indices = adj.indptr, adj.indices
    is_c = cf.is_coarse
    cidx = cf.coarse_index

    distances = np.full(n, -1, dtype=np.int64)
    residuals = np.full(n, np.nan)
    fine_cols, fine_weights = {}, {}
    orphans = []
    visited = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if is_c[i]:
            continue
        visited[i] = i
        frontier = [i]
        cand = []
        best = None
        fitted_nc = -1
        for level in range(1, l_max + 1):
            nxt = []
            for u in frontier:
                for v2 in indices[indptr[u] : indptr[u + 1]]:
                    if visited[v2] != i:
                        visited[v2] = i
                        nxt.append(v2)
                        if is_c[v2]:
                            cand.append(v2)
            frontier = nxt
            if level < l_min or not cand or len(cand) == fitted_nc:
                continue
            fitted_nc = len(cand)
            phi = V[cand]
            sel = maxvol_select(phi, delta=delta, max_swaps=max_swaps)
            if sel.size == 0:
                continue
            w, res = _fit_row(phi[sel], V[i])
            best = (level, res, sel, w)
            if res <= eps and np.linalg.norm(w) <= mu:
                break
        if best is None:
            orphans.append(i)
            continue
        level, res, sel, w = best
        distances[i] = level
        residuals[i] = res
        chosen = [cand[int(s)] for s in sel]
        order = np.argsort(chosen)
        fine_cols[i] = [cidx[chosen[int(o)]] for o in order]
        fine_weights[i] = [float(w[int(o)]) for o in order]
    return _assemble(
        n,
        cf,
        fine_cols,
        fine_weights,
        "bamg",
        orphans,
        distances=distances,
        residuals=residuals,
    )


def _fit_row(phi_sel, target):
    w, *_ = np.linalg.lstsq(phi_sel.T, target, rcond=None)
    err = np.linalg.norm(phi_sel.T @ w - target)
    nt = np.linalg.norm(target)
    return w, err / nt if nt > 0.0 else err


def smooth_prolongation(A, P, omega=None, power_iters=20, seed=42):
    """One damped Jacobi sweep applied to the prolongation columns.

    Returns a new operator (I - omega D^{-1} A) P; the coarse-row injection
    property is intentionally given up in exchange for smoother basis
    functions.  ``omega`` defaults to 0.9 over the estimated spectral radius
    of D^{-1} A.
    """
    jac = build_jacobi(A)
    if omega is None:
        omega, _ = estimate_relaxation(
            A, jac, power_iters=power_iters, seed=seed, relax_target=0.9
        )
    ap = spgemm(A, P.matrix)
    scaled = ap.to_scipy().multiply((omega * jac.inv_diag)[:, None]).tocsr()
    out = P.matrix.to_scipy() - scaled
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    return Prolongation(
        matrix=SparseMatrix.from_scipy(out),
        scheme=P.scheme + "+smoothed",
        orphan_rows=P.orphan_rows,
        injection=False,
        distances=P.distances,
        residuals=P.residuals,
        warnings=dict(P.warnings),
    )


def filter_with_compensation(M, W, rho):
    """Drop small row entries, then restore the row's action on ``W``.

    Per row, entries are kept by descending magnitude until their absolute
    sum reaches ``rho`` times the row's absolute sum (a diagonal entry is
    always kept).  The dropped mass is compensated by the minimum-norm
    correction on the kept positions that reproduces the dropped entries'
    action on the columns of ``W``.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] != M.ncols:
        raise ValueError(
            f"compensation basis has {W.shape[0]} rows for {M.ncols} columns"
        )
    if rho == 1.0:
        return M.copy()
    new_cols, new_vals, counts = [], [], np.zeros(M.nrows, dtype=np.int64)
    for i in range(M.nrows):
        cols, vals = M.row(i)
        if cols.size == 0:
            continue
        absv = np.abs(vals)
        total = absv.sum()
        is_diag = cols == i
        target = rho * total
        acc = float(absv[is_diag].sum())
        keep = is_diag.copy()
        if acc < target:
            order = np.lexsort((cols[~is_diag], -absv[~is_diag]))
            off_pos = np.flatnonzero(~is_diag)[order]
            for t in off_pos:
                keep[t] = True
                acc += absv[t]
                if acc >= target:
                    break
        if keep.all():
            kc, kv = cols, vals
        else:
            dropped = ~keep
            c = W[cols[dropped]].T @ vals[dropped]
            wk = W[cols[keep]]
            delta, *_ = np.linalg.lstsq(wk.T, c, rcond=None)
            kc = cols[keep]
            kv = vals[keep] + delta
        nz = kv != 0.0
        new_cols.append(kc[nz])
        new_vals.append(kv[nz])
        counts[i] = int(nz.sum())
    offsets = np.concatenate([[0], np.cumsum(counts)])
    cols_out = (
        np.concatenate(new_cols) if new_cols else np.empty(0, dtype=np.int32)
    )
    vals_out = np.concatenate(new_vals) if new_vals else np.empty(0)
    return SparseMatrix(
        M.nrows, M.ncols, offsets, cols_out.astype(np.int32), vals_out, check=True
    )
