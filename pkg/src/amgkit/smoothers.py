"""Point smoothers: Jacobi and an adaptive factored sparse approximate inverse.

A smoother wraps an explicit application of M^{-1}; the stationary sweep is
x <- x + omega * M^{-1} (b - A x).  For the factored variant M^{-1} = G^T G
with G sparse lower triangular, rows scaled so diag(G A G^T) = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ZeroDiagonalError
from .sparse import SparseMatrix, spmv, transpose

__all__ = [
    "Smoother",
    "build_jacobi",
    "build_fsai",
    "apply_smoother",
    "estimate_relaxation",
]


@dataclass
class Smoother:
    """Explicit approximate inverse with its relaxation metadata.

    ``omega`` is the damping factor used by :func:`apply_smoother`;
    ``rho_estimate`` the power-method estimate of the spectral radius of
    M^{-1} A it was derived from (NaN until :func:`estimate_relaxation` ran).
    """

    kind: str
    inv_diag: np.ndarray | None = None
    gmat: SparseMatrix | None = None
    gmat_t: SparseMatrix | None = None
    omega: float = 1.0
    rho_estimate: float = float("nan")
    fallback_rows: int = 0
    density: float = 0.0
    nnz: int = 0

    def apply(self, r):
        """M^{-1} r for a vector or block of vectors."""
        if self.kind == "jacobi":
            d = self.inv_diag
            return d * r if np.ndim(r) == 1 else d[:, None] * r
        return spmv(self.gmat_t, spmv(self.gmat, r))


def build_jacobi(A):
    """Diagonal smoother; rejects rows without a usable diagonal."""
    d = A.diagonal()
    bad = np.flatnonzero(d == 0.0)
    if bad.size:
        raise ZeroDiagonalError(int(bad[0]))
    return Smoother(kind="jacobi", inv_diag=1.0 / d, nnz=d.size, density=0.0)


def build_fsai(A, nsteps=4, candidates_per_step=2, target_density=0.4):
    """Adaptive factored approximate inverse of an SPD matrix.

    Starts from a diagonal pattern and grows each row for up to ``nsteps``
    rounds, adding the ``candidates_per_step`` positions with the largest
    residual gradient of the minimized energy functional, then recomputing the
    row against the principal submatrix A[P, P].  Growth stops early once
    nnz(G)/nnz(A) exceeds ``target_density``.  Rows whose local solve loses
    positive definiteness fall back to the Jacobi row and are counted in
    ``fallback_rows``.
    """
    n = A.nrows
    diag = A.diagonal()
    bad = np.flatnonzero(diag <= 0.0)
    if bad.size:
        raise ZeroDiagonalError(int(bad[0]), "non-positive diagonal")
    patterns = [np.empty(0, dtype=np.int64) for _ in range(n)]  # strictly lower
    grows = [None] * n
    fallback = np.zeros(n, dtype=bool)

    def solve_row(i):
        idx = np.concatenate([patterns[i], [i]])
        sub = _principal_submatrix(A, idx)
        try:
            c, low = sla.cho_factor(sub, lower=True, check_finite=False)
            e = np.zeros(idx.size)
            e[-1] = 1.0
            y = sla.cho_solve((c, low), e, check_finite=False)
            if y[-1] <= 0.0:
                raise np.linalg.LinAlgError
            grows[i] = y / np.sqrt(y[-1])
            fallback[i] = False
        except (np.linalg.LinAlgError, ValueError):
            patterns[i] = np.empty(0, dtype=np.int64)
            grows[i] = np.array([1.0 / np.sqrt(diag[i])])
            fallback[i] = True

    for i in range(n):
        solve_row(i)

    scratch = np.zeros(n)
    for _ in range(nsteps):
        nnz_g = sum(p.size for p in patterns) + n
        if nnz_g / max(A.nnz, 1) > target_density:
            break
        changed = False
        for i in range(n):
            if fallback[i]:
                continue
            idx = np.concatenate([patterns[i], [i]])
            g = grows[i]
            # residual (A g)_j on the candidate set; symmetric A lets rows
            # stand in for columns
            touched = []
            for t, k in enumerate(idx):
                cols, vals = A.row(k)
                scratch[cols] += vals * g[t]
                touched.append(cols)
            touched = np.unique(np.concatenate(touched))
            cand = touched[(touched < i) & ~np.isin(touched, idx)]
            grad = np.abs(scratch[cand])
            scratch[touched] = 0.0
            cand = cand[grad > 0.0]
            grad = grad[grad > 0.0]
            if cand.size:
                order = np.lexsort((cand, -grad))
                take = cand[order[:candidates_per_step]]
                patterns[i] = np.sort(np.concatenate([patterns[i], take]))
                solve_row(i)
                changed = True
        if not changed:
            break

    offs = np.zeros(n + 1, dtype=np.int64)
    offs[1:] = np.cumsum([p.size + 1 for p in patterns])
    cols = np.concatenate(
        [np.concatenate([patterns[i], [i]]) for i in range(n)]
    ).astype(np.int32)
    vals = np.concatenate(grows)
    g = SparseMatrix(n, n, offs, cols, vals, check=False)
    return Smoother(
        kind="fsai",
        gmat=g,
        gmat_t=transpose(g),
        fallback_rows=int(fallback.sum()),
        density=g.nnz / max(A.nnz, 1),
        nnz=g.nnz,
    )


def _principal_submatrix(A, idx):
    # idx must be sorted apart from the trailing row index; sort a view for
    # the lookups and map the positions back
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    m = idx.size
    sub = np.zeros((m, m))
    for t in range(m):
        cols, vals = A.row(idx[t])
        p = np.searchsorted(sidx, cols)
        p[p >= m] = m - 1
        hit = sidx[p] == cols
        sub[t, order[p[hit]]] = vals[hit]
    return sub


def apply_smoother(sm, A, b, x0, steps):
    """``steps`` sweeps of x <- x + omega M^{-1} (b - A x) from ``x0``."""
    x = np.array(x0, dtype=np.float64, copy=True)
    for _ in range(steps):
        x += sm.omega * sm.apply(b - spmv(A, x))
    return x


def estimate_relaxation(A, sm, power_iters=20, seed=42, relax_target=None):
    """Damping factor from a power-method spectral radius estimate.

    Runs ``power_iters`` iterations of the power method on M^{-1} A from a
    seeded random start and sets ``sm.omega = relax_target / rho`` (target
    defaults: 1.0 for the factored inverse, 0.9 for Jacobi).  Returns
    ``(omega, rho)``.
    """
    if relax_target is None:
        relax_target = 0.9 if sm.kind == "jacobi" else 1.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.nrows)
    rho = 1.0
    for attempt in range(3):
        ok = True
        for _ in range(power_iters):
            w = sm.apply(spmv(A, v))
            nw = np.linalg.norm(w)
            nv = np.linalg.norm(v)
            if nw == 0.0 or not np.isfinite(nw):
                ok = False
                break
            rho = nw / nv
            v = w / nw
        if ok:
            break
        v = rng.standard_normal(A.nrows)
    else:
        raise ValueError("power method failed to produce a usable iterate")
    sm.rho_estimate = float(rho)
    sm.omega = float(relax_target / rho)
    return sm.omega, sm.rho_estimate
