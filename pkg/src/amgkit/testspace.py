"""Near-kernel test spaces: analytic candidates and iterative refinement.

A test space is a thin bundle of orthonormal columns spanning directions the
smoother struggles with.  Scalar diffusion gets the constant vector,
elasticity the six rigid body modes; when no analytic guess fits, a blocked
preconditioned Rayleigh quotient minimization refines a starting block
toward the lowest eigenvectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse import spmv

__all__ = [
    "TestSpace",
    "orthonormalize",
    "analytic_near_kernel",
    "srqm",
    "restrict_testspace",
]


@dataclass
class TestSpace:
    """Orthonormal columns plus the Rayleigh quotients that produced them."""

    vectors: np.ndarray  # (n, n_t), orthonormal
    rayleigh: np.ndarray | None = None  # ascending, when known
    rayleigh_history: np.ndarray | None = None  # (iterations + 1, n_t)
    iterations: int = 0
    warning: str | None = None

    @property
    def n_t(self):
        return self.vectors.shape[1]


def orthonormalize(V, drop_tol=1e-13):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Columns whose norm falls below ``drop_tol`` times their initial norm are
    dropped (later duplicates lose); column order is otherwise preserved.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    kept = []
    for j in range(V.shape[1]):
        v = V[:, j].copy()
        n0 = np.linalg.norm(v)
        if n0 == 0.0:
            continue
        for _ in range(2):
            for q in kept:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv <= drop_tol * n0:
            continue
        kept.append(v / nv)
    if not kept:
        return np.zeros((V.shape[0], 0))
    return np.column_stack(kept)


def analytic_near_kernel(kind, n=None, coords=None):
    """Analytic near-kernel candidates.

    Parameters
    ----------
    kind : {"constant", "rigid_body"}
        ``constant`` needs ``n``; ``rigid_body`` needs node coordinates of
        shape (n_nodes, 3) for a matrix with node-major xyz dof ordering.
    """
    if kind == "constant":
        if n is None:
            raise ValueError("constant kernel needs the problem size n")
        return TestSpace(vectors=np.full((n, 1), 1.0 / np.sqrt(n)))
    if kind != "rigid_body":
        raise ValueError(f"unknown analytic kernel {kind!r}")
    if coords is None:
        raise ValueError("rigid body modes need node coordinates")
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise ValueError(f"coordinates must be (n_nodes, 3), got {coords.shape}")
    nn = coords.shape[0]
    c = coords - coords.mean(axis=0)
    modes = np.zeros((3 * nn, 6))
    for axis in range(3):  # translations
        modes[axis::3, axis] = 1.0
    # infinitesimal rotations about the centroid
    x, y, z = c[:, 0], c[:, 1], c[:, 2]
    modes[0::3, 3], modes[1::3, 3] = -y, x
    modes[1::3, 4], modes[2::3, 4] = -z, y
    modes[2::3, 5], modes[0::3, 5] = -x, z
    v = orthonormalize(modes)
    warning = None
    if v.shape[1] < 6:
        warning = f"rigid body modes rank deficient: kept {v.shape[1]} of 6"
    return TestSpace(vectors=v, warning=warning)


def srqm(A, smoother, V0, iters=10):
    """Blocked preconditioned Rayleigh quotient minimization.

    Per iteration: form the block residual R = A V - V diag(lam), precondition
    Z = M^{-1} R, orthonormalize [V, Z] and keep the n_t smallest Ritz pairs
    of the subspace.  The Ritz values are monotonically non-increasing per
    column because each search space contains the previous one.
    """
    V = orthonormalize(V0)
    if V.shape[1] == 0:
        raise ValueError("starting block is numerically empty")
    n_t = V.shape[1]
    lam, V = _ritz(A, V, n_t)
    history = [lam.copy()]
    warning = None
    it = 0
    for it in range(1, iters + 1):
        R = spmv(A, V) - V * lam
        Z = smoother.apply(R)
        B = orthonormalize(np.hstack([V, Z]))
        if B.shape[1] < n_t:
            warning = "search space collapsed; returning current block"
            it -= 1
            break
        lam, V = _ritz(A, B, n_t)
        history.append(lam.copy())
    return TestSpace(
        vectors=V,
        rayleigh=lam,
        rayleigh_history=np.array(history),
        iterations=it,
        warning=warning,
    )


def _ritz(A, B, n_t):
    t = B.T @ spmv(A, B)
    t = (t + t.T) * 0.5
    w, y = np.linalg.eigh(t)
    return w[:n_t], B @ y[:, :n_t]


def restrict_testspace(ts, cf):
    """Inject a test space onto the coarse nodes and re-orthonormalize."""
    v = orthonormalize(ts.vectors[cf.coarse_nodes])
    warning = None
    if v.shape[1] < ts.n_t:
        warning = f"coarse test space rank dropped to {v.shape[1]}"
        if v.shape[1] == 0:
            # degenerate but keep the machinery alive with a constant
            v = np.full((cf.n_coarse, 1), 1.0 / np.sqrt(max(cf.n_coarse, 1)))
    return TestSpace(vectors=v, warning=warning)
