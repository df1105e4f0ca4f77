"""Multilevel hierarchy construction and the V-cycle preconditioner.

Setup loops coarsening until the operator is small enough (or stops
shrinking), building per level: a smoother with its damping factor, a
strength graph, a coarse/fine splitting, a prolongation, and the Galerkin
coarse operator, with optional prolongation smoothing and filtered operators.
The V-cycle applies one recursive sweep from a zero initial guess, so its
action is a fixed linear operator suitable as a Krylov preconditioner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coarsen import compute_soc, filter_soc, pmis
from .errors import AmgError
from .interp import (
    bamg_prolongation,
    classical_weights,
    extended_i_weights,
    filter_with_compensation,
    hybrid_weights,
    smooth_prolongation,
)
from .smoothers import apply_smoother, build_fsai, build_jacobi, estimate_relaxation
from .sparse import SparseMatrix, galerkin_product, is_symmetric, spmv, transpose
from .testspace import TestSpace, analytic_near_kernel, restrict_testspace, srqm

__all__ = ["AmgConfig", "AmgHierarchy", "Level", "SolveReport", "setup", "vcycle", "complexities"]

INTERP_KINDS = ("classical", "extended_i", "hybrid", "bamg")
SMOOTHER_KINDS = ("jacobi", "fsai")
TESTSPACE_KINDS = ("constant", "rigid_body", "srqm", "srqm_analytic")
FILTER_TARGETS = ("none", "prolongation", "operator", "both")


@dataclass
class AmgConfig:
    """Knobs for :func:`setup`; defaults give classical AMG with Jacobi."""

    smoother: str = "jacobi"
    fsai_nsteps: int = 4
    fsai_candidates: int = 2
    fsai_density: float = 0.4
    relax_target: float | None = None  # default by smoother kind
    omega: float | None = None  # overrides the power-method estimate
    power_iters: int = 20
    seed: int = 42

    soc_kind: str = "classical"
    soc_theta: float = 0.25
    soc_avg_degree: float | None = None  # switches the filter rule when set
    coarsen_seed: int = 42

    interp: str = "classical"
    bamg_lmin: int = 1
    bamg_lmax: int = 3
    bamg_eps: float | None = None  # default by test space width
    bamg_mu: float = 10.0
    smooth_p: bool = False
    filter_rho: float = 1.0
    filter_target: str = "none"

    testspace: str | None = None  # default by need: constant / rigid_body
    n_test_vectors: int = 4
    srqm_iters: int = 10
    coords: np.ndarray | None = None

    nu1: int = 1
    nu2: int = 1
    max_coarse: int = 200
    max_levels: int = 20
    stall_fraction: float = 0.9

    def validate(self):
        if self.smoother not in SMOOTHER_KINDS:
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if self.interp not in INTERP_KINDS:
            raise ValueError(f"unknown interpolation {self.interp!r}")
        if self.filter_target not in FILTER_TARGETS:
            raise ValueError(f"unknown filter target {self.filter_target!r}")
        if self.testspace is not None and self.testspace not in TESTSPACE_KINDS:
            raise ValueError(f"unknown test space {self.testspace!r}")
        if not 0.0 < self.filter_rho <= 1.0:
            raise ValueError(f"filter_rho must be in (0, 1], got {self.filter_rho}")
        if self.max_levels < 2:
            raise ValueError("need at least two levels")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("smoothing step counts must be nonnegative")
        return self


@dataclass
class Level:
    """One grid of the hierarchy; the coarsest keeps only ``a``."""

    a: SparseMatrix
    smoother: object | None = None
    p: SparseMatrix | None = None
    pt: SparseMatrix | None = None
    cf: object | None = None
    testspace: TestSpace | None = None
    soc_stats: dict = field(default_factory=dict)


class AmgHierarchy:
    """Levels plus the dense factorization of the coarsest operator."""

    def __init__(self, levels, config, symmetric=True):
        self.levels = levels
        self.config = config
        self.symmetric = symmetric
        self.factor = None
        self.factor_kind = None
        self._factor_coarsest()

    @property
    def n_levels(self):
        return len(self.levels)

    def _factor_coarsest(self):
        a = self.levels[-1].a.to_dense()
        if self.symmetric:
            try:
                self.factor = sla.cho_factor(a, lower=True, check_finite=False)
                self.factor_kind = "cholesky"
                return
            except np.linalg.LinAlgError:
                shift = 1e-12 * np.trace(a) / max(a.shape[0], 1)
                try:
                    self.factor = sla.cho_factor(
                        a + shift * np.eye(a.shape[0]), lower=True, check_finite=False
                    )
                    self.factor_kind = "cholesky+shift"
                    return
                except np.linalg.LinAlgError as exc:
                    raise AmgError(
                        "coarsest operator is not positive definite even after "
                        f"a diagonal shift of {shift:.3e}"
                    ) from exc
        try:
            self.factor = sla.lu_factor(a, check_finite=False)
            self.factor_kind = "lu"
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise AmgError("coarsest operator could not be factorized") from exc

    def coarse_solve(self, b):
        if self.factor_kind in ("cholesky", "cholesky+shift"):
            return sla.cho_solve(self.factor, b, check_finite=False)
        return sla.lu_solve(self.factor, b, check_finite=False)


def setup(A, config=None):
    """Build an :class:`AmgHierarchy` for ``A`` following ``config``."""
    cfg = (config or AmgConfig()).validate()
    levels = [Level(a=A)]
    symmetric = is_symmetric(A)
    ts = None
    warnings = []

    for depth in range(cfg.max_levels - 1):
        lvl = levels[-1]
        a = lvl.a
        n = a.nrows
        if n <= cfg.max_coarse:
            break

        sm = _build_smoother(a, cfg)
        lvl.smoother = sm

        if ts is None and _needs_testspace(cfg):
            ts = _initial_testspace(a, sm, cfg)
        lvl.testspace = ts

        g = compute_soc(
            a, cfg.soc_kind, vectors=ts.vectors if ts is not None else None
        )
        if cfg.soc_avg_degree is not None:
            filter_soc(g, avg_degree=cfg.soc_avg_degree)
        else:
            filter_soc(g, theta=cfg.soc_theta)
        cf = pmis(g, seed=cfg.coarsen_seed + depth)
        lvl.cf = cf
        lvl.soc_stats = {"kept_edges": g.n_kept, "coarse": cf.n_coarse}

        if cf.n_coarse == 0 or cf.n_coarse >= cfg.stall_fraction * n:
            warnings.append(
                f"level {depth}: coarsening stalled ({cf.n_coarse} of {n}); "
                "factorizing here"
            )
            break

        prol = _build_prolongation(a, g, cf, ts, cfg)
        if cfg.smooth_p:
            prol = smooth_prolongation(
                a, prol, omega=None, power_iters=cfg.power_iters, seed=cfg.seed
            )

        w_coarse = (
            ts.vectors[cf.coarse_nodes]
            if ts is not None
            else np.ones((cf.n_coarse, 1))
        )
        p = prol.matrix
        if cfg.filter_target in ("prolongation", "both") and cfg.filter_rho < 1.0:
            p = filter_with_compensation(p, w_coarse, cfg.filter_rho)

        a_next = galerkin_product(a, p, symmetrize=None if symmetric else False)
        if cfg.filter_target in ("operator", "both") and cfg.filter_rho < 1.0:
            a_next = filter_with_compensation(a_next, w_coarse, cfg.filter_rho)
            symmetric = symmetric and is_symmetric(a_next)

        lvl.p = p
        lvl.pt = transpose(p)
        if ts is not None:
            ts = restrict_testspace(ts, cf)
        levels.append(Level(a=a_next))

    h = AmgHierarchy(levels, cfg, symmetric=symmetric)
    h.setup_warnings = warnings
    return h


def _needs_testspace(cfg):
    return (
        cfg.testspace is not None
        or cfg.interp == "bamg"
        or cfg.soc_kind == "affinity"
        or (cfg.filter_target != "none" and cfg.filter_rho < 1.0)
    )


def _initial_testspace(a, sm, cfg):
    kind = cfg.testspace
    if kind is None:
        kind = "rigid_body" if cfg.coords is not None else "constant"
    if kind == "constant":
        return analytic_near_kernel("constant", n=a.nrows)
    if kind == "rigid_body":
        if cfg.coords is None:
            raise AmgError("rigid body test space needs node coordinates")
        return analytic_near_kernel("rigid_body", coords=cfg.coords)
    if kind == "srqm":
        rng = np.random.default_rng(cfg.seed)
        v0 = rng.standard_normal((a.nrows, cfg.n_test_vectors))
        return srqm(a, sm, v0, iters=cfg.srqm_iters)
    # srqm refinement of the analytic guess
    if cfg.coords is not None:
        start = analytic_near_kernel("rigid_body", coords=cfg.coords).vectors
    else:
        start = analytic_near_kernel("constant", n=a.nrows).vectors
    return srqm(a, sm, start, iters=cfg.srqm_iters)


def _build_smoother(a, cfg):
    if cfg.smoother == "fsai":
        sm = build_fsai(
            a,
            nsteps=cfg.fsai_nsteps,
            candidates_per_step=cfg.fsai_candidates,
            target_density=cfg.fsai_density,
        )
    else:
        sm = build_jacobi(a)
    estimate_relaxation(
        a, sm, power_iters=cfg.power_iters, seed=cfg.seed, relax_target=cfg.relax_target
    )
    if cfg.omega is not None:
        sm.omega = float(cfg.omega)
    return sm


def _build_prolongation(a, g, cf, ts, cfg):
    if cfg.interp == "classical":
        return classical_weights(a, g, cf)
    if cfg.interp == "extended_i":
        return extended_i_weights(a, g, cf)
    if cfg.interp == "hybrid":
        return hybrid_weights(a, g, cf)
    return bamg_prolongation(
        a,
        g,
        cf,
        ts.vectors,
        l_min=cfg.bamg_lmin,
        l_max=cfg.bamg_lmax,
        eps=cfg.bamg_eps,
        mu=cfg.bamg_mu,
    )


def vcycle(h, y, level=0):
    """One V-cycle sweep for A x = y from a zero initial guess.

    Linear in ``y``; with equal pre and post smoothing counts and a symmetric
    hierarchy the induced operator is symmetric, so it can precondition a
    conjugate gradient iteration.
    """
    levels = h.levels
    if level == len(levels) - 1:
        return h.coarse_solve(y)
    lvl = levels[level]
    cfg = h.config
    x = apply_smoother(lvl.smoother, lvl.a, y, np.zeros_like(y), cfg.nu1)
    r = y - spmv(lvl.a, x)
    rc = spmv(lvl.pt, r)
    dc = vcycle(h, rc, level + 1)
    x = x + spmv(lvl.p, dc)
    x = apply_smoother(lvl.smoother, lvl.a, y, x, cfg.nu2)
    return x


def complexities(h):
    """(grid complexity, operator complexity) relative to the finest level."""
    n0 = h.levels[0].a.nrows
    nnz0 = max(h.levels[0].a.nnz, 1)
    c_gd = sum(l.a.nrows for l in h.levels) / max(n0, 1)
    c_op = sum(l.a.nnz for l in h.levels) / nnz0
    return c_gd, c_op


def level_table(h):
    """Per-level size summary as a list of dicts (stable key order)."""
    rows = []
    prev_n = None
    for k, l in enumerate(h.levels):
        n = l.a.nrows
        nnz = l.a.nnz
        rows.append(
            {
                "level": k,
                "n": n,
                "nnz": nnz,
                "avg_nnz_per_row": round(nnz / max(n, 1), 3),
                "coarsening_ratio": round(n / prev_n, 4) if prev_n else 1.0,
            }
        )
        prev_n = n
    return rows


def summary(h):
    """Human-readable hierarchy table."""
    c_gd, c_op = complexities(h)
    lines = [
        f"levels: {h.n_levels}   grid complexity: {c_gd:.4f}   "
        f"operator complexity: {c_op:.4f}",
        f"{'level':>5} {'n':>10} {'nnz':>12} {'nnz/row':>9} {'ratio':>7}",
    ]
    for row in level_table(h):
        lines.append(
            f"{row['level']:>5} {row['n']:>10} {row['nnz']:>12} "
            f"{row['avg_nnz_per_row']:>9.3f} {row['coarsening_ratio']:>7.4f}"
        )
    return "\n".join(lines)


@dataclass
class SolveReport:
    """Everything a solve run reports; times in seconds."""

    method: str
    converged: bool
    n_iterations: int
    rtol: float
    final_relres: float
    c_gd: float
    c_op: float
    n_levels: int
    levels: list
    setup_seconds: float
    solve_seconds: float
    total_seconds: float
    matrix_n: int
    matrix_nnz: int
    history: list | None = None
