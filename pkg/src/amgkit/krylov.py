"""Preconditioned Krylov solvers: conjugate gradients and BiCGstab.

Both take the operator and preconditioner as callables, converge on
||b - A x||_2 <= rtol * ||b||_2, and guard the recurrence by recomputing the
true residual periodically and at declared convergence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownError, NotSpdError

__all__ = ["KrylovConfig", "KrylovResult", "pcg", "bicgstab"]


@dataclass
class KrylovConfig:
    rtol: float = 1e-8
    max_iters: int = 5000
    record_history: bool = False
    recompute_every: int = 50


@dataclass
class KrylovResult:
    x: np.ndarray
    converged: bool
    n_iterations: int
    relres: float
    history: list = field(default_factory=list)
    restarts: int = 0


def _identity(r):
    return r


def pcg(apply_a, b, apply_m=None, x0=None, config=None):
    """Preconditioned conjugate gradients.

    Raises :class:`NotSpdError` when a search direction has non-positive
    curvature, which flags a non-SPD operator or preconditioner.
    """
    cfg = config or KrylovConfig()
    apply_m = apply_m or _identity
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    bnorm = np.linalg.norm(b)
    history = []
    if bnorm == 0.0:
        return KrylovResult(x=np.zeros_like(b), converged=True, n_iterations=0, relres=0.0, history=history)

    r = b - apply_a(x)
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    relres = np.linalg.norm(r) / bnorm
    if cfg.record_history:
        history.append((0, relres))
    if relres <= cfg.rtol:
        return KrylovResult(x=x, converged=True, n_iterations=0, relres=relres, history=history)

    for it in range(1, cfg.max_iters + 1):
        q = apply_a(p)
        curv = float(p @ q)
        if curv <= 0.0:
            raise NotSpdError(
                f"iteration {it}: direction with curvature {curv:.3e}; "
                "operator is not symmetric positive definite"
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * q
        if it % cfg.recompute_every == 0:
            r = b - apply_a(x)
        relres = np.linalg.norm(r) / bnorm
        if cfg.record_history:
            history.append((it, relres))
        if relres <= cfg.rtol:
            true_r = b - apply_a(x)
            relres = np.linalg.norm(true_r) / bnorm
            if relres <= cfg.rtol:
                return KrylovResult(x=x, converged=True, n_iterations=it, relres=relres, history=history)
            r = true_r
        z = apply_m(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return KrylovResult(x=x, converged=False, n_iterations=cfg.max_iters, relres=relres, history=history)


def bicgstab(apply_a, b, apply_m=None, x0=None, config=None):
    """Preconditioned BiCGstab.

    A vanishing shadow product restarts the recurrence once from the current
    residual, returning early when that residual already meets the tolerance;
    a second breakdown raises :class:`BreakdownError`.
    """
    cfg = config or KrylovConfig()
    apply_m = apply_m or _identity
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    bnorm = np.linalg.norm(b)
    history = []
    if bnorm == 0.0:
        return KrylovResult(x=np.zeros_like(b), converged=True, n_iterations=0, relres=0.0, history=history)

    r = b - apply_a(x)
    r_shadow = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    restarts = 0
    relres = np.linalg.norm(r) / bnorm
    if cfg.record_history:
        history.append((0, relres))
    if relres <= cfg.rtol:
        return KrylovResult(x=x, converged=True, n_iterations=0, relres=relres, history=history)

    eps_break = np.finfo(float).eps ** 2
    for it in range(1, cfg.max_iters + 1):
        rho_new = float(r_shadow @ r)
        if abs(rho_new) < eps_break * bnorm * bnorm:
            if restarts >= 1:
                raise BreakdownError(
                    f"iteration {it}: shadow product vanished twice (rho={rho_new:.3e})"
                )
            restarts += 1
            r = b - apply_a(x)
            relres = np.linalg.norm(r) / bnorm
            if relres <= cfg.rtol:
                return KrylovResult(
                    x=x, converged=True, n_iterations=it - 1, relres=relres,
                    history=history, restarts=restarts,
                )
            r_shadow = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            rho_new = float(r_shadow @ r)
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = apply_m(p)
        v = apply_a(phat)
        denom = float(r_shadow @ v)
        if denom == 0.0:
            raise BreakdownError(f"iteration {it}: stagnated (shadow direction orthogonal)")
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= cfg.rtol:
            x += alpha * phat
            r = b - apply_a(x)
            relres = np.linalg.norm(r) / bnorm
            if cfg.record_history:
                history.append((it, relres))
            if relres <= cfg.rtol:
                return KrylovResult(
                    x=x, converged=True, n_iterations=it, relres=relres,
                    history=history, restarts=restarts,
                )
            continue
        shat = apply_m(s)
        t = apply_a(shat)
        tt = float(t @ t)
        if tt == 0.0:
            raise BreakdownError(f"iteration {it}: t vanished")
        omega = float(t @ s) / tt
        x += alpha * phat + omega * shat
        r = s - omega * t
        if it % cfg.recompute_every == 0:
            r = b - apply_a(x)
        relres = np.linalg.norm(r) / bnorm
        if cfg.record_history:
            history.append((it, relres))
        if relres <= cfg.rtol:
            true_r = b - apply_a(x)
            relres = np.linalg.norm(true_r) / bnorm
            if relres <= cfg.rtol:
                return KrylovResult(
                    x=x, converged=True, n_iterations=it, relres=relres,
                    history=history, restarts=restarts,
                )
            r = true_r
        if omega == 0.0:
            raise BreakdownError(f"iteration {it}: omega vanished")
    return KrylovResult(
        x=x, converged=False, n_iterations=cfg.max_iters, relres=relres,
        history=history, restarts=restarts,
    )
