"""Jacobi and factored-approximate-inverse smoothers against dense oracles."""
from __future__ import annotations

import numpy as np
import pytest

from amgkit import (
    SparseMatrix,
    ZeroDiagonalError,
    apply_smoother,
    build_fsai,
    build_jacobi,
    estimate_relaxation,
    spmv,
)

from conftest import poisson1d, poisson2d, random_spd


def test_jacobi_apply_is_diagonal_scaling(rng):
    a = random_spd(rng, 12)
    sm = build_jacobi(a)
    r = rng.standard_normal(12)
    np.testing.assert_allclose(sm.apply(r), r / a.diagonal(), rtol=1e-15)


def test_jacobi_rejects_zero_diagonal():
    a = SparseMatrix.from_dense(np.array([[1.0, 2.0], [3.0, 0.0]]))
    with pytest.raises(ZeroDiagonalError):
        build_jacobi(a)


def test_sweep_matches_dense_recurrence(rng):
    a = poisson1d(9)
    sm = build_jacobi(a)
    sm.omega = 0.77
    b = rng.standard_normal(9)
    x0 = rng.standard_normal(9)
    dense = a.to_dense()
    want = x0.copy()
    for _ in range(3):
        want = want + 0.77 * (b - dense @ want) / dense.diagonal()
    np.testing.assert_allclose(apply_smoother(sm, a, b, x0, steps=3), want, rtol=1e-13)


def test_relaxation_on_scaled_identity_is_exact():
    a = SparseMatrix.from_dense(2.0 * np.eye(10))
    sm = build_jacobi(a)
    omega, rho = estimate_relaxation(a, sm)
    assert rho == 1.0
    assert omega == 0.9
    assert sm.omega == 0.9


def test_relaxation_estimates_jacobi_radius(rng):
    a = poisson2d(10)
    sm = build_jacobi(a)
    omega, rho = estimate_relaxation(a, sm)
    # D^{-1} A for Poisson has spectral radius just under 2
    exact = float(np.max(np.abs(np.linalg.eigvals(
        a.to_dense() / a.diagonal()[:, None]))))
    assert 0.8 * exact <= rho <= exact * 1.0000001
    np.testing.assert_allclose(omega * rho, 0.9, rtol=1e-12)


def test_relaxation_is_deterministic():
    a = poisson2d(6)
    first = estimate_relaxation(a, build_jacobi(a), seed=7)
    second = estimate_relaxation(a, build_jacobi(a), seed=7)
    assert first == second


def test_fsai_on_diagonal_matrix_is_exact_inverse(rng):
    d = rng.uniform(0.5, 3.0, 8)
    a = SparseMatrix.from_dense(np.diag(d))
    sm = build_fsai(a)
    g = sm.gmat.to_dense()
    np.testing.assert_allclose(g, np.diag(1.0 / np.sqrt(d)), rtol=1e-15)
    r = rng.standard_normal(8)
    np.testing.assert_allclose(sm.apply(r), r / d, rtol=1e-14)
    assert sm.fallback_rows == 0


def test_fsai_factor_is_lower_triangular_and_normalized(rng):
    a = random_spd(rng, 25, density=0.2)
    sm = build_fsai(a, target_density=2.0)
    g = sm.gmat.to_dense()
    assert np.allclose(g, np.tril(g))
    assert (np.diag(g) > 0).all()
    scaled = g @ a.to_dense() @ g.T
    np.testing.assert_allclose(np.diag(scaled), 1.0, rtol=1e-10)


def test_fsai_apply_equals_gtg(rng):
    a = random_spd(rng, 20, density=0.25)
    sm = build_fsai(a)
    r = rng.standard_normal(20)
    g = sm.gmat.to_dense()
    np.testing.assert_allclose(sm.apply(r), g.T @ (g @ r), rtol=1e-12, atol=1e-14)


def test_fsai_preconditioner_is_spd(rng):
    a = poisson2d(7)
    sm = build_fsai(a)
    g = sm.gmat.to_dense()
    eigs = np.linalg.eigvalsh(g @ a.to_dense() @ g.T)
    assert eigs.min() > 0.0


def test_fsai_improves_conditioning_over_jacobi():
    a = poisson2d(10)
    dense = a.to_dense()
    g = build_fsai(a).gmat.to_dense()
    d = np.diag(1.0 / np.sqrt(np.diag(dense)))
    cond = lambda m: float(np.linalg.cond(m))
    assert cond(g @ dense @ g.T) < cond(d @ dense @ d)


def test_fsai_density_cap_blocks_growth():
    a = poisson2d(8)
    # the diagonal start already exceeds the cap, so no fill is added
    sm = build_fsai(a, target_density=0.01)
    assert sm.gmat.nnz == a.nrows
    assert sm.density == pytest.approx(a.nrows / a.nnz)


def test_fsai_density_stays_near_target():
    a = poisson2d(10)
    sm = build_fsai(a, nsteps=8, candidates_per_step=2, target_density=0.4)
    # one growth round may overshoot by at most 2 entries per row
    assert sm.density <= 0.4 + 2 * a.nrows / a.nnz


def test_fsai_rejects_nonpositive_diagonal():
    a = SparseMatrix.from_dense(np.array([[1.0, 0.5], [0.5, -2.0]]))
    with pytest.raises(ZeroDiagonalError):
        build_fsai(a)


def test_fsai_falls_back_on_indefinite_rows():
    # symmetric, positive diagonal, but indefinite: the grown 2x2 local
    # system has no Cholesky factor, so row 1 reverts to its Jacobi row
    a = SparseMatrix.from_dense(np.array([[1.0, 2.0], [2.0, 1.0]]))
    sm = build_fsai(a, target_density=2.0)
    assert sm.fallback_rows == 1
    np.testing.assert_allclose(sm.gmat.to_dense(), np.eye(2), rtol=1e-15)


def test_fsai_beats_jacobi_in_energy(rng):
    # after the same number of sweeps the factored inverse should damp the
    # error at least as fast on a mildly tough SPD matrix
    a = poisson2d(9)
    b = np.zeros(a.nrows)
    x0 = rng.standard_normal(a.nrows)
    jac = build_jacobi(a)
    estimate_relaxation(a, jac)
    fsai = build_fsai(a)
    estimate_relaxation(a, fsai)
    xj = apply_smoother(jac, a, b, x0, steps=10)
    xf = apply_smoother(fsai, a, b, x0, steps=10)
    energy = lambda x: float(x @ spmv(a, x))
    assert energy(xf) < energy(xj)
