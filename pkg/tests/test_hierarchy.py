"""Hierarchy setup and the V-cycle against a dense two-grid oracle."""
from __future__ import annotations

import numpy as np
import pytest

from amgkit import (
    AmgConfig,
    AmgError,
    SparseMatrix,
    complexities,
    gen_poisson7,
    is_symmetric,
    setup,
    spmv,
    vcycle,
)
from amgkit.hierarchy import level_table, summary

from conftest import poisson1d, poisson2d


def test_setup_coarsens_until_small():
    a = poisson2d(20)
    h = setup(a, AmgConfig(max_coarse=30))
    assert h.n_levels >= 2
    assert h.levels[-1].a.nrows <= 30 or h.setup_warnings
    sizes = [l.a.nrows for l in h.levels]
    assert sizes == sorted(sizes, reverse=True)


def test_single_level_when_already_small():
    a = poisson1d(50)
    h = setup(a, AmgConfig(max_coarse=200))
    assert h.n_levels == 1
    assert h.factor_kind == "cholesky"
    # the V-cycle is then a direct solve
    b = np.arange(1.0, 51.0)
    x = vcycle(h, b)
    np.testing.assert_allclose(spmv(a, x), b, rtol=1e-10)


def test_complexities_are_at_least_one():
    h = setup(poisson2d(16), AmgConfig(max_coarse=20))
    c_gd, c_op = complexities(h)
    assert c_gd >= 1.0
    assert c_op >= 1.0


def test_level_table_and_summary():
    h = setup(poisson2d(16), AmgConfig(max_coarse=20))
    rows = level_table(h)
    assert rows[0]["level"] == 0
    assert rows[0]["n"] == 256
    assert rows[0]["coarsening_ratio"] == 1.0
    assert all(r["coarsening_ratio"] < 1.0 for r in rows[1:])
    text = summary(h)
    assert "levels:" in text and "operator complexity" in text


def test_galerkin_coarse_operators_stay_spd():
    h = setup(poisson2d(16), AmgConfig(max_coarse=20))
    for lvl in h.levels[1:]:
        assert is_symmetric(lvl.a)
        eigs = np.linalg.eigvalsh(lvl.a.to_dense())
        assert eigs.min() > 0.0


def _dense_two_grid_error_operator(h):
    lvl = h.levels[0]
    a = lvl.a.to_dense()
    p = lvl.p.to_dense()
    ac = h.levels[1].a.to_dense()
    omega = lvl.smoother.omega
    if lvl.smoother.kind == "jacobi":
        minv = np.diag(lvl.smoother.inv_diag)
    else:
        g = lvl.smoother.gmat.to_dense()
        minv = g.T @ g
    s = np.eye(a.shape[0]) - omega * minv @ a
    cgc = np.eye(a.shape[0]) - p @ np.linalg.solve(ac, p.T @ a)
    nu1, nu2 = h.config.nu1, h.config.nu2
    return np.linalg.matrix_power(s, nu2) @ cgc @ np.linalg.matrix_power(s, nu1)


def test_two_grid_error_operator_matches_dense_oracle(rng):
    a = poisson1d(8)
    h = setup(a, AmgConfig(max_coarse=4, max_levels=2))
    assert h.n_levels == 2
    e_dense = _dense_two_grid_error_operator(h)
    for _ in range(20):
        e = rng.standard_normal(8)
        # one stationary two-grid step on A u = 0 maps the error e to E e,
        # and from a zero first guess that step is e - vcycle(A e)
        got = e - vcycle(h, spmv(a, e))
        want = e_dense @ e
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12 * np.abs(want).max() + 1e-15)


def test_two_grid_oracle_with_uneven_smoothing(rng):
    a = poisson1d(8)
    h = setup(a, AmgConfig(max_coarse=4, max_levels=2, nu1=2, nu2=0))
    assert h.n_levels == 2
    e_dense = _dense_two_grid_error_operator(h)
    e = rng.standard_normal(8)
    got = e - vcycle(h, spmv(a, e))
    np.testing.assert_allclose(got, e_dense @ e, atol=1e-13)


def test_two_grid_oracle_with_fsai(rng):
    a = poisson1d(8)
    h = setup(a, AmgConfig(max_coarse=4, max_levels=2, smoother="fsai"))
    assert h.n_levels == 2
    e_dense = _dense_two_grid_error_operator(h)
    e = rng.standard_normal(8)
    got = e - vcycle(h, spmv(a, e))
    np.testing.assert_allclose(got, e_dense @ e, atol=1e-13)


def test_vcycle_is_linear(rng):
    h = setup(poisson2d(12), AmgConfig(max_coarse=20))
    y1 = rng.standard_normal(144)
    y2 = rng.standard_normal(144)
    lhs = vcycle(h, 2.0 * y1 - 3.0 * y2)
    rhs = 2.0 * vcycle(h, y1) - 3.0 * vcycle(h, y2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-13)


def test_vcycle_operator_is_symmetric(rng):
    # equal pre/post smoothing on a symmetric hierarchy gives <Bx, y> = <x, By>
    h = setup(poisson2d(10), AmgConfig(max_coarse=20))
    for _ in range(5):
        x = rng.standard_normal(100)
        y = rng.standard_normal(100)
        bx = vcycle(h, x)
        by = vcycle(h, y)
        assert abs(bx @ y - x @ by) < 1e-10 * (np.linalg.norm(bx) * np.linalg.norm(y))


def test_vcycle_reduces_error_faster_than_smoothing(rng):
    a = poisson2d(16)
    h = setup(a, AmgConfig(max_coarse=20))
    from amgkit import apply_smoother, build_jacobi, estimate_relaxation

    e0 = rng.standard_normal(256)
    jac = build_jacobi(a)
    estimate_relaxation(a, jac)
    e_mg, e_sm = e0.copy(), e0.copy()
    for _ in range(10):
        e_mg = e_mg - vcycle(h, spmv(a, e_mg))
        e_sm = apply_smoother(jac, a, np.zeros(256), e_sm, steps=2)
    norm_a = lambda e: float(e @ spmv(a, e))
    assert norm_a(e_mg) < 0.01 * norm_a(e_sm)


def test_stalled_coarsening_stops_with_warning():
    # a diagonal matrix has no edges at all: every node turns coarse and the
    # first splitting stalls, leaving a single factorized level
    a = SparseMatrix.from_dense(np.diag(np.linspace(1.0, 2.0, 300)))
    h = setup(a, AmgConfig(max_coarse=100))
    assert h.n_levels == 1
    assert h.setup_warnings
    b = np.ones(300)
    np.testing.assert_allclose(spmv(a, vcycle(h, b)), b, rtol=1e-12)


def test_rigid_body_testspace_requires_coords():
    a = poisson2d(16)
    with pytest.raises(AmgError):
        setup(a, AmgConfig(max_coarse=20, testspace="rigid_body"))


def test_bamg_setup_converges_on_poisson():
    a = gen_poisson7(8, 8, 8)
    h = setup(a, AmgConfig(max_coarse=60, interp="bamg", testspace="constant"))
    assert h.n_levels >= 2
    # rough convergence check: 10 stationary iterations shrink the residual
    rng = np.random.default_rng(0)
    b = rng.standard_normal(512)
    x = np.zeros(512)
    r0 = np.linalg.norm(b)
    for _ in range(10):
        x = x + vcycle(h, b - spmv(a, x))
    assert np.linalg.norm(b - spmv(a, x)) < 1e-2 * r0


def test_operator_filtering_breaks_symmetry_flag():
    a = gen_poisson7(6, 6, 6)
    h = setup(
        a,
        AmgConfig(
            max_coarse=40, filter_target="operator", filter_rho=0.7,
            interp="extended_i",
        ),
    )
    assert h.factor_kind in ("lu", "cholesky", "cholesky+shift")
    if not h.symmetric:
        assert h.factor_kind == "lu"


def test_invalid_configs_are_rejected():
    with pytest.raises(ValueError):
        AmgConfig(smoother="sor").validate()
    with pytest.raises(ValueError):
        AmgConfig(interp="aggregation").validate()
    with pytest.raises(ValueError):
        AmgConfig(filter_rho=0.0).validate()
    with pytest.raises(ValueError):
        AmgConfig(nu1=-1).validate()
    with pytest.raises(ValueError):
        AmgConfig(testspace="harmonic").validate()
