"""CSR container and kernel checks against dense oracles."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amgkit import (
    CfPartition,
    DimensionMismatchError,
    SparseMatrix,
    galerkin_product,
    is_symmetric,
    spgemm,
    spmv,
    transpose,
)
from amgkit.sparse import row_segment_sums

from conftest import poisson1d, random_sparse


def test_from_dense_roundtrip(rng):
    dense = rng.standard_normal((7, 5))
    dense[rng.random((7, 5)) < 0.6] = 0.0
    a = SparseMatrix.from_dense(dense)
    np.testing.assert_array_equal(a.to_dense(), dense)
    assert a.nnz == np.count_nonzero(dense)


def test_from_coo_sums_duplicates():
    a = SparseMatrix.from_coo(
        rows=[0, 0, 2, 1], cols=[1, 1, 2, 0], vals=[1.0, 2.0, 5.0, -1.0], shape=(3, 3)
    )
    expected = np.array([[0.0, 3.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 5.0]])
    np.testing.assert_array_equal(a.to_dense(), expected)


def test_identity():
    eye = SparseMatrix.identity(4)
    np.testing.assert_array_equal(eye.to_dense(), np.eye(4))


def test_validation_rejects_unsorted_columns():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 2, 2], [1, 0], [1.0, 2.0])


def test_validation_rejects_duplicate_columns():
    with pytest.raises(ValueError):
        SparseMatrix(1, 3, [0, 2], [1, 1], [1.0, 2.0])


def test_validation_rejects_nonmonotone_offsets():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 2, 1], [0, 1], [1.0, 2.0])


def test_validation_rejects_nonfinite_values():
    with pytest.raises(ValueError):
        SparseMatrix(1, 1, [0, 1], [0], [np.nan])


def test_diagonal_with_missing_entries():
    dense = np.array([[2.0, 1.0], [0.0, 0.0]])
    a = SparseMatrix.from_dense(dense)
    np.testing.assert_array_equal(a.diagonal(), [2.0, 0.0])


def test_row_view():
    a = poisson1d(4)
    cols, vals = a.row(1)
    np.testing.assert_array_equal(cols, [0, 1, 2])
    np.testing.assert_array_equal(vals, [-1.0, 2.0, -1.0])


@given(
    st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=8).map(sorted)
)
@settings(deadline=None)
def test_row_segment_sums_matches_python_slicing(lengths):
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    data = np.arange(offsets[-1], dtype=np.float64) * 0.5 - 1.0
    got = row_segment_sums(data, offsets)
    expected = np.array(
        [data[offsets[i]:offsets[i + 1]].sum() for i in range(len(lengths))]
    )
    np.testing.assert_array_equal(got, expected)


def test_row_segment_sums_empty_rows():
    data = np.array([1.0, 2.0, 3.0])
    offsets = np.array([0, 0, 2, 2, 3, 3], dtype=np.int64)
    np.testing.assert_array_equal(
        row_segment_sums(data, offsets), [0.0, 3.0, 0.0, 3.0, 0.0]
    )


def test_spmv_matches_dense_oracle(rng):
    for _ in range(30):
        n = int(rng.integers(1, 40))
        m = int(rng.integers(1, 40))
        a = random_sparse(rng, n, m, density=0.2)
        x = rng.standard_normal(m)
        np.testing.assert_allclose(spmv(a, x), a.to_dense() @ x, rtol=0, atol=1e-13)


def test_spmv_dimension_mismatch():
    a = poisson1d(3)
    with pytest.raises(DimensionMismatchError):
        spmv(a, np.ones(4))


def test_transpose_is_exact_permutation(rng):
    a = random_sparse(rng, 20, 13, density=0.15)
    at = transpose(a)
    np.testing.assert_array_equal(at.to_dense(), a.to_dense().T)
    np.testing.assert_array_equal(np.sort(at.values), np.sort(a.values))


def test_spgemm_matches_dense_oracle(rng):
    for _ in range(20):
        n, k, m = (int(rng.integers(1, 25)) for _ in range(3))
        a = random_sparse(rng, n, k, density=0.25)
        b = random_sparse(rng, k, m, density=0.25)
        c = spgemm(a, b)
        np.testing.assert_allclose(
            c.to_dense(), a.to_dense() @ b.to_dense(), rtol=0, atol=1e-13
        )


def test_spgemm_dimension_mismatch(rng):
    a = random_sparse(rng, 4, 3)
    b = random_sparse(rng, 4, 3)
    with pytest.raises(DimensionMismatchError):
        spgemm(a, b)


def test_galerkin_product_matches_dense(rng):
    a = random_sparse(rng, 18, 18, density=0.2, ensure_diag=True)
    sym = SparseMatrix.from_dense(a.to_dense() + a.to_dense().T)
    p = random_sparse(rng, 18, 6, density=0.3)
    coarse = galerkin_product(sym, p)
    expected = p.to_dense().T @ sym.to_dense() @ p.to_dense()
    np.testing.assert_allclose(coarse.to_dense(), expected, rtol=1e-13, atol=1e-13)
    assert is_symmetric(coarse)


def test_galerkin_product_keeps_nonsymmetric_input_asymmetric(rng):
    a = random_sparse(rng, 15, 15, density=0.3, ensure_diag=True)
    p = random_sparse(rng, 15, 5, density=0.4)
    coarse = galerkin_product(a, p)
    expected = p.to_dense().T @ a.to_dense() @ p.to_dense()
    np.testing.assert_allclose(coarse.to_dense(), expected, rtol=1e-12, atol=1e-13)


def test_is_symmetric():
    sym = SparseMatrix.from_dense(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    asym = SparseMatrix.from_dense(np.array([[2.0, -1.0], [0.5, 2.0]]))
    assert is_symmetric(sym)
    assert not is_symmetric(asym)


def test_cf_partition_indexing():
    cf = CfPartition(np.array([True, False, True, True, False]))
    np.testing.assert_array_equal(cf.coarse_nodes, [0, 2, 3])
    assert cf.n_coarse == 3
    np.testing.assert_array_equal(cf.coarse_index[[0, 2, 3]], [0, 1, 2])


def test_scipy_roundtrip(rng):
    a = random_sparse(rng, 12, 9, density=0.2)
    back = SparseMatrix.from_scipy(a.to_scipy())
    np.testing.assert_array_equal(back.row_offsets, a.row_offsets)
    np.testing.assert_array_equal(back.col_indices, a.col_indices)
    np.testing.assert_array_equal(back.values, a.values)
