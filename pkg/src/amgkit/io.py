"""Matrix Market and raw binary I/O.

The Matrix Market support covers real matrices in coordinate format
(``general`` and ``symmetric``, the latter expanded to full storage on read)
and dense vectors in array format.  Parse failures always report the file and
line number.

The binary dump is a flat little-endian CSR image:

    bytes 0:4    magic ``AMGF``
    bytes 4:8    format version, u32 (currently 1)
    bytes 8:32   nrows, ncols, nnz as u64
    then         row offsets  (nrows + 1) x u64
                 column indices  nnz x u32
                 values  nnz x f64
"""
from __future__ import annotations

import numpy as np

from .errors import IoFormatError
from .sparse import SparseMatrix

__all__ = [
    "read_matrix_market",
    "write_matrix_market",
    "write_matrix_market_dense",
    "read_binary",
    "write_binary",
    "BINARY_MAGIC",
    "BINARY_VERSION",
]

BINARY_MAGIC = b"AMGF"
BINARY_VERSION = 1


def _fail(path, lineno, msg):
    raise IoFormatError(f"{path}:{lineno}: {msg}")


def read_matrix_market(path):
    """Read a Matrix Market file.

    Returns
    -------
    SparseMatrix
        For ``coordinate`` files.  Symmetric storage is expanded so that both
        triangles are present.
    numpy.ndarray
        For ``array`` (dense) files, shape ``(nrows, ncols)``.
    """
    path = str(path)
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            _fail(path, 1, "missing %%MatrixMarket header")
        parts = header.strip().split()
        if len(parts) < 5:
            _fail(path, 1, f"incomplete header: {header.strip()!r}")
        _, obj, fmt, field, symmetry = (p.lower() for p in parts[:5])
        if obj != "matrix":
            _fail(path, 1, f"unsupported object {obj!r}")
        if fmt not in ("coordinate", "array"):
            _fail(path, 1, f"unsupported format {fmt!r}")
        if field != "real":
            _fail(path, 1, f"unsupported field {field!r} (only real)")
        if symmetry not in ("general", "symmetric"):
            _fail(path, 1, f"unsupported symmetry {symmetry!r}")

        lineno = 1
        size_line = None
        for line in fh:
            lineno += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            size_line = stripped
            break
        if size_line is None:
            _fail(path, lineno, "missing size line")

        if fmt == "coordinate":
            toks = size_line.split()
            if len(toks) != 3:
                _fail(path, lineno, f"size line needs 3 fields, got {len(toks)}")
            try:
                nrows, ncols, nnz = (int(t) for t in toks)
            except ValueError:
                _fail(path, lineno, f"bad size line {size_line!r}")
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            vals = np.empty(nnz, dtype=np.float64)
            k = 0
            for line in fh:
                lineno += 1
                stripped = line.strip()
                if not stripped or stripped.startswith("%"):
                    continue
                toks = stripped.split()
                if len(toks) != 3:
                    _fail(path, lineno, f"entry needs 3 fields, got {len(toks)}")
                if k >= nnz:
                    _fail(path, lineno, f"more than {nnz} entries")
                try:
                    i = int(toks[0])
                    j = int(toks[1])
                    v = float(toks[2])
                except ValueError:
                    _fail(path, lineno, f"bad entry {stripped!r}")
                if not (1 <= i <= nrows and 1 <= j <= ncols):
                    _fail(path, lineno, f"index ({i}, {j}) out of range")
                rows[k], cols[k], vals[k] = i - 1, j - 1, v
                k += 1
            if k != nnz:
                _fail(path, lineno, f"expected {nnz} entries, found {k}")
            if symmetry == "symmetric":
                off = rows != cols
                rows, cols, vals = (
                    np.concatenate([rows, cols[off]]),
                    np.concatenate([cols, rows[off]]),
                    np.concatenate([vals, vals[off]]),
                )
            return SparseMatrix.from_coo(rows, cols, vals, (nrows, ncols))

        # dense array format: column-major entry order
        toks = size_line.split()
        if len(toks) != 2:
            _fail(path, lineno, f"size line needs 2 fields, got {len(toks)}")
        try:
            nrows, ncols = (int(t) for t in toks)
        except ValueError:
            _fail(path, lineno, f"bad size line {size_line!r}")
        if symmetry != "general":
            _fail(path, lineno, "symmetric array format not supported")
        data = np.empty(nrows * ncols, dtype=np.float64)
        k = 0
        for line in fh:
            lineno += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            if k >= data.size:
                _fail(path, lineno, f"more than {data.size} entries")
            try:
                data[k] = float(stripped.split()[0])
            except ValueError:
                _fail(path, lineno, f"bad entry {stripped!r}")
            k += 1
        if k != data.size:
            _fail(path, lineno, f"expected {data.size} entries, found {k}")
        return data.reshape((ncols, nrows)).T.copy()


def write_matrix_market(path, A, symmetry="general", comment=None):
    """Write a :class:`SparseMatrix` in coordinate format.

    ``symmetry="symmetric"`` stores the lower triangle only and requires the
    matrix to be exactly symmetric.
    """
    if symmetry not in ("general", "symmetric"):
        raise ValueError(f"unsupported symmetry {symmetry!r}")
    rows = np.repeat(np.arange(A.nrows, dtype=np.int64), np.diff(A.row_offsets))
    cols = A.col_indices.astype(np.int64)
    vals = A.values
    if symmetry == "symmetric":
        t = A.to_scipy() - A.to_scipy().T
        if t.nnz and np.abs(t.data).max() != 0.0:
            raise ValueError("matrix is not symmetric; cannot write symmetric file")
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {symmetry}\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"%{line}\n")
        fh.write(f"{A.nrows} {A.ncols} {vals.size}\n")
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            fh.write(f"{i + 1} {j + 1} {v!r}\n")


def write_matrix_market_dense(path, X, comment=None):
    """Write a dense vector or block of vectors in array format."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"%{line}\n")
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for col in X.T:
            for v in col.tolist():
                fh.write(f"{v!r}\n")


def write_binary(path, A):
    """Dump a :class:`SparseMatrix` in the ``AMGF`` binary layout."""
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(np.array([BINARY_VERSION], dtype="<u4").tobytes())
        fh.write(np.array([A.nrows, A.ncols, A.nnz], dtype="<u8").tobytes())
        fh.write(A.row_offsets.astype("<u8").tobytes())
        fh.write(A.col_indices.astype("<u4").tobytes())
        fh.write(A.values.astype("<f8").tobytes())


def read_binary(path):
    """Read a matrix written by :func:`write_binary`, validating the header."""
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 32:
        raise IoFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != BINARY_MAGIC:
        raise IoFormatError(f"{path}: bad magic {raw[:4]!r}")
    version = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    if version != BINARY_VERSION:
        raise IoFormatError(f"{path}: unsupported version {version}")
    nrows, ncols, nnz = (
        int(x) for x in np.frombuffer(raw, dtype="<u8", count=3, offset=8)
    )
    expect = 32 + 8 * (nrows + 1) + 4 * nnz + 8 * nnz
    if len(raw) != expect:
        raise IoFormatError(
            f"{path}: payload is {len(raw)} bytes, header implies {expect}"
        )
    pos = 32
    offsets = np.frombuffer(raw, dtype="<u8", count=nrows + 1, offset=pos).astype(
        np.int64
    )
    pos += 8 * (nrows + 1)
    indices = np.frombuffer(raw, dtype="<u4", count=nnz, offset=pos).astype(np.int32)
    pos += 4 * nnz
    values = np.frombuffer(raw, dtype="<f8", count=nnz, offset=pos).astype(np.float64)
    try:
        return SparseMatrix(nrows, ncols, offsets, indices, values, check=True)
    except ValueError as exc:
        raise IoFormatError(f"{path}: invalid matrix payload: {exc}") from exc
