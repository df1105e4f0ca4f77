"""Benchmark problem generators.

All generators produce canonical :class:`SparseMatrix` operators on regular
grids with unit spacing and homogeneous Dirichlet conditions handled by
elimination (boundary unknowns simply absent, their couplings dropped).
"""
from __future__ import annotations

import numpy as np

from .sparse import SparseMatrix

__all__ = [
    "gen_poisson7",
    "gen_rotated_anisotropy",
    "gen_elasticity3d",
    "gen_heterogeneous",
    "hex_element_stiffness",
]


def _stencil_matrix(nx, ny, nz, offsets, coeffs, center):
    """Assemble a constant-stencil operator on an nx*ny*nz grid.

    ``offsets`` is a list of (di, dj, dk) neighbor shifts with coefficients
    ``coeffs``; couplings reaching outside the grid are dropped (eliminated
    Dirichlet boundary).  Node order is x fastest, then y, then z.
    """
    n = nx * ny * nz
    idx = np.arange(n)
    ii = idx % nx
    jj = (idx // nx) % ny
    kk = idx // (nx * ny)
    rows = [idx]
    cols = [idx]
    vals = [np.full(n, float(center))]
    for (di, dj, dk), c in zip(offsets, coeffs):
        ni, nj, nk = ii + di, jj + dj, kk + dk
        ok = (0 <= ni) & (ni < nx) & (0 <= nj) & (nj < ny) & (0 <= nk) & (nk < nz)
        rows.append(idx[ok])
        cols.append((ni + nx * (nj + ny * nk))[ok])
        vals.append(np.full(int(ok.sum()), float(c)))
    return SparseMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n)
    )


def gen_poisson7(nx, ny, nz):
    """7-point Laplacian on an nx*ny*nz grid: diagonal 6, face neighbors -1."""
    _check_dims(nx, ny, nz)
    offsets = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
    return _stencil_matrix(nx, ny, nz, offsets, [-1.0] * 6, 6.0)


def rotated_tensor(theta, kx, ky, kz):
    """Diffusion tensor diag(kx, ky, kz) rotated by ``theta`` in the xy plane."""
    c, s = np.cos(theta), np.sin(theta)
    q = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return q.T @ np.diag([float(kx), float(ky), float(kz)]) @ q


def gen_rotated_anisotropy(nx, ny, nz, theta=np.pi / 6, kx=10.0, ky=1.0e-3, kz=1.0e-6):
    """Anisotropic diffusion with the principal axes rotated in the xy plane.

    Second-order finite differences: second derivatives along the axes plus
    the four-point cross stencil for the mixed xy term.  Up to 11 points here;
    the assembly handles the full 27-point neighborhood, collapsing to the
    plain 7-point stencil when the rotation vanishes.
    """
    _check_dims(nx, ny, nz)
    k = rotated_tensor(theta, kx, ky, kz)
    kxx, kyy, kzz, kxy = k[0, 0], k[1, 1], k[2, 2], k[0, 1]
    offsets = [
        ((-1, 0, 0), -kxx),
        ((1, 0, 0), -kxx),
        ((0, -1, 0), -kyy),
        ((0, 1, 0), -kyy),
        ((0, 0, -1), -kzz),
        ((0, 0, 1), -kzz),
        ((1, 1, 0), -kxy / 2.0),
        ((-1, -1, 0), -kxy / 2.0),
        ((1, -1, 0), kxy / 2.0),
        ((-1, 1, 0), kxy / 2.0),
    ]
    center = 2.0 * (kxx + kyy + kzz)
    return _stencil_matrix(
        nx, ny, nz, [o for o, _ in offsets], [c for _, c in offsets], center
    )


def hex_element_stiffness(e, nu, hx=1.0, hy=1.0, hz=1.0):
    """Stiffness of one trilinear hexahedral element, isotropic material.

    8 nodes x 3 displacement components, 2x2x2 Gauss quadrature.  Node order
    follows the grid convention (x fastest), dof order is node-major xyz.
    """
    lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = e / (2.0 * (1.0 + nu))
    d = np.zeros((6, 6))
    d[:3, :3] = lam
    d[np.arange(3), np.arange(3)] += 2.0 * mu
    d[3:, 3:] = np.eye(3) * mu
    # reference cube [-1,1]^3, node order x fastest
    nodes = np.array(
        [[sx, sy, sz] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)],
        dtype=float,
    )
    gp = np.array([-1.0, 1.0]) / np.sqrt(3.0)
    jac = np.diag([hx / 2.0, hy / 2.0, hz / 2.0])
    detj = np.prod(np.diag(jac))
    inv_j = np.diag(1.0 / np.diag(jac))
    ke = np.zeros((24, 24))
    for gx in gp:
        for gy in gp:
            for gz in gp:
                xi = np.array([gx, gy, gz])
                # derivatives of the 8 shape functions in reference coords
                dref = np.empty((8, 3))
                for a in range(8):
                    sx, sy, sz = nodes[a]
                    dref[a, 0] = sx * (1 + sy * xi[1]) * (1 + sz * xi[2]) / 8.0
                    dref[a, 1] = sy * (1 + sx * xi[0]) * (1 + sz * xi[2]) / 8.0
                    dref[a, 2] = sz * (1 + sx * xi[0]) * (1 + sy * xi[1]) / 8.0
                dphys = dref @ inv_j
                b = np.zeros((6, 24))
                for a in range(8):
                    bx, by, bz = dphys[a]
                    c = 3 * a
                    b[0, c] = bx
                    b[1, c + 1] = by
                    b[2, c + 2] = bz
                    b[3, c] = by
                    b[3, c + 1] = bx
                    b[4, c + 1] = bz
                    b[4, c + 2] = by
                    b[5, c] = bz
                    b[5, c + 2] = bx
                ke += b.T @ d @ b * detj
    return ke


def gen_elasticity3d(nx, ny, nz, e=1.0, nu=0.3, bc="clamped"):
    """Linear elasticity on a beam of nx*ny*nz trilinear hex elements.

    Returns ``(A, coords)`` where ``coords`` has one xyz row per retained
    mesh node and ``A`` couples three displacement dofs per node (node-major
    xyz ordering).  ``bc="clamped"`` eliminates the dofs on the x=0 face;
    ``bc="free"`` keeps the whole beam floating, so the six rigid body modes
    lie in the null space.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError(f"need at least one element per axis, got {(nx, ny, nz)}")
    if bc not in ("clamped", "free"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    mx, my, mz = nx + 1, ny + 1, nz + 1
    n_nodes = mx * my * mz
    node = lambda i, j, k: i + mx * (j + my * k)
    ke = hex_element_stiffness(e, nu)

    # gather the 8 corner nodes of every element
    ei, ej, ek = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    ei, ej, ek = ei.ravel(), ej.ravel(), ek.ravel()
    corners = np.stack(
        [
            node(ei + dx, ej + dy, ek + dz)
            for dz in (0, 1)
            for dy in (0, 1)
            for dx in (0, 1)
        ],
        axis=1,
    )  # (n_elems, 8)
    dofs = (3 * corners[:, :, None] + np.arange(3)).reshape(-1, 24)  # (n_elems, 24)
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    vals = np.tile(ke.ravel(), dofs.shape[0])

    n_dofs = 3 * n_nodes
    ii, jj, kk = np.meshgrid(
        np.arange(mx), np.arange(my), np.arange(mz), indexing="ij"
    )
    coords = np.empty((n_nodes, 3))
    flat = node(ii, jj, kk).ravel()
    coords[flat, 0] = ii.ravel()
    coords[flat, 1] = jj.ravel()
    coords[flat, 2] = kk.ravel()

    if bc == "clamped":
        keep_node = coords[:, 0] > 0
        keep_dof = np.repeat(keep_node, 3)
        new_dof = np.full(n_dofs, -1, dtype=np.int64)
        new_dof[keep_dof] = np.arange(int(keep_dof.sum()))
        ok = keep_dof[rows] & keep_dof[cols]
        rows, cols, vals = new_dof[rows[ok]], new_dof[cols[ok]], vals[ok]
        coords = coords[keep_node]
        n_dofs = int(keep_dof.sum())
    a = SparseMatrix.from_coo(rows, cols, vals, (n_dofs, n_dofs))
    return a, coords


def gen_heterogeneous(nx, ny, contrast=1.0e4, seed=0):
    """2D diffusion with a lognormal-like random coefficient field.

    Each grid node draws a coefficient ``contrast**u`` with u uniform in
    [0, 1); the conductance of the edge between neighbors is the harmonic
    mean of the two coefficients.  Eliminated boundary connections reuse the
    node's own coefficient, so ``contrast=1`` reproduces the homogeneous
    5-point Poisson matrix exactly.
    """
    if min(nx, ny) < 2:
        raise ValueError(f"grid must be at least 2 per axis, got {(nx, ny)}")
    if contrast < 1.0:
        raise ValueError(f"contrast must be >= 1, got {contrast}")
    n = nx * ny
    rng = np.random.default_rng(seed)
    k = contrast ** rng.random(n)
    idx = np.arange(n)
    ii = idx % nx
    jj = idx // nx
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ni, nj = ii + di, jj + dj
        inside = (0 <= ni) & (ni < nx) & (0 <= nj) & (nj < ny)
        nbr = ni + nx * nj
        cond = np.where(inside, 2.0 * k * k[nbr % n] / (k + k[nbr % n]), k)
        diag += cond
        rows.append(idx[inside])
        cols.append(nbr[inside])
        vals.append(-cond[inside])
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return SparseMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n)
    )


def _check_dims(nx, ny, nz):
    if min(nx, ny, nz) < 2:
        raise ValueError(f"grid must be at least 2 per axis, got {(nx, ny, nz)}")
