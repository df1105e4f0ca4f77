"""Algebraic multigrid preconditioning toolkit.

Sparse CSR kernels with striped block storage, Jacobi and adaptive factored
approximate-inverse smoothers, strength-based coarsening with a randomized
parallel splitting, four prolongation schemes (classical, distance-two,
greedy-thinned distance-two, and least-squares against a near-kernel test
space), operator and prolongation filtering with compensation, a V-cycle
hierarchy, and preconditioned CG / BiCGstab drivers.
"""

from .errors import (
    AmgError,
    BreakdownError,
    DimensionMismatchError,
    IoFormatError,
    NotSpdError,
    RecipeError,
    ZeroDiagonalError,
)
from .sparse import (
    CfPartition,
    SparseMatrix,
    galerkin_product,
    is_symmetric,
    spgemm,
    spmv,
    transpose,
)
from .striped import StripedMatrix, partition_rows, spmv_striped
from .smoothers import Smoother, apply_smoother, build_fsai, build_jacobi, estimate_relaxation
from .testspace import TestSpace, analytic_near_kernel, orthonormalize, restrict_testspace, srqm
from .coarsen import SocGraph, compute_soc, filter_soc, pmis, symmetrized_kept_graph
from .interp import (
    Prolongation,
    bamg_prolongation,
    classical_weights,
    extended_i_weights,
    extended_set,
    filter_with_compensation,
    hybrid_set,
    hybrid_weights,
    maxvol_select,
    smooth_prolongation,
)
from .hierarchy import AmgConfig, AmgHierarchy, SolveReport, complexities, setup, vcycle
from .krylov import KrylovConfig, KrylovResult, bicgstab, pcg
from .problems import gen_elasticity3d, gen_heterogeneous, gen_poisson7, gen_rotated_anisotropy
from . import io

__version__ = "0.1.0"
