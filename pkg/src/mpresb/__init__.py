"""MPRESB, PRESB, BD and BAS block preconditioners for two-by-two block
complex linear systems, with a Q1 finite-element test-problem generator,
right-preconditioned GMRES and dense spectral checks."""

from .errors import (
    ContractError,
    InnerSolveError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SpectralError,
)
from .fem import Mesh, ProblemInstance, build_mesh, build_system
from .krylov import SolveReport, cg, gmres
from .precond import BAS, MPRESB, PRESB, BlockDiagonal, InnerSolver, bas_alpha, make_preconditioner
from .sparse import BlockOperator, SparseMatrix, WeightedSum, block_apply, spmv, to_dense

__version__ = "0.1.0"
