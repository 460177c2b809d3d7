"""
Block preconditioners for the two-by-two system ``[[F, -G*], [G, F]]`` of a
``ProblemInstance`` (``F = M``, ``G = sqrt(nu)(K + i w M)``).

Every preconditioner is built once (factorizations included) and then
applied as ``v -> P^{-1} v`` with exactly two inner solves per application:

``MPRESB``
    ``[[M, -sqrt(nu) K], [sqrt(nu) K, M + 2 sqrt(nu) K]]``; both inner
    systems use ``M + sqrt(nu) K`` (real SPD).
``PRESB``
    ``[[F, -G*], [G, F + G + G*]]``; inner systems ``F + G`` and ``F + G*``
    (complex, non-Hermitian positive definite).
``BlockDiagonal``
    ``blockdiag(B, B)`` with ``B = (1 + w sqrt(nu)) M + sqrt(nu) K``.
``BAS``
    ``(1 + a) J(a) blockdiag(B, B)`` with ``B = a M + sqrt(nu) K`` and the
    2x2 matrix of scaled identities ``J(a)`` inverted in closed form.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ContractError, InnerSolveError, NotPositiveDefiniteError
from .fem import ProblemInstance
from .krylov import cg, gmres
from .sparse import BlockOperator, SparseMatrix, WeightedSum

__all__ = [
    "KINDS",
    "InnerSolver",
    "BlockPreconditioner",
    "MPRESB",
    "PRESB",
    "BlockDiagonal",
    "BAS",
    "bas_alpha",
    "make_preconditioner",
    "mpresb_matrix",
    "presb_matrix",
    "bd_matrix",
    "bas_matrix",
]

KINDS = ("mpresb", "presb", "bd", "bas")


class InnerSolver:
    """Solver for one fixed sparse matrix, applied to many right-hand sides.

    Parameters
    ----------
    matrix : SparseMatrix
    mode : {"direct", "iterative"}
        ``direct`` factors once with SuperLU. For Hermitian matrices the
        factorization uses a symmetric ordering without pivoting and rejects
        non-positive pivots, so it behaves as a Cholesky (LDL^T) factorization.
        ``iterative`` runs CG for Hermitian matrices and unrestarted GMRES
        otherwise.
    tol : float
        Relative residual tolerance of the iterative mode.
    maxiter : int, optional
        Iteration cap of the iterative mode, default ``10 n``.
    """

    def __init__(self, matrix: SparseMatrix, mode="direct", tol=1e-12, maxiter=None):
        if mode not in ("direct", "iterative"):
            raise ContractError(f"unknown inner mode {mode!r}")
        if matrix.nrows != matrix.ncols:
            raise ContractError("inner solver matrix must be square")
        self.matrix = matrix
        self.mode = mode
        self.tol = tol
        self.maxiter = 10 * matrix.nrows if maxiter is None else int(maxiter)
        self.hermitian = matrix.hermitian
        self.calls = 0
        self._lu = None
        if mode == "direct":
            self._factor()

    def _factor(self):
        A = self.matrix.to_scipy().tocsc()
        if self.hermitian:
            opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                        options=dict(SymmetricMode=True))
        else:
            opts = dict(permc_spec="COLAMD")
        try:
            lu = spla.splu(A, **opts)
        except RuntimeError as exc:
            if self.hermitian:
                raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc
            raise InnerSolveError(f"factorization failed: {exc}") from exc
        if self.hermitian:
            pivots = lu.U.diagonal()
            if np.any(pivots.real <= 0) or not np.all(np.isfinite(pivots)):
                raise NotPositiveDefiniteError("non-positive pivot: matrix is not positive definite")
        self._lu = lu

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b)
        if b.shape != (self.matrix.nrows,):
            raise ContractError(f"inner solve: rhs of shape {b.shape}")
        self.calls += 1
        if self.mode == "direct":
            if b.dtype.kind == "c" and not self.matrix.is_complex:
                both = self._lu.solve(np.column_stack([b.real, b.imag]))
                return both[:, 0] + 1j * both[:, 1]
            if self.matrix.is_complex:
                b = b.astype(np.complex128, copy=False)
            return self._lu.solve(b)
        if self.hermitian:
            x, rep = cg(self.matrix, b, tol=self.tol, maxiter=self.maxiter)
        else:
            x, rep = gmres(self.matrix, b, restart=self.maxiter, tol=self.tol, maxiter=self.maxiter)
        if not rep.converged:
            raise InnerSolveError(
                f"inner {'CG' if self.hermitian else 'GMRES'} did not converge in "
                f"{rep.iterations} iterations (relative residual {rep.final_relative_residual:.3e})",
                residual=rep.final_relative_residual,
            )
        return x

    __call__ = solve


def bas_alpha(nu: float, omega: float) -> float:
    """Default BAS parameter ``(1 + nu w^2) / (1 + w sqrt(nu))``."""
    return (1.0 + nu * omega**2) / (1.0 + omega * np.sqrt(nu))


# -- materialized preconditioner matrices (for oracles and spectra) ----------

def mpresb_matrix(problem: ProblemInstance) -> BlockOperator:
    H = problem.hermitian_part_G
    return BlockOperator(problem.F, -H, H, problem.F + H.scaled(2.0))


def presb_matrix(problem: ProblemInstance) -> BlockOperator:
    G = problem.G
    Gs = G.adjoint()
    return BlockOperator(problem.F, -Gs, G, problem.F + G + Gs)


def _bd_block(problem) -> WeightedSum:
    s = problem.sqrt_nu
    return WeightedSum((((1 + problem.omega * s), problem.M), (s, problem.K)), problem.n)


def bd_matrix(problem: ProblemInstance) -> BlockOperator:
    B = _bd_block(problem)
    return BlockOperator(B, None, None, B)


def _bas_coefficients(nu, omega, alpha):
    """Entries of ``(1 + alpha) J(alpha)`` as a 2x2 scalar matrix."""
    s = np.sqrt(nu)
    c = (1 + alpha) / (alpha * (2 + nu * omega**2))
    return c * np.array(
        [[1.0, 1 + nu * omega**2 - 1j * omega * s], [1 + nu * omega**2 + 1j * omega * s, -1.0]]
    )


def bas_matrix(problem: ProblemInstance, alpha=None) -> BlockOperator:
    if alpha is None:
        alpha = bas_alpha(problem.nu, problem.omega)
    B = WeightedSum(((alpha, problem.M), (problem.sqrt_nu, problem.K)), problem.n)
    J = _bas_coefficients(problem.nu, problem.omega, alpha)
    return BlockOperator(B.scaled(J[0, 0]), B.scaled(J[0, 1]), B.scaled(J[1, 0]), B.scaled(J[1, 1]))


# -- preconditioners ---------------------------------------------------------

class BlockPreconditioner:
    """Common driver: ``apply`` splits ``v = [p; q]`` and calls ``solve``."""

    kind = ""

    def __init__(self, problem: ProblemInstance, inner="direct", inner_tol=1e-12, inner_maxiter=None):
        self.problem = problem
        self.n = problem.n
        self._inner_opts = dict(mode=inner, tol=inner_tol, maxiter=inner_maxiter)

    def _inner(self, matrix: SparseMatrix) -> InnerSolver:
        return InnerSolver(matrix, **self._inner_opts)

    @property
    def solvers(self) -> tuple[InnerSolver, ...]:
        raise NotImplementedError

    @property
    def inner_solves(self) -> int:
        return sum(s.calls for s in self.solvers)

    def solve(self, p, q):
        raise NotImplementedError

    def matrix(self) -> BlockOperator:
        """The preconditioner itself as an implicit block operator."""
        raise NotImplementedError

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (2 * self.n,):
            raise ContractError(f"preconditioner apply: vector of shape {v.shape}")
        r, s = self.solve(v[: self.n], v[self.n :])
        return np.concatenate([r, s])

    __call__ = apply

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, inner={self._inner_opts['mode']})"


class MPRESB(BlockPreconditioner):
    """Modified PRESB: both inner systems with the real SPD ``M + sqrt(nu) K``."""

    kind = "mpresb"

    def __init__(self, problem, **kw):
        super().__init__(problem, **kw)
        s = problem.sqrt_nu
        self._sK = WeightedSum.of(problem.K, s)
        self._solver = self._inner(WeightedSum(((1.0, problem.M), (s, problem.K))).materialize())

    @property
    def solvers(self):
        return (self._solver,)

    def solve(self, p, q):
        t = self._solver.solve(p + q)
        s = self._solver.solve(q - self._sK.apply(t))
        return t - s, s

    def matrix(self):
        return mpresb_matrix(self.problem)


class PRESB(BlockPreconditioner):
    """PRESB through ``Q = [[I, -I], [0, I]] Qt [[I, I], [0, I]]`` with the
    block lower-triangular ``Qt = [[F + G, 0], [G, F + G*]]``."""

    kind = "presb"

    def __init__(self, problem, **kw):
        super().__init__(problem, **kw)
        self._G = problem.G
        FG = problem.F + self._G
        FGs = problem.F + self._G.adjoint()
        self._solver_fg = self._inner(FG.materialize())
        self._solver_fgs = self._inner(FGs.materialize())

    @property
    def solvers(self):
        return (self._solver_fg, self._solver_fgs)

    def solve(self, p, q):
        u = self._solver_fg.solve(p + q)
        w = self._solver_fgs.solve(q - self._G.apply(u))
        return u - w, w

    def matrix(self):
        return presb_matrix(self.problem)


class BlockDiagonal(BlockPreconditioner):
    kind = "bd"

    def __init__(self, problem, **kw):
        super().__init__(problem, **kw)
        self._solver = self._inner(_bd_block(problem).materialize())

    @property
    def solvers(self):
        return (self._solver,)

    def solve(self, p, q):
        return self._solver.solve(p), self._solver.solve(q)

    def matrix(self):
        return bd_matrix(self.problem)


class BAS(BlockPreconditioner):
    """Block alternating splitting preconditioner; ``alpha=None`` selects
    ``bas_alpha(nu, omega)``."""

    kind = "bas"

    def __init__(self, problem, alpha=None, **kw):
        super().__init__(problem, **kw)
        if alpha is None:
            alpha = bas_alpha(problem.nu, problem.omega)
        if not alpha > 0:
            raise ContractError(f"BAS parameter must be positive, got {alpha}")
        self.alpha = float(alpha)
        B = WeightedSum(((self.alpha, problem.M), (problem.sqrt_nu, problem.K)))
        self._solver = self._inner(B.materialize())
        (a, b), (c, d) = _bas_coefficients(problem.nu, problem.omega, self.alpha)
        det = a * d - b * c
        self._Jinv = np.array([[d, -b], [-c, a]]) / det

    @property
    def solvers(self):
        return (self._solver,)

    def solve(self, p, q):
        Ji = self._Jinv
        u = Ji[0, 0] * p + Ji[0, 1] * q
        w = Ji[1, 0] * p + Ji[1, 1] * q
        return self._solver.solve(u), self._solver.solve(w)

    def matrix(self):
        return bas_matrix(self.problem, self.alpha)


_CLASSES = {"mpresb": MPRESB, "presb": PRESB, "bd": BlockDiagonal, "bas": BAS}


def make_preconditioner(kind: str, problem: ProblemInstance, **kw) -> BlockPreconditioner:
    """Construct a preconditioner by tag (``mpresb``, ``presb``, ``bd``, ``bas``)."""
    try:
        cls = _CLASSES[kind.lower()]
    except KeyError:
        raise ContractError(f"unknown preconditioner {kind!r}; expected one of {KINDS}") from None
    return cls(problem, **kw)
