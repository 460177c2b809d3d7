"""
Right-preconditioned restarted GMRES over complex scalars and conjugate
gradients for Hermitian positive definite matrices.

Both return ``(x, SolveReport)``. The iteration count is the number of
products with the system operator performed inside the iteration proper
(true-residual recomputations are not counted).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ContractError, NonFiniteError

__all__ = ["SolveReport", "gmres", "cg"]

# second Gram-Schmidt pass when |V^H v_new| exceeds this
REORTH_THRESHOLD = 1e-4
# happy breakdown when the Hessenberg subdiagonal drops below this times ||b||
BREAKDOWN_TOL = 1e-14


@dataclass
class SolveReport:
    iterations: int = 0
    restarts: int = 0
    relative_residuals: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    final_true_residual: float = float("nan")
    rhs_norm: float = 0.0
    termination: str = ""
    # index into relative_residuals where each cycle starts
    cycle_starts: list[int] = field(default_factory=list)

    @property
    def final_relative_residual(self) -> float:
        if self.rhs_norm == 0:
            return 0.0
        return self.final_true_residual / self.rhs_norm

    def cycles(self) -> list[list[float]]:
        """Residual history split per restart cycle."""
        bounds = self.cycle_starts + [len(self.relative_residuals)]
        return [self.relative_residuals[a:b] for a, b in zip(bounds[:-1], bounds[1:])]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "relative_residual"])
            for k, r in enumerate(self.relative_residuals, start=1):
                w.writerow([k, f"{r:.17g}"])


def _matvec(A):
    if A is None:
        return lambda v: v
    if hasattr(A, "apply"):
        return A.apply
    if callable(A):
        return A
    return lambda v: A @ v


def _check_finite(v, where):
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"non-finite values in {where}")


def _givens(a, b):
    """Rotation ``(c, s)`` with real ``c`` taking ``[a; b]`` to ``[r; 0]``."""
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, 1.0, b
    absa = abs(a)
    d = np.hypot(absa, abs(b))
    phase = a / absa
    return absa / d, phase * np.conj(b) / d, phase * d


def gmres(A, b, M=None, restart=20, tol=1e-8, maxiter=1000, x0=None, callback=None):
    """Restarted GMRES with right preconditioning.

    Solves ``A x = b`` by building Krylov spaces of ``A M^{-1}``; ``M`` is the
    preconditioner *application* ``v -> M^{-1} v`` (callable or an object with
    ``apply``), identity if omitted. Stops when ``||b - A x|| <= tol ||b||``
    holds for the recomputed residual, or after ``maxiter`` iterations.

    Orthogonalization is modified Gram-Schmidt with a second pass when the
    new basis vector keeps a component above ``REORTH_THRESHOLD`` along the
    existing basis.
    """
    if restart < 1:
        raise ContractError("restart must be >= 1")
    if not (0 < tol < 1):
        raise ContractError("tol must lie in (0, 1)")
    Aop = _matvec(A)
    Mop = _matvec(M)
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 1:
        raise ContractError("b must be a vector")
    n = b.shape[0]
    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.array(x0, dtype=np.complex128)
    if x.shape != b.shape:
        raise ContractError("x0 does not conform to b")

    t0 = time.perf_counter()
    rep = SolveReport()
    bnorm = float(np.linalg.norm(b))
    rep.rhs_norm = bnorm
    if bnorm == 0.0:
        x[:] = 0
        rep.converged, rep.final_true_residual, rep.termination = True, 0.0, "zero rhs"
        rep.wall_time = time.perf_counter() - t0
        return x, rep

    target = tol * bnorm
    r = b - Aop(x) if x0 is not None else b.copy()
    beta = float(np.linalg.norm(r))
    m = restart
    total = 0
    cycles = 0

    while True:
        if beta <= target:
            rep.converged = True
            rep.termination = "converged"
            break
        if total >= maxiter:
            rep.termination = "maxiter"
            break
        cycles += 1
        rep.cycle_starts.append(len(rep.relative_residuals))
        V = np.zeros((n, m + 1), dtype=np.complex128)
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m)
        sn = np.zeros(m, dtype=np.complex128)
        g = np.zeros(m + 1, dtype=np.complex128)
        g[0] = beta
        V[:, 0] = r / beta
        k = 0
        breakdown = False
        for j in range(m):
            if total >= maxiter:
                break
            # copy: operators may return views of their input
            w = np.array(Aop(Mop(V[:, j])), dtype=np.complex128)
            total += 1
            _check_finite(w, "GMRES operator product")
            for i in range(j + 1):
                hij = np.vdot(V[:, i], w)
                H[i, j] += hij
                w -= hij * V[:, i]
            wnorm = np.linalg.norm(w)
            if wnorm > 0:
                overlap = V[:, : j + 1].conj().T @ w
                if np.max(np.abs(overlap)) > REORTH_THRESHOLD * wnorm:
                    for i in range(j + 1):
                        hij = np.vdot(V[:, i], w)
                        H[i, j] += hij
                        w -= hij * V[:, i]
                    wnorm = np.linalg.norm(w)
            H[j + 1, j] = wnorm
            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hi1
                H[i + 1, j] = -np.conj(sn[i]) * hi + cs[i] * hi1
            cs[j], sn[j], H[j, j] = _givens(H[j, j], H[j + 1, j])
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            res = abs(g[j + 1])
            rep.relative_residuals.append(res / bnorm)
            if callback is not None:
                callback(res / bnorm)
            if wnorm <= BREAKDOWN_TOL * bnorm:
                breakdown = True
                break
            V[:, j + 1] = w / wnorm
            if res <= target:
                break
        if k == 0:
            rep.termination = "maxiter"
            break
        y = solve_triangular(H[:k, :k], g[:k])
        x = x + Mop(V[:, :k] @ y)
        _check_finite(x, "GMRES iterate")
        r = b - Aop(x)
        beta = float(np.linalg.norm(r))
        if breakdown and beta > target:
            rep.termination = "breakdown"
            break

    rep.iterations = total
    rep.restarts = max(cycles - 1, 0)
    rep.final_true_residual = beta
    rep.wall_time = time.perf_counter() - t0
    return x, rep


def cg(A, b, tol=1e-12, maxiter=None, x0=None, callback=None):
    """Conjugate gradients for Hermitian positive definite ``A``.

    ``A`` may be a ``SparseMatrix``, anything supporting ``@``, or a callable.
    ``callback(x, p)`` is invoked after each step with the iterate and the
    search direction used in that step.
    """
    Aop = _matvec(A)
    b = np.asarray(b)
    dtype = np.result_type(b.dtype, np.float64)
    b = b.astype(dtype, copy=False)
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)

    t0 = time.perf_counter()
    rep = SolveReport()
    bnorm = float(np.linalg.norm(b))
    rep.rhs_norm = bnorm
    rep.cycle_starts.append(0)
    if bnorm == 0.0:
        x[:] = 0
        rep.converged, rep.final_true_residual, rep.termination = True, 0.0, "zero rhs"
        return x, rep
    target = tol * bnorm

    r = b - Aop(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = np.vdot(r, r).real
    it = 0
    true_res = np.sqrt(rr)
    while it < maxiter:
        if np.sqrt(rr) <= target:
            # confirm on the true residual; on drift, replace and restart directions
            r = b - Aop(x)
            true_res = float(np.linalg.norm(r))
            if true_res <= target:
                rep.converged = True
                break
            p = r.copy()
            rr = true_res**2
        Ap = Aop(p)
        it += 1
        pAp = np.vdot(p, Ap).real
        if not np.isfinite(pAp):
            raise NonFiniteError("non-finite curvature in CG")
        if pAp <= 0:
            rep.termination = "indefinite"
            break
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        if callback is not None:
            callback(x, p)
        rr_new = np.vdot(r, r).real
        rep.relative_residuals.append(np.sqrt(rr_new) / bnorm)
        p = r + (rr_new / rr) * p
        rr = rr_new

    if not rep.converged:
        true_res = float(np.linalg.norm(b - Aop(x)))
        rep.converged = true_res <= target
    rep.iterations = it
    rep.final_true_residual = true_res
    if not rep.termination:
        rep.termination = "converged" if rep.converged else "maxiter"
    rep.wall_time = time.perf_counter() - t0
    return x, rep
