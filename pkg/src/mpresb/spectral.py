"""
Dense eigenvalue tools for desk-scale verification of the preconditioned
spectra.

The spectrum of ``R^{-1} Q`` (MPRESB against PRESB) is obtained without a
nonsymmetric eigensolver. ``R^{-1} Q`` is similar to a block lower-triangular
matrix whose diagonal blocks are ``I + (F + H)^{-1} S`` and
``I - (F + H)^{-1} S``, with ``H`` and ``S`` the Hermitian and skew-Hermitian
parts of ``G``. Since ``(F + H)^{-1/2} S (F + H)^{-1/2}`` is skew-Hermitian,
the eigenvalues are ``1 +/- i mu`` where ``mu`` runs over the eigenvalues of a
Hermitian matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SpectralError
from .fem import ProblemInstance
from .precond import mpresb_matrix, presb_matrix
from .sparse import to_dense

__all__ = [
    "MAX_SPECTRAL_N",
    "SpectrumReport",
    "ImagPartBounds",
    "hermitian_eigs",
    "spectrum_rinv_q",
    "spectrum_rinv_q_blocks",
    "imag_part_bounds",
    "spectrum_general",
    "preconditioned_dense",
    "condition_product",
]

log = logging.getLogger(__name__)

# block order n guard (the 2n x 2n operators stay within the dense guard)
MAX_SPECTRAL_N = 512
HERMITIAN_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-10


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    max_residual: float
    source: str

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("re,im\n")
            for z in self.eigenvalues:
                fh.write(f"{z.real:.17g},{z.imag:.17g}\n")

    def summary(self) -> dict[str, float]:
        ev = self.eigenvalues
        return {
            "count": len(ev),
            "min_re": float(ev.real.min()),
            "max_re": float(ev.real.max()),
            "min_im": float(ev.imag.min()),
            "max_im": float(ev.imag.max()),
        }


@dataclass
class ImagPartBounds:
    """Interval for ``|Im(lambda)|`` over the spectrum of ``R^{-1} Q``:
    ``sqrt(nu) w / (1 + sqrt(nu) lambda_max(S))`` to
    ``sqrt(nu) w / (1 + sqrt(nu) lambda_min(S))`` with
    ``S = M^{-1/2} K M^{-1/2}``."""

    lower: float
    upper: float
    lambda_min_S: float
    lambda_max_S: float


def _guard(n, what="matrix"):
    if n > MAX_SPECTRAL_N * 2:
        raise ContractError(f"{what} of dimension {n} exceeds the dense spectral guard")


def hermitian_eigs(A, return_vectors=False):
    """All eigenvalues (ascending) of a dense Hermitian matrix.

    Rejects inputs that are not Hermitian to ``1e-12`` relative to the
    largest entry, and checks every eigenpair residual against
    ``1e-10 ||A||``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError("hermitian_eigs needs a square matrix")
    _guard(A.shape[0])
    scale = max(float(np.max(np.abs(A))) if A.size else 0.0, np.finfo(float).tiny)
    if np.max(np.abs(A - A.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ContractError("hermitian_eigs: input is not Hermitian")
    Ah = 0.5 * (A + A.conj().T)
    try:
        w, V = np.linalg.eigh(Ah)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"Hermitian eigensolver failed on a {A.shape[0]}x{A.shape[0]} matrix") from exc
    if A.size:
        res = np.linalg.norm(Ah @ V - V * w, axis=0).max()
        norm = np.linalg.norm(Ah, 2)
        if res > EIG_RESIDUAL_TOL * max(norm, np.finfo(float).tiny):
            raise SpectralError(f"eigenpair residual {res:.3e} exceeds contract")
    return (w, V) if return_vectors else w


def _inv_sqrt(A):
    w, V = hermitian_eigs(A, return_vectors=True)
    if w[0] <= 0:
        raise ContractError("matrix is not positive definite")
    return (V / np.sqrt(w)) @ V.conj().T, w


def spectrum_rinv_q_blocks(F, G) -> SpectrumReport:
    """Spectrum of ``R^{-1} Q`` for dense blocks ``F`` (HPD) and ``G`` (PSD)."""
    F = np.asarray(F, dtype=np.complex128)
    G = np.asarray(G, dtype=np.complex128)
    n = F.shape[0]
    _guard(2 * n)
    Hpart = 0.5 * (G + G.conj().T)
    Spart = 0.5 * (G - G.conj().T)
    Z, _ = _inv_sqrt(F + Hpart)
    T = Z @ Spart @ Z
    # -i T is Hermitian; eigenvalues of W = I + (F+H)^{-1} S are 1 + i mu
    mu, Y = hermitian_eigs(-1j * T, return_vectors=True)
    X = Z @ Y
    FH_inv_S = Z @ (Z @ Spart)
    WX = X + FH_inv_S @ X
    res_w = np.linalg.norm(WX - X * (1 + 1j * mu), axis=0) / np.linalg.norm(X, axis=0)
    VX = X - FH_inv_S @ X
    res_v = np.linalg.norm(VX - X * (1 - 1j * mu), axis=0) / np.linalg.norm(X, axis=0)
    ev = np.concatenate([1 + 1j * mu, 1 - 1j * mu])
    return SpectrumReport(
        eigenvalues=ev,
        max_residual=float(max(res_w.max(initial=0.0), res_v.max(initial=0.0))),
        source="R^-1 Q (skew-Hermitian reduction)",
    )


def spectrum_rinv_q(problem: ProblemInstance) -> SpectrumReport:
    """All ``2n`` eigenvalues of ``R^{-1} Q`` for a problem instance."""
    if problem.n > MAX_SPECTRAL_N:
        raise ContractError(f"n = {problem.n} exceeds the spectral guard {MAX_SPECTRAL_N}")
    return spectrum_rinv_q_blocks(to_dense(problem.F), to_dense(problem.G))


def imag_part_bounds(problem: ProblemInstance) -> ImagPartBounds:
    if problem.n > MAX_SPECTRAL_N:
        raise ContractError(f"n = {problem.n} exceeds the spectral guard {MAX_SPECTRAL_N}")
    Minvh, _ = _inv_sqrt(to_dense(problem.M))
    S = Minvh @ to_dense(problem.K) @ Minvh
    S = 0.5 * (S + S.conj().T)
    lam = hermitian_eigs(S)
    s = problem.sqrt_nu
    w = problem.omega
    lo, hi = float(lam[0]), float(lam[-1])
    return ImagPartBounds(lower=s * w / (1 + s * hi), upper=s * w / (1 + s * lo),
                          lambda_min_S=lo, lambda_max_S=hi)


def spectrum_general(T, source="general matrix") -> SpectrumReport:
    """Eigenvalues of a general dense complex matrix with eigenpair residuals."""
    T = np.asarray(T, dtype=np.complex128)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ContractError("spectrum_general needs a square matrix")
    _guard(T.shape[0])
    try:
        w, V = np.linalg.eig(T)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"QR iteration did not converge on a {T.shape[0]}x{T.shape[0]} matrix") from exc
    res = np.linalg.norm(T @ V - V * w, axis=0) / np.linalg.norm(V, axis=0)
    return SpectrumReport(eigenvalues=w, max_residual=float(res.max(initial=0.0)), source=source)


def preconditioned_dense(problem: ProblemInstance, target: str) -> np.ndarray:
    """Dense ``R^{-1} Q``, ``R^{-1} A`` or ``Q^{-1} A`` (``target`` one of
    ``RinvQ``, ``RinvA``, ``QinvA``)."""
    R = lambda: to_dense(mpresb_matrix(problem))
    Q = lambda: to_dense(presb_matrix(problem))
    A = lambda: to_dense(problem.operator)
    pairs = {"RinvQ": (R, Q), "RinvA": (R, A), "QinvA": (Q, A)}
    if target not in pairs:
        raise ContractError(f"unknown spectrum target {target!r}")
    left, right = pairs[target]
    return np.linalg.solve(left(), right())


def condition_product(problem: ProblemInstance) -> dict[str, float]:
    """2-norm condition numbers of ``R^{-1}A``, ``R^{-1}Q`` and ``Q^{-1}A``.
    The first never exceeds the product of the other two."""
    out = {t: float(np.linalg.cond(preconditioned_dense(problem, t))) for t in ("RinvA", "RinvQ", "QinvA")}
    log.info(
        "cond(R^-1 A) = %.4g <= cond(R^-1 Q) * cond(Q^-1 A) = %.4g",
        out["RinvA"], out["RinvQ"] * out["QinvA"],
    )
    return out
