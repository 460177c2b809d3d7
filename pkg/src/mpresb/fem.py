"""
Q1 finite elements on uniform meshes of the unit square / cube and the
time-harmonic optimal-control test system built from them.

Only interior nodes carry unknowns (homogeneous Dirichlet conditions by
elimination). Interior nodes are numbered lexicographically with the x index
running fastest: ``idx = i + m*j (+ m*m*l)`` for 0-based interior indices.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import mmio
from .errors import ContractError
from .sparse import BlockOperator, SparseMatrix, WeightedSum, spmv

__all__ = [
    "Mesh",
    "ProblemInstance",
    "build_mesh",
    "element_matrices",
    "assemble_mass",
    "assemble_stiffness",
    "desired_state",
    "build_system",
    "write_problem",
    "read_problem",
    "read_manifest",
]

# 1-D linear element on [0, h]: mass = h * _MASS_1D, stiffness = _STIFF_1D / h
_MASS_1D = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
_STIFF_1D = np.array([[1.0, -1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor-product mesh of ``(0, 1)^dim`` with width ``h = 1/N``."""

    dim: int
    h: float

    @property
    def cells_per_axis(self) -> int:
        return int(round(1.0 / self.h))

    @property
    def m(self) -> int:
        """Interior nodes per axis."""
        return self.cells_per_axis - 1

    @property
    def n_interior(self) -> int:
        return self.m**self.dim

    @property
    def n_nodes(self) -> int:
        return (self.cells_per_axis + 1) ** self.dim

    @property
    def n_elements(self) -> int:
        return self.cells_per_axis**self.dim

    def interior_coordinates(self) -> np.ndarray:
        """Coordinates of the interior nodes, shape ``(n_interior, dim)``,
        in unknown order."""
        idx = np.arange(self.n_interior)
        m = self.m
        return np.stack([((idx // m**d) % m + 1) * self.h for d in range(self.dim)], axis=1)


def build_mesh(dim: int, h: float) -> Mesh:
    """Validate ``(dim, h)`` and return the mesh. ``h`` must be ``2**-k``
    with ``k >= 2``."""
    if dim not in (2, 3):
        raise ContractError(f"dim must be 2 or 3, got {dim}")
    if not (0 < h <= 0.25):
        raise ContractError(f"h must be a power of 1/2 not exceeding 1/4, got {h}")
    k = -math.log2(h)
    if abs(k - round(k)) > 1e-12:
        raise ContractError(f"h must be a power of 1/2, got {h}")
    k = int(round(k))
    return Mesh(dim=dim, h=2.0**-k)


def element_matrices(dim: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Element mass and stiffness matrices of a Q1 cell of width ``h``.

    Local nodes are ordered by their corner bits with the x bit lowest, i.e.
    local index ``sum_d bit_d * 2**d``. Both are tensor products of the 1-D
    linear element.
    """
    m1 = h * _MASS_1D
    k1 = _STIFF_1D / h

    def kron_all(factors):
        # factors[d] acts on axis d; axis 0 must be the fastest (last) kron factor
        out = np.ones((1, 1))
        for f in reversed(factors):
            out = np.kron(out, f)
        return out

    mass = kron_all([m1] * dim)
    stiff = sum(kron_all([k1 if d == a else m1 for d in range(dim)]) for a in range(dim))
    return mass, stiff


def _corner_offsets(dim):
    bits = np.arange(2**dim)
    return np.stack([(bits >> d) & 1 for d in range(dim)], axis=1)


def _assemble(mesh: Mesh, local: np.ndarray, full: bool) -> SparseMatrix:
    N = mesh.cells_per_axis
    dim = mesh.dim
    axes = np.meshgrid(*([np.arange(N)] * dim), indexing="ij")
    origins = np.stack([a.ravel() for a in axes], axis=1)
    nodes = origins[:, None, :] + _corner_offsets(dim)[None, :, :]  # (nel, nloc, dim)

    if full:
        stride = (N + 1) ** np.arange(dim)
        ids = nodes @ stride
        size = mesh.n_nodes
    else:
        m = N - 1
        inner = nodes - 1
        interior = np.all((nodes > 0) & (nodes < N), axis=2)
        ids = np.where(interior, inner @ (m ** np.arange(dim)), -1)
        size = mesh.n_interior

    nloc = local.shape[0]
    rows = np.repeat(ids, nloc, axis=1).ravel()
    cols = np.tile(ids, (1, nloc)).ravel()
    vals = np.broadcast_to(local.ravel(), (ids.shape[0], nloc * nloc)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return SparseMatrix.from_coo(rows[keep], cols[keep], vals[keep], (size, size), hermitian=True)


def assemble_mass(mesh: Mesh, full=False) -> SparseMatrix:
    """Consistent Q1 mass matrix. With ``full=True`` the boundary nodes are
    kept (numbered lexicographically over all ``(N+1)**dim`` nodes)."""
    return _assemble(mesh, element_matrices(mesh.dim, mesh.h)[0], full)


def assemble_stiffness(mesh: Mesh, full=False) -> SparseMatrix:
    """Q1 stiffness matrix of the negative Laplacian."""
    return _assemble(mesh, element_matrices(mesh.dim, mesh.h)[1], full)


def desired_state(dim: int, point) -> float | np.ndarray:
    """Target state: ``prod_d (2 x_d - 1)^2`` on ``(0, 1/2)^dim``, zero elsewhere.

    ``point`` is a single point of length ``dim`` or an array of shape
    ``(npoints, dim)``.
    """
    p = np.asarray(point, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != dim:
        raise ContractError(f"points must have {dim} coordinates")
    if np.any(p < 0) or np.any(p > 1):
        raise ContractError("point outside the unit domain")
    inside = np.all((p > 0) & (p < 0.5), axis=1)
    val = np.where(inside, np.prod((2 * p - 1) ** 2, axis=1), 0.0)
    return float(val[0]) if single else val


@dataclass(frozen=True)
class ProblemInstance:
    """One assembled test system

        [ M                  -sqrt(nu)(K - i w M) ] [y]   [b1]
        [ sqrt(nu)(K + i w M)   M                 ] [z] = [b2]

    so ``F = M`` and ``G = sqrt(nu) (K + i w M)``.
    """

    mesh: Mesh
    M: SparseMatrix
    K: SparseMatrix
    nu: float
    omega: float
    b: np.ndarray = field(repr=False)
    yd: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.M.nrows

    @property
    def dim(self) -> int:
        """Order of the block system."""
        return 2 * self.n

    @property
    def sqrt_nu(self) -> float:
        return math.sqrt(self.nu)

    @property
    def F(self) -> WeightedSum:
        return WeightedSum.of(self.M)

    @property
    def G(self) -> WeightedSum:
        s = self.sqrt_nu
        return WeightedSum(((s, self.K), (1j * self.omega * s, self.M)), self.n)

    @property
    def hermitian_part_G(self) -> WeightedSum:
        """``(G + G*)/2 = sqrt(nu) K``."""
        return WeightedSum(((self.sqrt_nu, self.K),), self.n)

    @property
    def skew_part_G(self) -> WeightedSum:
        """``(G - G*)/2 = i w sqrt(nu) M``."""
        return WeightedSum(((1j * self.omega * self.sqrt_nu, self.M),), self.n)

    @cached_property
    def operator(self) -> BlockOperator:
        G = self.G
        return BlockOperator(self.F, -G.adjoint(), G, self.F)


def build_system(mesh: Mesh, nu: float, omega: float) -> ProblemInstance:
    """Assemble M, K and the right-hand side ``b = [M y_d; 0]`` with ``y_d``
    interpolated at the interior nodes."""
    if not (np.isfinite(nu) and nu > 0):
        raise ContractError(f"nu must be positive, got {nu}")
    if not (np.isfinite(omega) and omega >= 0):
        raise ContractError(f"omega must be nonnegative, got {omega}")
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    yd = desired_state(mesh.dim, mesh.interior_coordinates())
    b = np.concatenate([spmv(M, yd), np.zeros(M.nrows)]).astype(np.complex128)
    return ProblemInstance(mesh=mesh, M=M, K=K, nu=float(nu), omega=float(omega), b=b, yd=yd)


def write_problem(problem: ProblemInstance, outdir) -> dict[str, Path]:
    """Export ``M.mtx``, ``K.mtx``, ``b.mtx`` and ``manifest.txt`` into
    ``outdir``. Returns the written paths by name."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "M": out / "M.mtx",
        "K": out / "K.mtx",
        "b": out / "b.mtx",
        "manifest": out / "manifest.txt",
    }
    mmio.write_matrix(paths["M"], problem.M, comment="Q1 mass matrix (interior nodes)")
    mmio.write_matrix(paths["K"], problem.K, comment="Q1 stiffness matrix (interior nodes)")
    mmio.write_vector(paths["b"], problem.b, comment="right-hand side [M yd; 0]")
    manifest = {
        "dim": problem.mesh.dim,
        "h": repr(problem.mesh.h),
        "nu": repr(problem.nu),
        "omega": repr(problem.omega),
        "n": problem.n,
    }
    paths["manifest"].write_text("".join(f"{k}={v}\n" for k, v in manifest.items()))
    return paths


def read_manifest(path) -> dict[str, str]:
    """Key/value pairs of ``manifest.txt``; ``path`` is the file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.txt"
    entries = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def read_problem(indir) -> ProblemInstance:
    """Inverse of ``write_problem``."""
    d = Path(os.fspath(indir))
    man = read_manifest(d / "manifest.txt")
    mesh = build_mesh(int(man["dim"]), float(man["h"]))
    M = mmio.read_matrix(d / "M.mtx", hermitian=True)
    K = mmio.read_matrix(d / "K.mtx", hermitian=True)
    b = mmio.read_vector(d / "b.mtx").astype(np.complex128)
    if M.nrows != int(man["n"]):
        raise ContractError("manifest n disagrees with M")
    yd = desired_state(mesh.dim, mesh.interior_coordinates())
    return ProblemInstance(mesh, M, K, float(man["nu"]), float(man["omega"]), b, yd)
