"""
Benchmark harness: preconditioner x (nu, omega) grids solved with
right-preconditioned GMRES, spectra scatters and problem export.

Table output is split in two: ``table.csv`` holds only deterministic
columns (rerunning a configuration reproduces it byte for byte) and
``timings.csv`` holds wall times. ``table.md`` mirrors the layout of the
published tables, with a dagger for runs that hit the iteration cap.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ContractError
from .fem import ProblemInstance, build_mesh, build_system, write_problem
from .krylov import gmres
from .precond import KINDS, make_preconditioner
from .spectral import (
    MAX_SPECTRAL_N,
    imag_part_bounds,
    preconditioned_dense,
    spectrum_general,
    spectrum_rinv_q,
)

__all__ = [
    "RunConfig",
    "TableRow",
    "run_table",
    "run_cell",
    "write_table",
    "format_markdown",
    "run_spectrum",
    "export_problem",
    "SPECTRUM_TARGETS",
]

log = logging.getLogger(__name__)

SPECTRUM_TARGETS = ("RinvQ", "RinvA", "QinvA")
DEFAULT_NU = (1e-2, 1e-4, 1e-6, 1e-8)
DEFAULT_OMEGA = (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4)


@dataclass
class RunConfig:
    dim: int = 2
    h: float = 2.0**-5
    nu_list: list[float] = field(default_factory=lambda: list(DEFAULT_NU))
    omega_list: list[float] = field(default_factory=lambda: list(DEFAULT_OMEGA))
    preconditioners: list[str] = field(default_factory=lambda: list(KINDS))
    restart: int = 20
    tol: float = 1e-8
    maxit: int = 1000
    inner_mode: str = "direct"
    inner_tol: float = 1e-12
    seed: int = 0  # reserved; every run is deterministic
    output_dir: Optional[Path] = None

    def __post_init__(self):
        self.nu_list = [float(v) for v in self.nu_list]
        self.omega_list = [float(v) for v in self.omega_list]
        self.preconditioners = [p.lower() for p in self.preconditioners]
        if not (self.nu_list and self.omega_list and self.preconditioners):
            raise ContractError("nu_list, omega_list and preconditioners must be nonempty")
        bad = sorted(set(self.preconditioners) - set(KINDS))
        if bad:
            raise ContractError(f"unknown preconditioner(s) {bad}")
        if self.inner_mode not in ("direct", "iterative"):
            raise ContractError(f"inner_mode must be direct or iterative, got {self.inner_mode!r}")
        if self.restart < 1 or self.maxit < 1 or not (0 < self.tol < 1):
            raise ContractError("restart and maxit must be positive and tol in (0, 1)")
        build_mesh(self.dim, self.h)
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)


@dataclass
class TableRow:
    preconditioner: str
    nu: float
    omega: float
    iterations: Optional[int]
    converged: bool
    wall_time_seconds: float
    final_relative_residual: float
    error: Optional[str] = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "ERROR"
        return "OK" if self.converged else "DIVERGED"

    @property
    def cell(self) -> str:
        """Iteration count, ``DIVERGED`` or ``ERROR``."""
        return str(self.iterations) if self.status == "OK" else self.status


def _problem_grid(config: RunConfig):
    mesh = build_mesh(config.dim, config.h)
    base = build_system(mesh, config.nu_list[0], config.omega_list[0])
    for nu in config.nu_list:
        for omega in config.omega_list:
            # M, K and b do not depend on (nu, omega)
            yield dataclasses.replace(base, nu=nu, omega=omega)


def run_cell(problem: ProblemInstance, kind: str, config: RunConfig) -> TableRow:
    """Build one preconditioner and solve; failures become ERROR rows."""
    t0 = time.perf_counter()
    try:
        P = make_preconditioner(kind, problem, inner=config.inner_mode, inner_tol=config.inner_tol)
        _, rep = gmres(problem.operator, problem.b, P, restart=config.restart,
                       tol=config.tol, maxiter=config.maxit)
    except Exception as exc:  # per-cell isolation
        log.warning("%s nu=%g omega=%g failed: %s", kind, problem.nu, problem.omega, exc)
        return TableRow(kind, problem.nu, problem.omega, None, False,
                        time.perf_counter() - t0, float("nan"), error=f"{type(exc).__name__}: {exc}")
    return TableRow(kind, problem.nu, problem.omega, rep.iterations, rep.converged,
                    time.perf_counter() - t0, rep.final_relative_residual)


def run_table(config: RunConfig) -> list[TableRow]:
    """Solve every (preconditioner, nu, omega) cell. Rows are ordered by
    preconditioner (config order), then nu, then omega. Writes ``table.csv``,
    ``timings.csv`` and ``table.md`` when ``config.output_dir`` is set."""
    rows = {}
    for problem in _problem_grid(config):
        for kind in config.preconditioners:
            row = run_cell(problem, kind, config)
            log.info("%-6s nu=%-7g omega=%-7g %s", kind, row.nu, row.omega, row.cell)
            rows[(kind, problem.nu, problem.omega)] = row
    ordered = [rows[(k, nu, om)] for k in config.preconditioners
               for nu in config.nu_list for om in config.omega_list]
    if config.output_dir is not None:
        write_table(ordered, config, config.output_dir)
    return ordered


def _g(x: float) -> str:
    return f"{x:.17g}"


def write_table(rows: list[TableRow], config: RunConfig, outdir) -> dict[str, Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "table.csv", "timings": out / "timings.csv", "markdown": out / "table.md"}
    with open(paths["csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["preconditioner", "nu", "omega", "iterations", "status", "final_relative_residual"])
        for r in rows:
            w.writerow([r.preconditioner, _g(r.nu), _g(r.omega),
                        "" if r.iterations is None else r.iterations, r.status,
                        _g(r.final_relative_residual)])
    with open(paths["timings"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["preconditioner", "nu", "omega", "wall_time_seconds"])
        for r in rows:
            w.writerow([r.preconditioner, _g(r.nu), _g(r.omega), f"{r.wall_time_seconds:.6f}"])
    paths["markdown"].write_text(format_markdown(rows, config))
    return paths


_NAMES = {"mpresb": "MPRESB", "presb": "PRESB", "bd": "BD", "bas": "BAS"}


def format_markdown(rows: list[TableRow], config: RunConfig) -> str:
    """One row per (preconditioner, nu), one value column per omega; cells
    read ``iterations (seconds)``, a dagger when not converged."""
    index = {(r.preconditioner, r.nu, r.omega): r for r in rows}
    head = ["preconditioner", "nu \\ omega"] + [f"{om:g}" for om in config.omega_list]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for kind in config.preconditioners:
        for i, nu in enumerate(config.nu_list):
            cells = []
            for om in config.omega_list:
                r = index.get((kind, nu, om))
                if r is None or r.status == "ERROR":
                    cells.append("ERROR")
                elif r.status == "DIVERGED":
                    cells.append("†")
                else:
                    cells.append(f"{r.iterations} ({r.wall_time_seconds:.2f})")
            label = _NAMES.get(kind, kind) if i == 0 else ""
            lines.append("| " + " | ".join([label, f"{nu:g}"] + cells) + " |")
    title = f"{config.dim}D, h = 2^{int(round(np.log2(config.h)))}, GMRES({config.restart})"
    return f"{title}\n\n" + "\n".join(lines) + "\n"


def _single(config: RunConfig):
    if len(config.nu_list) != 1 or len(config.omega_list) != 1:
        raise ContractError("this operation needs exactly one nu and one omega")
    return config.nu_list[0], config.omega_list[0]


def run_spectrum(config: RunConfig, target: str = "RinvQ", outdir=None) -> tuple[Path, str]:
    """Write the eigenvalue scatter of the chosen preconditioned matrix as
    ``spectrum_<target>.csv``; returns the path and a one-line summary
    (extremes of Re/Im, plus the imaginary-part bounds for ``RinvQ``)."""
    if target not in SPECTRUM_TARGETS:
        raise ContractError(f"target must be one of {SPECTRUM_TARGETS}")
    nu, omega = _single(config)
    mesh = build_mesh(config.dim, config.h)
    if mesh.n_interior > MAX_SPECTRAL_N:
        raise ContractError(f"n = {mesh.n_interior} exceeds the spectral guard {MAX_SPECTRAL_N}")
    problem = build_system(mesh, nu, omega)
    if target == "RinvQ":
        rep = spectrum_rinv_q(problem)
    else:
        rep = spectrum_general(preconditioned_dense(problem, target), source=target)
    out = Path(outdir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"spectrum_{target}.csv"
    rep.write_csv(path)
    s = rep.summary()
    line = (f"{target} dim={config.dim} h={config.h:g} nu={nu:g} omega={omega:g} "
            f"n_eigs={s['count']} re=[{s['min_re']:.12g}, {s['max_re']:.12g}] "
            f"im=[{s['min_im']:.12g}, {s['max_im']:.12g}] residual={rep.max_residual:.2e}")
    if target == "RinvQ":
        b = imag_part_bounds(problem)
        line += f" |im| bounds=[{b.lower:.12g}, {b.upper:.12g}]"
    (out / f"spectrum_{target}_summary.txt").write_text(line + "\n")
    return path, line


def export_problem(config: RunConfig, nu: float, omega: float, outdir=None) -> dict[str, Path]:
    """Matrix Market files for M, K, b plus ``manifest.txt``."""
    mesh = build_mesh(config.dim, config.h)
    problem = build_system(mesh, nu, omega)
    return write_problem(problem, outdir or config.output_dir or ".")
