import dataclasses

import numpy as np
import pytest

from mpresb.errors import ContractError
from mpresb.fem import Mesh, assemble_mass, assemble_stiffness
from mpresb.spectral import (
    hermitian_eigs,
    imag_part_bounds,
    preconditioned_dense,
    spectrum_general,
    spectrum_rinv_q,
    spectrum_rinv_q_blocks,
)

from oracles import dense_system, multiset_distance


def charpoly_roots(A):
    """Eigenvalues from Faddeev-LeVerrier coefficients (independent of LAPACK eig)."""
    n = A.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(A)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ Mk) / k)
    return np.sort(np.roots(coeffs).real)


def test_hermitian_eigs_diagonal():
    np.testing.assert_allclose(hermitian_eigs(np.diag([3.0, 1.0, 2.0])), [1, 2, 3], atol=1e-15)


def test_hermitian_eigs_2x2():
    np.testing.assert_allclose(hermitian_eigs(np.array([[2.0, 1.0], [1.0, 2.0]])), [1, 3], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_hermitian_eigs_vs_charpoly(rng, n):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = B + B.conj().T
    assert np.max(np.abs(hermitian_eigs(A) - charpoly_roots(A))) <= 1e-10


def test_hermitian_eigs_rejects_nonhermitian():
    with pytest.raises(ContractError):
        hermitian_eigs(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_hermitian_eigs_vectors(rng):
    B = rng.standard_normal((6, 6))
    A = B + B.T
    w, V = hermitian_eigs(A, return_vectors=True)
    assert np.linalg.norm(A @ V - V * w) <= 1e-12 * np.linalg.norm(A, 2)


def test_omega_zero_spectrum_is_one(problem_factory):
    rep = spectrum_rinv_q(problem_factory(2, 3, 1e-2, 0.0))
    assert np.max(np.abs(rep.eigenvalues - 1)) <= 1e-10


@pytest.mark.parametrize("nu", [1e-2, 1e-6])
@pytest.mark.parametrize("omega", [1e-2, 1.0, 1e2])
def test_real_part_one_and_bounds(problem_factory, nu, omega):
    p = problem_factory(2, 3, nu, omega)
    rep = spectrum_rinv_q(p)
    ev = rep.eigenvalues
    assert len(ev) == p.dim
    assert np.max(np.abs(ev.real - 1)) <= 1e-9
    b = imag_part_bounds(p)
    im = np.abs(ev.imag)
    assert im.min() >= b.lower - 1e-9 and im.max() <= b.upper + 1e-9
    assert im.max() <= p.sqrt_nu * omega + 1e-12
    assert rep.max_residual <= 1e-8


def test_conjugate_pairs(problem_factory):
    ev = spectrum_rinv_q(problem_factory(2, 3, 1e-4, 10.0)).eigenvalues
    assert multiset_distance(ev, ev.conj()) <= 1e-12


@pytest.mark.parametrize("k", [2, 3])
def test_cross_oracle_general_eigensolver(problem_factory, k):
    p = problem_factory(2, k, 1e-2, 10.0)
    d = dense_system(p.M.toarray(), p.K.toarray(), p.nu, p.omega)
    ref = np.linalg.eigvals(np.linalg.solve(d["R"], d["Q"]))
    assert multiset_distance(spectrum_rinv_q(p).eigenvalues, ref) <= 1e-8
    gen = spectrum_general(preconditioned_dense(p, "RinvQ"))
    assert multiset_distance(gen.eigenvalues, ref) <= 1e-8


def test_spectrum_blocks_scalar_case():
    # n = 1: F = 1, G = 1 + i, eigenvalues 1 +/- i/2
    ev = spectrum_rinv_q_blocks(np.array([[1.0]]), np.array([[1.0 + 1.0j]])).eigenvalues
    np.testing.assert_allclose(np.sort_complex(ev), [1 - 0.5j, 1 + 0.5j], atol=1e-15)


def test_imag_bounds_one_unknown(problem_factory):
    # a single interior node: S = K/M = 24, so both bounds coincide
    mesh = Mesh(2, 0.5)
    tiny = dataclasses.replace(
        problem_factory(2, 2, 1e-2, 10.0),
        mesh=mesh, M=assemble_mass(mesh), K=assemble_stiffness(mesh), b=np.zeros(2), yd=np.zeros(1),
    )
    b = imag_part_bounds(tiny)
    assert b.lambda_min_S == pytest.approx(24.0, rel=1e-13)
    assert b.lower == pytest.approx(b.upper, rel=1e-13)
    assert b.upper == pytest.approx(0.1 * 10 / (1 + 0.1 * 24), rel=1e-13)
    ev = spectrum_rinv_q(tiny).eigenvalues
    np.testing.assert_allclose(np.abs(ev.imag), b.upper, rtol=1e-12)


def test_spectrum_general_triangular():
    T = np.array([[1.0, 5.0, -2.0], [0.0, 2.0, 7.0], [0.0, 0.0, -3.0]])
    rep = spectrum_general(T)
    np.testing.assert_allclose(np.sort(rep.eigenvalues.real), [-3, 1, 2], atol=1e-13)
    assert rep.max_residual <= 1e-12


def test_spectrum_general_companion():
    # z^2 - 3z + 2
    C = np.array([[3.0, -2.0], [1.0, 0.0]])
    np.testing.assert_allclose(np.sort(spectrum_general(C).eigenvalues.real), [1, 2], atol=1e-14)


def test_spectrum_guard(problem_factory):
    with pytest.raises(ContractError):
        spectrum_rinv_q(problem_factory(2, 5))
    with pytest.raises(ContractError):
        spectrum_general(np.eye(1025))


def test_preconditioned_dense_unknown_target(problem_factory):
    with pytest.raises(ContractError):
        preconditioned_dense(problem_factory(2, 2), "AinvA")


def test_spectrum_csv(tmp_path, problem_factory):
    rep = spectrum_rinv_q(problem_factory(2, 2, 1e-2, 1.0))
    rep.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == 19
    back = np.array([complex(float(a), float(b)) for a, b in (l.split(",") for l in lines[1:])])
    np.testing.assert_array_equal(back, rep.eigenvalues)
