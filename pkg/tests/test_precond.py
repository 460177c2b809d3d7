import dataclasses

import numpy as np
import pytest

from mpresb.errors import ContractError, InnerSolveError, NotPositiveDefiniteError
from mpresb.fem import Mesh, assemble_mass
from mpresb.krylov import gmres
from mpresb.precond import (
    BAS,
    KINDS,
    MPRESB,
    PRESB,
    BlockDiagonal,
    InnerSolver,
    bas_alpha,
    make_preconditioner,
)
from mpresb.sparse import SparseMatrix, to_dense

from oracles import dense_system


def random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.mark.parametrize("mode", ["direct", "iterative"])
def test_inner_identity(mode, rng):
    b = random_complex(rng, 5)
    np.testing.assert_allclose(InnerSolver(SparseMatrix.identity(5), mode).solve(b), b, rtol=1e-14)


@pytest.mark.parametrize("mode", ["direct", "iterative"])
def test_inner_one_node_mass(mode):
    M = assemble_mass(Mesh(2, 0.5))
    x = InnerSolver(M, mode).solve(np.array([1.0]))
    assert x[0] == pytest.approx(9.0, rel=1e-14)


@pytest.mark.parametrize("mode", ["direct", "iterative"])
def test_inner_diagonal(mode):
    x = InnerSolver(SparseMatrix.diag([2.0, 3.0]), mode).solve(np.array([2.0, 3.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-14)


@pytest.mark.parametrize("mode,tol", [("direct", 1e-12), ("iterative", 1e-10)])
def test_inner_residual_contract(problem_factory, rng, mode, tol):
    p = problem_factory(2, 4, 1e-2, 10.0)
    for P in (MPRESB(p, inner=mode, inner_tol=tol), PRESB(p, inner=mode, inner_tol=tol)):
        for s in P.solvers:
            b = random_complex(rng, p.n)
            x = s.solve(b)
            assert np.linalg.norm(s.matrix @ x - b) <= tol * np.linalg.norm(b)


def test_inner_real_matrix_complex_rhs_splits(problem_factory, rng):
    p = problem_factory(2, 3)
    s = InnerSolver(p.M)
    b = random_complex(rng, p.n)
    x = s.solve(b)
    np.testing.assert_array_equal(x.real, s.solve(b.real))
    np.testing.assert_array_equal(x.imag, s.solve(b.imag))


def test_inner_not_positive_definite():
    A = SparseMatrix.diag([1.0, -1.0])
    with pytest.raises(NotPositiveDefiniteError):
        InnerSolver(A, "direct")


def test_inner_nonconvergence_reported():
    s = InnerSolver(SparseMatrix.diag(np.arange(1.0, 21.0)), "iterative", tol=1e-14, maxiter=2)
    with pytest.raises(InnerSolveError) as info:
        s.solve(np.ones(20))
    assert info.value.residual > 1e-14
    assert not isinstance(info.value, NotPositiveDefiniteError)


def test_inner_bad_mode():
    with pytest.raises(ContractError):
        InnerSolver(SparseMatrix.identity(2), "magic")


def _zero_K(problem):
    n = problem.n
    K0 = SparseMatrix(n, n, np.zeros(n + 1), [], [], hermitian=True)
    return dataclasses.replace(problem, K=K0)


def test_mpresb_k_zero_reduces_to_mass_solves(problem_factory, rng):
    p = _zero_K(problem_factory(2, 3, 1e-2, 3.0))
    P = MPRESB(p)
    pv, qv = random_complex(rng, p.n), random_complex(rng, p.n)
    r, s = P.solve(pv, qv)
    Md = p.M.toarray()
    np.testing.assert_allclose(r, np.linalg.solve(Md, pv), rtol=1e-12)
    np.testing.assert_allclose(s, np.linalg.solve(Md, qv), rtol=1e-12)


def test_mpresb_opposite_inputs(problem_factory, rng):
    p = problem_factory(2, 3, 1e-2, 3.0)
    P = MPRESB(p)
    q = random_complex(rng, p.n)
    r, s = P.solve(-q, q)
    B = p.M.toarray() + p.sqrt_nu * p.K.toarray()
    np.testing.assert_allclose(s, np.linalg.solve(B, q), rtol=1e-12)
    np.testing.assert_allclose(r, -s, rtol=1e-15)


def test_presb_zero_input(problem_factory):
    p = problem_factory(2, 3, 1e-2, 3.0)
    r, s = PRESB(p).solve(np.zeros(p.n), np.zeros(p.n))
    assert not np.any(r) and not np.any(s)


def test_bd_k_zero(problem_factory, rng):
    # omega = 0 and K = 0: each diagonal block is M itself
    p = _zero_K(dataclasses.replace(problem_factory(2, 3), nu=1.0, omega=0.0))
    pv, qv = random_complex(rng, p.n), random_complex(rng, p.n)
    r, s = BlockDiagonal(p).solve(pv, qv)
    Md = p.M.toarray()
    np.testing.assert_allclose(r, np.linalg.solve(Md, pv), rtol=1e-12)
    np.testing.assert_allclose(s, np.linalg.solve(Md, qv), rtol=1e-12)


def test_bd_scaling(problem_factory, rng):
    p = problem_factory(2, 3, 1e-2, 3.0)
    P = BlockDiagonal(p)
    pv, qv = random_complex(rng, p.n), random_complex(rng, p.n)
    r1, s1 = P.solve(pv, qv)
    r2, s2 = P.solve(2 * pv, 2 * qv)
    np.testing.assert_allclose(r2, 2 * r1, rtol=1e-15)
    np.testing.assert_allclose(s2, 2 * s1, rtol=1e-15)


def test_bas_alpha_formula():
    assert bas_alpha(1e-4, 1e2) == 1.0
    assert bas_alpha(1.0, 0.0) == 1.0
    assert bas_alpha(1e-2, 10.0) == pytest.approx(2.0 / 2.0)
    assert bas_alpha(1e-2, 100.0) == pytest.approx(101 / 11)


def test_bas_omega_zero_structure(problem_factory, rng):
    p = dataclasses.replace(problem_factory(2, 2), nu=1.0, omega=0.0)
    P = BAS(p)
    assert P.alpha == 1.0
    n = p.n
    I = np.eye(n)
    J = 0.5 * np.block([[I, I], [I, -I]])
    B = p.M.toarray() + p.K.toarray()
    ref = 2 * J @ np.block([[B, 0 * B], [0 * B, B]])
    Pd = to_dense(P.matrix())
    assert np.max(np.abs(Pd - ref)) <= 1e-15
    v = random_complex(rng, 2 * n)
    ref_apply = np.linalg.solve(ref, v)
    assert np.linalg.norm(P.apply(v) - ref_apply) <= 1e-12 * np.linalg.norm(ref_apply)


def test_bas_rejects_nonpositive_alpha(problem_factory):
    with pytest.raises(ContractError):
        BAS(problem_factory(2, 2), alpha=0.0)


@pytest.mark.parametrize("k", [2, 3])
def test_factorization_identities(problem_factory, k):
    p = problem_factory(2, k, 1e-2, 10.0)
    n = p.n
    M, K = p.M.toarray(), p.K.toarray()
    d = dense_system(M, K, p.nu, p.omega)
    I, Z = np.eye(n), np.zeros((n, n))
    left = np.block([[I, -I], [Z, I]])
    right = np.block([[I, I], [Z, I]])
    Hh = p.sqrt_nu * K
    Rt = np.block([[M + Hh, Z], [Hh, M + Hh]])
    G = p.sqrt_nu * (K + 1j * p.omega * M)
    Qt = np.block([[M + G, Z], [G, M + G.conj().T]])
    assert np.max(np.abs(left @ Rt @ right - d["R"])) <= 1e-14
    assert np.max(np.abs(left @ Qt @ right - d["Q"])) <= 1e-14


@pytest.mark.parametrize("kind", KINDS)
def test_materialized_matrices_match_oracle(problem_factory, kind):
    p = problem_factory(2, 3, 1e-2, 10.0)
    d = dense_system(p.M.toarray(), p.K.toarray(), p.nu, p.omega)
    P = make_preconditioner(kind, p)
    assert np.max(np.abs(to_dense(P.matrix()) - d[kind])) <= 1e-14


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("nu,omega", [(1e-2, 10.0), (1e-6, 1e3)])
def test_apply_matches_dense_lu(problem_factory, rng, kind, nu, omega):
    p = problem_factory(2, 3, nu, omega)
    d = dense_system(p.M.toarray(), p.K.toarray(), nu, omega)
    P = make_preconditioner(kind, p)
    V = rng.standard_normal((p.dim, 100)) + 1j * rng.standard_normal((p.dim, 100))
    ref = np.linalg.solve(d[kind], V)
    for j in range(100):
        out = P.apply(V[:, j])
        assert np.linalg.norm(out - ref[:, j]) <= 1e-10 * np.linalg.norm(ref[:, j])


@pytest.mark.parametrize("kind", KINDS)
def test_apply_residual_contract(problem_factory, rng, kind):
    tol = 1e-12
    p = problem_factory(2, 3, 1e-2, 10.0)
    P = make_preconditioner(kind, p, inner_tol=tol)
    Pm = P.matrix()
    for _ in range(100):
        v = random_complex(rng, p.dim)
        assert np.linalg.norm(Pm @ P.apply(v) - v) <= 10 * tol * np.linalg.norm(v)


@pytest.mark.parametrize("kind", KINDS)
def test_apply_residual_contract_iterative_inner(problem_factory, rng, kind):
    tol = 1e-10
    p = problem_factory(2, 3, 1e-2, 10.0)
    P = make_preconditioner(kind, p, inner="iterative", inner_tol=tol)
    Pm = P.matrix()
    for _ in range(10):
        v = random_complex(rng, p.dim)
        assert np.linalg.norm(Pm @ P.apply(v) - v) <= 10 * tol * np.linalg.norm(v)


@pytest.mark.parametrize("kind", KINDS)
def test_two_inner_solves_per_apply(problem_factory, rng, kind):
    p = problem_factory(2, 3, 1e-2, 10.0)
    P = make_preconditioner(kind, p)
    for k in range(1, 4):
        P.apply(random_complex(rng, p.dim))
        assert P.inner_solves == 2 * k
    if kind == "presb":
        assert [s.calls for s in P.solvers] == [3, 3]


def test_presb_equals_mpresb_when_omega_zero(problem_factory, rng):
    p = problem_factory(2, 3, 1e-2, 0.0)
    R, Q = MPRESB(p), PRESB(p)
    for _ in range(10):
        v = random_complex(rng, p.dim)
        a, b = R.apply(v), Q.apply(v)
        assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(a)


@pytest.mark.parametrize("kind", KINDS)
def test_linearity(problem_factory, rng, kind):
    p = problem_factory(2, 3, 1e-4, 1.0)
    P = make_preconditioner(kind, p)
    u, v = random_complex(rng, p.dim), random_complex(rng, p.dim)
    a, b = 1.5 - 2j, -0.25 + 1j
    lhs = P.apply(a * u + b * v)
    rhs = a * P.apply(u) + b * P.apply(v)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_make_preconditioner_unknown(problem_factory):
    with pytest.raises(ContractError):
        make_preconditioner("ilu", problem_factory(2, 2))


def test_apply_length_check(problem_factory):
    P = MPRESB(problem_factory(2, 2))
    with pytest.raises(ContractError):
        P.apply(np.ones(3))


@pytest.mark.parametrize("kind", KINDS)
def test_iterative_inner_outer_counts_match_direct(problem_factory, kind):
    p = problem_factory(2, 4, 1e-4, 1.0)
    _, rd = gmres(p.operator, p.b, make_preconditioner(kind, p))
    _, ri = gmres(p.operator, p.b, make_preconditioner(kind, p, inner="iterative", inner_tol=1e-12))
    assert rd.converged and ri.converged
    assert abs(rd.iterations - ri.iterations) <= 1
