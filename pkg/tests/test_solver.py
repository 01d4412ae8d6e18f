import numpy as np
import pytest

from conftest import build_operator, two_triangle_square
from stagdg.scheme import materialize_operator
from stagdg.solver import (DenseOperator, KrylovConfig, SolverConvergenceError,
                           SolverDivergedError, build_pre1, build_pre2,
                           cg_solve, gmres_solve)


def test_cg_identity():
    A = DenseOperator(np.eye(4))
    b = np.array([1.0, -2.0, 3.0, 0.5])
    x, iters, hist = cg_solve(A, b)
    assert iters <= 1
    assert np.allclose(x, b)


def test_cg_exact_termination():
    A = DenseOperator(np.diag([1.0, 2.0]))
    x, iters, _ = cg_solve(A, np.array([1.0, 2.0]))
    assert iters <= 2
    assert np.allclose(x, [1.0, 1.0], atol=1e-12)


def test_cg_nonconvergence_carries_history():
    A = DenseOperator(np.diag(np.linspace(1, 1e6, 50)))
    with pytest.raises(SolverConvergenceError) as exc:
        cg_solve(A, np.ones(50), cfg=KrylovConfig(method="cg", rtol=1e-14,
                                                  maxiter=3))
    assert len(exc.value.history) == 4


def test_cg_nan_divergence():
    A = DenseOperator(np.array([[np.nan, 0], [0, 1.0]]))
    with pytest.raises(SolverDivergedError):
        cg_solve(A, np.ones(2))


def test_gmres_identity_and_hand_solve():
    x, iters, _ = gmres_solve(DenseOperator(np.eye(3)), np.array([1.0, 2.0, 3.0]))
    assert iters <= 1 and np.allclose(x, [1, 2, 3])
    A = DenseOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))
    x, _, _ = gmres_solve(A, np.array([2.0, 1.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-10)


def test_gmres_matches_cg_on_spd():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((30, 30))
    A = DenseOperator(B @ B.T + 30 * np.eye(30))
    b = rng.standard_normal(30)
    cfg = KrylovConfig(rtol=1e-12, maxiter=200)
    x1, _, _ = cg_solve(A, b, cfg=KrylovConfig(method="cg", rtol=1e-12, maxiter=200))
    x2, _, _ = gmres_solve(A, b, cfg=cfg)
    assert np.linalg.norm(x1 - x2) <= 1e-9 * np.linalg.norm(x1)


def test_gmres_monotone_history():
    rng = np.random.default_rng(1)
    A = DenseOperator(rng.standard_normal((40, 40)) + 8 * np.eye(40))
    _, _, hist = gmres_solve(A, rng.standard_normal(40),
                             cfg=KrylovConfig(rtol=1e-10, maxiter=100))
    assert all(hist[k + 1] <= hist[k] * (1 + 1e-12) for k in range(len(hist) - 1))


def test_gmres_restarted_path():
    rng = np.random.default_rng(2)
    A = DenseOperator(rng.standard_normal((25, 25)) + 10 * np.eye(25))
    b = rng.standard_normal(25)
    x, _, _ = gmres_solve(A, b, cfg=KrylovConfig(rtol=1e-10, maxiter=500,
                                                 restart=5))
    assert np.linalg.norm(A.A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_cg_on_materialized_cn_operator():
    op = build_operator(nx=2, p=2, p_gamma=0, mode="cn", dt=0.2, lo=(0, 0),
                        hi=(1, 1))
    A = materialize_operator(op)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(op.n)
    x, iters, _ = cg_solve(op, b, cfg=KrylovConfig(method="cg", rtol=1e-10,
                                                   maxiter=op.n))
    assert iters <= op.n
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) * 5


def test_preconditioned_solution_agreement():
    op = build_operator(nx=3, p=2, p_gamma=1, mode="spacetime", dt=0.15)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(op.n)
    cfg = KrylovConfig(rtol=1e-12, maxiter=4000)
    x0, _, _ = gmres_solve(op, b, cfg=cfg)
    for build in (build_pre1, build_pre2):
        xp, _, _ = gmres_solve(op, b, cfg=cfg, precond=build(op))
        assert np.linalg.norm(xp - x0) <= 1e-8 * np.linalg.norm(x0)


def test_pre1_exact_on_block_diagonal_operator():
    op = build_operator(nx=2, p=1, p_gamma=1, mode="spacetime", dt=0.3,
                        lo=(0, 0), hi=(1, 1))
    nloc = op.block_size
    A = np.zeros((op.n, op.n))
    for i in range(op.n_elements):
        A[i * nloc:(i + 1) * nloc, i * nloc:(i + 1) * nloc] = op.diag_block(i)
    pre1 = build_pre1(op)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(op.n)
    x, iters, _ = gmres_solve(DenseOperator(A), b,
                              cfg=KrylovConfig(rtol=1e-11, maxiter=50),
                              precond=pre1)
    assert iters == 1
    # inverse identity on one block
    e = np.zeros(op.n)
    e[2 * nloc + 1] = 1.0
    y = np.zeros(op.n)
    y[2 * nloc:3 * nloc] = op.diag_block(2) @ e[2 * nloc:3 * nloc]
    assert np.abs(pre1.apply(y) - e).max() <= 1e-12


def test_pre2_exact_when_stencil_covers_mesh():
    # two-triangle fully periodic square: every stencil is the whole mesh
    op = build_operator(p=2, p_gamma=1, mode="spacetime", dt=0.4,
                        mesh=two_triangle_square(periodic=True))
    assert sorted(op.stencil(0)) == [0, 1]
    pre2 = build_pre2(op)
    rng = np.random.default_rng(6)
    b = rng.standard_normal(op.n)
    x, iters, _ = gmres_solve(op, b, cfg=KrylovConfig(rtol=1e-11, maxiter=20),
                              precond=pre2)
    assert iters == 1


def test_pre2_local_system_matches_global_blocks():
    op = build_operator(nx=3, p=1, p_gamma=1, mode="spacetime", dt=0.25)
    A = materialize_operator(op)
    nloc = op.block_size
    for i in (0, 5, 11):
        sten = op.stencil(i)
        Aloc = op.local_system(sten)
        perm = np.concatenate([np.arange(g * nloc, (g + 1) * nloc) for g in sten])
        assert np.abs(Aloc - A[np.ix_(perm, perm)]).max() <= 1e-12 * np.abs(A).max()


def test_pre2_linearity_and_boundary_stencils():
    op = build_operator(nx=3, p=1, p_gamma=0, mode="cn", dt=0.2, periodic=False)
    sizes = {len(op.stencil(i)) for i in range(op.n_elements)}
    assert min(sizes) < 4     # boundary elements have fewer neighbors
    pre2 = build_pre2(op)
    rng = np.random.default_rng(7)
    x1, x2 = rng.standard_normal(op.n), rng.standard_normal(op.n)
    lhs = pre2.apply(1.5 * x1 - 0.5 * x2)
    rhs = 1.5 * pre2.apply(x1) - 0.5 * pre2.apply(x2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_linear_operator_linearity():
    op = build_operator(nx=2, p=2, p_gamma=2, mode="spacetime", dt=0.3,
                        lo=(0, 0), hi=(1, 1))
    rng = np.random.default_rng(8)
    x, y = rng.standard_normal(op.n), rng.standard_normal(op.n)
    a, bb = 0.7, -1.3
    lhs = op.matvec(a * x + bb * y)
    rhs = a * op.matvec(x) + bb * op.matvec(y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_invalid_config():
    with pytest.raises(ValueError):
        KrylovConfig(rtol=2.0)
    with pytest.raises(ValueError):
        KrylovConfig(maxiter=0)
