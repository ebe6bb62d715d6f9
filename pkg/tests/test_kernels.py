import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bugsylv import kernels as kn
from bugsylv.lowrank import LowRankMatrix
from bugsylv.operators import DenseOperator

from conftest import kron_solve, rel_err, separated_pair

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- orth

def test_orth_normalizes_column():
    Q = kn.orth(np.array([[3.0], [4.0]]))
    assert np.allclose(np.abs(Q[:, 0]), [0.6, 0.8], atol=1e-15)


def test_orth_identity():
    Q = kn.orth(np.eye(3))
    assert np.allclose(np.abs(Q), np.eye(3), atol=1e-15)


def test_orth_random_properties():
    M = np.random.default_rng(0).standard_normal((50, 7))
    Q = kn.orth(M)
    assert np.linalg.norm(Q.T @ Q - np.eye(7), 2) <= 1e-12
    assert np.linalg.norm(M - Q @ (Q.T @ M)) <= 1e-10 * np.linalg.norm(M)


def test_orth_rank_deficient_keeps_width():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((20, 3))
    M = np.hstack([M, M[:, :1] + M[:, 1:2], np.zeros((20, 1))])
    Q = kn.orth(M)
    assert Q.shape == (20, 5)
    assert np.linalg.norm(Q.T @ Q - np.eye(5), 2) <= 1e-12
    assert np.linalg.norm(M - Q @ (Q.T @ M)) <= 1e-10 * np.linalg.norm(M)


def test_orth_rejects_wide():
    with pytest.raises(kn.DimensionError):
        kn.orth(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 6)), elements=finite))
def test_orth_property(M):
    if M.shape[0] < M.shape[1]:
        M = M.T
    Q = kn.orth(M)
    assert Q.shape == M.shape
    assert np.linalg.norm(Q.T @ Q - np.eye(M.shape[1])) <= 1e-12
    assert np.linalg.norm(M - Q @ (Q.T @ M)) <= 1e-10 * max(np.linalg.norm(M), 1e-300)


# ---------------------------------------------------------------- svd

def test_svd_diagonal():
    assert np.allclose(kn.svd(np.diag([3.0, 1.0])).sigma, [3, 1], atol=1e-15)


def test_svd_permuted_diagonal():
    assert np.allclose(kn.svd(np.array([[0.0, 2.0], [1.0, 0.0]])).sigma, [2, 1], atol=1e-15)


def test_svd_gram_oracle():
    M = np.random.default_rng(2).standard_normal((12, 8))
    f = kn.svd(M)
    assert np.linalg.norm(f.reconstruct() - M) <= 1e-10 * f.sigma[0]
    ev = np.sort(np.linalg.eigvalsh(M.T @ M))[::-1]
    assert np.max(np.abs(f.sigma - np.sqrt(ev)) / np.sqrt(ev)) <= 1e-8


def test_svd_frozen_high_precision(frozen):
    f = kn.svd(np.array(frozen["svd"]["M"], float))
    assert np.allclose(f.sigma, frozen["svd"]["sigma"], rtol=1e-13)


@pytest.mark.parametrize("shape", [(7, 3), (3, 7), (5, 5), (1, 4), (4, 1)])
def test_svd_invariants(shape):
    M = np.random.default_rng(sum(shape)).standard_normal(shape)
    f = kn.svd(M)
    k = min(shape)
    assert np.linalg.norm(f.P.T @ f.P - np.eye(k), 2) <= 1e-12
    assert np.linalg.norm(f.Q.T @ f.Q - np.eye(k), 2) <= 1e-12
    assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
    assert np.linalg.norm(f.reconstruct() - M) <= 1e-10 * f.sigma[0]


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        kn.svd(np.array([[np.nan, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=finite))
def test_svd_property(M):
    f = kn.svd(M)
    assert np.all(np.diff(f.sigma) <= 1e-15 * max(f.sigma[0], 1))
    scale = max(f.sigma[0], 1e-300)
    assert np.linalg.norm(f.reconstruct() - M) <= 1e-10 * scale


# ---------------------------------------------------------------- schur

def test_schur_symmetric_is_diagonal():
    A = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    s = kn.real_schur(A)
    assert np.linalg.norm(s.T - np.diag(np.diag(s.T))) <= 1e-10
    assert np.allclose(np.sort(np.diag(s.T)), np.linalg.eigvalsh(A), atol=1e-10)


def test_schur_rotation_block():
    s = kn.real_schur(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert s.block_structure == (2,)
    ev = sorted(s.eigenvalues(), key=lambda z: z.imag)
    assert np.allclose(ev, [-1j, 1j], atol=1e-14)


def test_schur_random_eigenvalues():
    A = np.random.default_rng(3).standard_normal((10, 10))
    s = kn.real_schur(A)
    ours = sorted(s.eigenvalues(), key=lambda z: (round(z.real, 8), z.imag))
    ref = sorted(np.linalg.eigvals(A), key=lambda z: (round(z.real, 8), z.imag))
    assert np.max(np.abs(np.array(ours) - np.array(ref))) <= 1e-6


def test_schur_frozen_eigenvalues(frozen):
    s = kn.real_schur(np.array(frozen["schur"]["M"], float))
    ours = sorted((z.real, z.imag) for z in s.eigenvalues())
    assert np.allclose(ours, frozen["schur"]["eigenvalues"], atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_schur_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 25))
    A = rng.standard_normal((n, n))
    s = kn.real_schur(A)
    nA = np.linalg.norm(A)
    assert np.linalg.norm(s.Q.T @ s.Q - np.eye(n), 2) <= 1e-12
    assert np.linalg.norm(s.Q @ s.T @ s.Q.T - A) <= 1e-10 * nA
    assert abs(np.trace(A) - np.trace(s.T)) <= 1e-10 * nA
    assert abs(np.linalg.norm(s.T) - nA) <= 1e-10 * nA
    # everything below the block diagonal is exactly zero
    mask = np.tril(np.ones((n, n), bool), -1)
    for i0, p in zip(s.starts, s.block_structure):
        if p == 2:
            mask[i0 + 1, i0] = False
    assert np.all(s.T[mask] == 0.0)


# ---------------------------------------------------------------- sylvester

def test_sylvester_identity():
    C = np.random.default_rng(4).standard_normal((4, 3))
    assert np.allclose(kn.solve_sylvester_dense(np.eye(4), np.eye(3), C), C / 2, atol=1e-15)


def test_sylvester_diagonal():
    a, b = np.array([1.0, 2.0, 5.0]), np.array([0.5, 3.0])
    C = np.arange(6.0).reshape(3, 2) + 1
    X = kn.solve_sylvester_dense(np.diag(a), np.diag(b), C)
    assert np.allclose(X, C / (a[:, None] + b[None, :]), rtol=1e-14)


def test_sylvester_frozen_exact(frozen):
    f = frozen["sylvester"]
    X = kn.solve_sylvester_dense(np.array(f["A"], float), np.array(f["B"], float), np.array(f["C"], float))
    assert rel_err(X, f["X"]) <= 1e-14
    Xk = kn.solve_sylvester_kron_oracle(np.array(f["A"], float), np.array(f["B"], float), np.array(f["C"], float))
    assert rel_err(Xk, f["X"]) <= 1e-14


def test_sylvester_matches_kron_random():
    rng = np.random.default_rng(5)
    A, B = rng.standard_normal((8, 8)), rng.standard_normal((6, 6))
    A += 6 * np.eye(8)
    B += 6 * np.eye(6)
    C = rng.standard_normal((8, 6))
    assert rel_err(kn.solve_sylvester_dense(A, B, C), kn.solve_sylvester_kron_oracle(A, B, C)) <= 1e-10


def test_sylvester_residual_bound():
    rng = np.random.default_rng(6)
    A, B = separated_pair(rng, 20, 15)
    C = rng.standard_normal((20, 15))
    X = kn.solve_sylvester_dense(A, B, C)
    res = np.linalg.norm(A @ X + X @ B.T - C)
    assert res <= 1e-10 * (np.linalg.norm(A) + np.linalg.norm(B)) * np.linalg.norm(X)


def test_sylvester_singular_pencil():
    with pytest.raises(kn.SingularPencilError):
        kn.solve_sylvester_dense(np.diag([1.0, 2.0]), np.diag([-1.0, 3.0]), np.ones((2, 2)))


def test_sylvester_shape_error():
    with pytest.raises(kn.DimensionError):
        kn.solve_sylvester_dense(np.eye(2), np.eye(3), np.ones((3, 3)))


def test_sylvester_reuses_schur():
    rng = np.random.default_rng(7)
    A, B = separated_pair(rng, 6, 5)
    C = rng.standard_normal((6, 5))
    X1 = kn.solve_sylvester_dense(A, B, C)
    X2 = kn.solve_sylvester_dense(A, B, C, schur_a=kn.real_schur(A), schur_b=kn.real_schur(B))
    assert np.array_equal(X1, X2)


# ---------------------------------------------------------------- kron oracle

def test_kron_scalar():
    X = kn.solve_sylvester_kron_oracle(np.array([[2.0]]), np.array([[3.0]]), np.array([[10.0]]))
    assert X[0, 0] == pytest.approx(2.0, rel=1e-15)


def test_kron_identity_zero():
    C = np.random.default_rng(8).standard_normal((3, 4))
    assert np.allclose(kn.solve_sylvester_kron_oracle(np.eye(3), np.zeros((4, 4)), C), C, atol=1e-15)


def test_kron_cap():
    with pytest.raises(kn.DimensionError):
        kn.solve_sylvester_kron_oracle(np.eye(70), np.eye(70), np.ones((70, 70)))


def test_kron_singular():
    with pytest.raises(kn.SingularSystemError):
        kn.solve_sylvester_kron_oracle(np.eye(2), -np.eye(2), np.ones((2, 2)))


def test_kron_deterministic():
    rng = np.random.default_rng(9)
    A, B = separated_pair(rng, 5, 4)
    C = rng.standard_normal((5, 4))
    assert np.array_equal(kn.solve_sylvester_kron_oracle(A, B, C), kn.solve_sylvester_kron_oracle(A, B, C))


@pytest.mark.parametrize("seed", range(50))
def test_dense_vs_kron_mutual(seed):
    rng = np.random.default_rng(100 + seed)
    m, n = rng.integers(1, 25, size=2)
    A, B = separated_pair(rng, m, n)
    C = rng.standard_normal((m, n))
    X = kn.solve_sylvester_dense(A, B, C)
    assert rel_err(X, kn.solve_sylvester_kron_oracle(A, B, C)) <= 1e-10
    assert rel_err(X, kron_solve(A, B, C)) <= 1e-10


# ---------------------------------------------------------------- norms

def test_scaled_norm_ones():
    assert kn.scaled_fro_norm(np.ones((9, 9)), d=2, n=9) == pytest.approx(1.0, rel=1e-15)


def test_scaled_norm_zero_tensor():
    assert kn.scaled_fro_norm(np.zeros((3, 3, 3)), d=3, n=3) == 0.0


def test_scaled_norm_bruteforce():
    X = np.random.default_rng(10).standard_normal((16, 16))
    brute = sum(x * x for x in X.ravel()) ** 0.5 / 16
    assert kn.scaled_fro_norm(X, d=2, n=16) == pytest.approx(brute, rel=1e-14)


def test_scaled_norm_rectangular_extension():
    X = np.ones((4, 9))
    assert kn.scaled_fro_norm(X) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(kn.DimensionError):
        kn.scaled_fro_norm(X, d=2, n=4)


def _factors(rng, m, n, r):
    return LowRankMatrix.from_factors(rng.standard_normal((m, r)), rng.standard_normal((n, r)))


def test_residual_exact_solution_diagonal():
    a, b = np.arange(1.0, 21.0), np.arange(2.0, 22.0)
    A, B = np.diag(a), np.diag(b)
    rng = np.random.default_rng(11)
    X = _factors(rng, 20, 20, 3)
    C = LowRankMatrix.from_factors(np.hstack([A @ X.U, X.U]), np.hstack([X.V, B @ X.V]),
                                   np.kron(np.eye(2), X.S))
    assert kn.low_rank_residual_norm(DenseOperator(A), DenseOperator(B), C, X) <= 1e-12


def test_residual_zero_x():
    rng = np.random.default_rng(12)
    C = _factors(rng, 10, 8, 2)
    X = LowRankMatrix(np.eye(10, 1), np.zeros((1, 1)), np.eye(8, 1))
    r = kn.low_rank_residual_norm(DenseOperator(np.eye(10)), DenseOperator(np.eye(8)), C, X)
    assert r == pytest.approx(np.linalg.norm(C.to_dense()), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_residual_matches_dense(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((20, 20)), rng.standard_normal((20, 20))
    C, X = _factors(rng, 20, 20, 3), _factors(rng, 20, 20, 3)
    dense = np.linalg.norm(A @ X.to_dense() + X.to_dense() @ B.T - C.to_dense())
    r = kn.low_rank_residual_norm(DenseOperator(A), DenseOperator(B), C, X)
    assert abs(r - dense) <= 1e-12 * dense


def test_residual_dimension_error():
    rng = np.random.default_rng(13)
    with pytest.raises(kn.DimensionError):
        kn.low_rank_residual_norm(DenseOperator(np.eye(5)), DenseOperator(np.eye(4)),
                                  _factors(rng, 5, 5, 1), _factors(rng, 5, 4, 1))


def test_subspace_distance():
    U = np.eye(4, 2)
    assert kn.subspace_distance(U, U) == 0.0
    W = np.eye(4)[:, 2:3]
    assert kn.subspace_distance(U, W) == pytest.approx(1.0)


@pytest.mark.parametrize("scale", [1e-160, 1e-300, 1e150])
def test_factorizations_at_extreme_scales(scale):
    rng = np.random.default_rng(14)
    M = rng.standard_normal((7, 4)) * scale
    Q, R = kn.qr(M)
    assert np.linalg.norm(Q.T @ Q - np.eye(4)) <= 1e-13
    assert np.linalg.norm(Q @ R - M) <= 1e-13 * np.linalg.norm(M)
    f = kn.svd(M)
    assert np.linalg.norm(f.reconstruct() - M) <= 1e-12 * np.linalg.norm(M)
    assert np.allclose(f.sigma / scale, kn.svd(M / scale).sigma, rtol=1e-12)
    A = rng.standard_normal((6, 6)) * scale
    s = kn.real_schur(A)
    assert np.linalg.norm(s.Q @ s.T @ s.Q.T - A) <= 1e-12 * np.linalg.norm(A)


def test_svd_mixed_magnitudes_regression():
    # hypothesis-found case: a 1e-160 entry once made the bidiagonal step lose accuracy
    M = np.array([[1.22596697e-160, 0.0, 0.0], [1.0, 0.0, 0.0]])
    f = kn.svd(M)
    assert np.linalg.norm(f.reconstruct() - M) <= 1e-15
    assert f.sigma[0] == pytest.approx(1.0, rel=1e-15)
