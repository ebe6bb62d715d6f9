"""Dense linear-algebra kernels.

Matrices are C-ordered ``float64`` numpy arrays.  Everything here is a pure
function of its inputs.  The numerical work is done by the compiled routines
in :mod:`bugsylv._kernels`; this module validates arguments, turns status
codes into exceptions and packages results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

EPS = _k.EPS
KRON_ORACLE_CAP = 4096


class KernelError(RuntimeError):
    """Base class for numerical failures in the kernel layer."""


class ConvergenceError(KernelError):
    """An iterative factorisation hit its sweep cap."""


class SingularPencilError(KernelError):
    """A Sylvester equation is (numerically) not uniquely solvable."""


class SingularSystemError(KernelError):
    """A linear system is numerically singular."""


class DimensionError(ValueError):
    """Operand shapes are not conformable."""


def _as_matrix(M, name="matrix"):
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``M = P @ diag(sigma) @ Q.T`` with nonincreasing sigma."""

    P: np.ndarray
    sigma: np.ndarray
    Q: np.ndarray

    def reconstruct(self):
        return (self.P * self.sigma) @ self.Q.T


@dataclass(frozen=True)
class SchurFactors:
    """Real Schur form ``A = Q @ T @ Q.T``.

    ``block_structure`` lists the diagonal block sizes (1 or 2) from the top
    left; ``starts`` holds the matching first row of each block.
    """

    Q: np.ndarray
    T: np.ndarray
    block_structure: tuple
    starts: np.ndarray

    @property
    def sizes(self):
        return np.asarray(self.block_structure, dtype=np.int64)

    def eigenvalues(self):
        """Eigenvalues read off the diagonal blocks, in block order."""
        T = self.T
        out = []
        for i0, p in zip(self.starts, self.block_structure):
            if p == 1:
                out.append(complex(T[i0, i0]))
            else:
                a, b = T[i0, i0], T[i0, i0 + 1]
                c, d = T[i0 + 1, i0], T[i0 + 1, i0 + 1]
                half = 0.5 * (a + d)
                disc = (0.5 * (a - d)) ** 2 + b * c
                root = complex(0.0, math.sqrt(-disc)) if disc < 0 else complex(math.sqrt(disc))
                out.extend([half + root, half - root])
        return np.array(out)


def qr(M):
    """Thin Householder QR, ``M = Q @ R`` with Q of width ``min(M.shape)``."""
    M = _as_matrix(M)
    if M.size == 0:
        k = min(M.shape)
        return np.zeros((M.shape[0], k)), np.zeros((k, M.shape[1]))
    Q, R, _ = _k.qr_householder(M, False)
    return Q, R


def orth(M, seed=0):
    """Orthonormal basis of the column span of ``M`` with the full width of M.

    Uses column-pivoted Householder QR.  If M is numerically rank deficient
    the dependent directions are replaced by random orthonormal completions
    (drawn from ``seed``), so the output always has ``M.shape[1]`` columns.
    """
    M = _as_matrix(M)
    m, k = M.shape
    if m < k:
        raise DimensionError(f"orth needs rows >= cols, got {M.shape}")
    if k == 0:
        return np.zeros((m, 0))
    Q, R, _ = _k.qr_householder(M, True)
    d = np.abs(np.diag(R))
    rank = 0
    if d[0] > 0.0:
        tol = max(m, k) * EPS * d[0]
        rank = int(np.count_nonzero(d > tol))
    if rank == k:
        return Q
    rng = np.random.default_rng(seed)
    Qr = Q[:, :rank]
    G = rng.standard_normal((m, k - rank))
    for _ in range(2):
        G -= Qr @ (Qr.T @ G)
    Qc, _, _ = _k.qr_householder(np.ascontiguousarray(G), False)
    Qc -= Qr @ (Qr.T @ Qc)
    Qc, _, _ = _k.qr_householder(np.ascontiguousarray(Qc), False)
    return np.ascontiguousarray(np.hstack([Qr, Qc]))


def svd(M):
    """Thin SVD by Golub-Kahan bidiagonalisation and implicit-shift QR.

    Capped at ``75 * min(m, n)`` QR sweeps; raises :class:`ConvergenceError`
    beyond that.
    """
    M = _as_matrix(M)
    m, n = M.shape
    k = min(m, n)
    if k == 0:
        return SvdFactors(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))
    if not np.all(np.isfinite(M)):
        raise ValueError("svd input contains non-finite entries")
    cap = 75 * k
    scale = _pow2_scale(M)
    M = M / scale
    if m >= n:
        U, s, V, status = _k.svd_golub_kahan(M, cap)
        P, Q = U, V
    else:
        U, s, V, status = _k.svd_golub_kahan(np.ascontiguousarray(M.T), cap)
        P, Q = V, U
    s = s * scale
    if status < 0:
        raise ConvergenceError(f"SVD did not converge within {cap} sweeps")
    return SvdFactors(np.ascontiguousarray(P[:, :k]), s[:k], np.ascontiguousarray(Q[:, :k]))


def _pow2_scale(M):
    """Power of two near max|M|; dividing by it is exact and keeps the
    iterations clear of their absolute underflow floors."""
    amax = float(np.max(np.abs(M))) if M.size else 0.0
    if amax == 0.0:
        return 1.0
    return math.ldexp(1.0, math.frexp(amax)[1])


def singular_values(M):
    return svd(M).sigma


def real_schur(A):
    """Real Schur decomposition via Hessenberg reduction and Francis
    double-shift QR (cap ``40 * n`` sweeps)."""
    A = _as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionError(f"real_schur needs a square matrix, got {A.shape}")
    if n == 0:
        return SchurFactors(np.zeros((0, 0)), np.zeros((0, 0)), (), np.zeros(0, dtype=np.int64))
    if not np.all(np.isfinite(A)):
        raise ValueError("real_schur input contains non-finite entries")
    scale = _pow2_scale(A)
    H, Q = _k.hessenberg(A / scale)
    if _k.francis_schur(H, Q, 40 * n) < 0:
        raise ConvergenceError(f"Francis QR did not converge within {40 * n} sweeps")
    starts, sizes = _k.schur_blocks(H)
    return SchurFactors(Q, H * scale, tuple(int(s) for s in sizes), starts)


def _pencil_floor(*mats):
    scale = max((float(np.max(np.abs(M))) if M.size else 0.0) for M in mats)
    return max(EPS * scale, np.finfo(float).tiny)


def solve_sylvester_dense(A, B, C, schur_a=None, schur_b=None):
    """Bartels-Stewart solution of ``A X + X B^T = C``.

    Precondition: A and -B have disjoint spectra.  Precomputed Schur factors
    may be passed to skip the O(m^3 + n^3) decompositions.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    C = _as_matrix(C, "C")
    m, n = C.shape
    if A.shape != (m, m) or B.shape != (n, n):
        raise DimensionError(f"shapes A{A.shape} B{B.shape} C{C.shape} do not conform")
    if m == 0 or n == 0:
        return np.zeros((m, n))
    sa = schur_a if schur_a is not None else real_schur(A)
    sb = schur_b if schur_b is not None else real_schur(B)
    G = sa.Q.T @ C @ sb.Q
    smin = _pencil_floor(sa.T, sb.T)
    Yt, status = _k.bartels_stewart(sa.T, sa.starts, sa.sizes, sb.T, sb.starts, sb.sizes,
                                    np.ascontiguousarray(G.T), smin)
    if status != 0:
        raise SingularPencilError("A and -B have (numerically) intersecting spectra")
    return sa.Q @ Yt.T @ sb.Q.T


def lu_factor(A):
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"lu_factor needs a square matrix, got {A.shape}")
    LU, piv, status = _k.lu_factor(A)
    if status != 0:
        raise SingularSystemError(f"zero pivot in column {status - 1}")
    return LU, piv


def lu_solve(factors, B):
    LU, piv = factors
    B = np.asarray(B, dtype=np.float64)
    vec = B.ndim == 1
    X = _k.lu_solve(LU, piv, np.ascontiguousarray(B.reshape(B.shape[0], -1)))
    return X[:, 0] if vec else X


def solve_sylvester_kron_oracle(A, B, C, cap=KRON_ORACLE_CAP):
    """Reference solver: ``(I_n (x) A + B (x) I_m) vec(X) = vec(C)`` by dense
    Gaussian elimination with partial pivoting (column-major vec)."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    C = _as_matrix(C, "C")
    m, n = C.shape
    if A.shape != (m, m) or B.shape != (n, n):
        raise DimensionError(f"shapes A{A.shape} B{B.shape} C{C.shape} do not conform")
    if m * n > cap:
        raise DimensionError(f"{m * n} unknowns exceed the oracle cap of {cap}")
    K = np.kron(np.eye(n), A) + np.kron(B, np.eye(m))
    x = lu_solve(lu_factor(K), C.ravel(order="F"))
    return np.ascontiguousarray(x.reshape((m, n), order="F"))


def fro_norm(X):
    X = np.asarray(X, dtype=np.float64)
    return math.sqrt(float(np.sum(X * X)))


def scaled_fro_norm(X, d=None, n=None):
    """``||X||_F / n**(d/2)``.

    Without ``d``/``n`` the divisor is the square root of the entry count,
    which also covers rectangular arrays.
    """
    X = np.asarray(X, dtype=np.float64)
    if d is None or n is None:
        count = X.size
    else:
        count = n ** d
        if X.size != count:
            raise DimensionError(f"array has {X.size} entries, expected n**d = {count}")
    if count == 0:
        return 0.0
    return fro_norm(X) / math.sqrt(count)


def factored_fro_norm(left, core, right):
    """``||left @ core @ right.T||_F`` without forming the product."""
    _, Rl = qr(left)
    _, Rr = qr(right)
    return fro_norm(Rl @ core @ Rr.T)


def low_rank_residual_norm(opA, opB, C, X):
    """Exact ``||A X + X B^T - C||_F`` for factored X and C.

    Stacks ``[A U_X, U_X, U_C]`` and ``[V_X, B V_X, V_C]`` with core
    ``blkdiag(S_X, S_X, -S_C)``; cost is O((m + n)(2 r_X + r_C)^2) plus two
    operator applications.
    """
    m, n = X.shape
    if C.shape != (m, n) or opA.dim != m or opB.dim != n:
        raise DimensionError(
            f"residual operands do not conform: X{X.shape} C{C.shape} A{opA.dim} B{opB.dim}")
    (p, q), (pc, qc) = X.S.shape, C.S.shape
    left = np.hstack([opA.apply(X.U), X.U, C.U])
    right = np.hstack([X.V, opB.apply(X.V), C.V])
    core = np.zeros((2 * p + pc, 2 * q + qc))
    core[:p, :q] = X.S
    core[p:2 * p, q:2 * q] = X.S
    core[2 * p:, 2 * q:] = -C.S
    return factored_fro_norm(left, core, right)


def subspace_distance(U, W):
    """Sine of the largest principal angle between span(U) and span(W)."""
    D = W - U @ (U.T @ W)
    if D.size == 0:
        return 0.0
    return float(svd(D).sigma[0])
