"""Coefficient operators and the large x small Sylvester engine.

An operator is an immutable square matrix that can be applied to a block of
vectors and solved against with a shift.  A *shift* is either a real scalar
``s`` (solve ``(A + s I) Y = R``) or a real 2x2 block ``S`` (solve
``A Y + Y S^T = R`` for two columns, i.e. the coupled system
``[[A + s11 I, s12 I], [s21 I, A + s22 I]]``).
"""
from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as _k
from .kernels import (DimensionError, SingularPencilError, SingularSystemError, _pencil_floor,
                      fro_norm, real_schur)

__all__ = [
    "CoefficientOperator", "DenseOperator", "TridiagonalOperator", "CsrOperator", "DeflatedOperator",
    "ShiftedFactorizationCache", "ShiftedSolveError", "as_operator",
    "solve_sylvester_large_small",
]


class ShiftedSolveError(SingularSystemError, SingularPencilError):
    """``A + shift`` is singular; carries the offending shift."""

    def __init__(self, shift, detail=""):
        self.shift = shift
        super().__init__(f"shifted system singular for shift {np.array2string(np.asarray(shift))}"
                         + (f": {detail}" if detail else ""))


def _shift_key(shift):
    s = np.asarray(shift, dtype=np.float64)
    return (s.shape, s.tobytes())


def _normalize_shift(shift):
    s = np.asarray(shift, dtype=np.float64)
    if s.ndim == 0 or s.size == 1:
        return float(s.reshape(-1)[0])
    if s.shape != (2, 2):
        raise DimensionError(f"shift must be a scalar or a 2x2 block, got shape {s.shape}")
    return s


class ShiftedFactorizationCache:
    """Bounded LRU map from exact shift bit patterns to factorizations."""

    def __init__(self, maxsize=128):
        self.maxsize = maxsize
        self._data = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, shift, build):
        key = _shift_key(shift)
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
        value = build()
        with self._lock:
            self.misses += 1
            self._data[key] = value
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return value

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


class CoefficientOperator:
    """Common interface; subclasses fill in storage-specific pieces."""

    kind = "abstract"

    def __init__(self, dim):
        self.dim = int(dim)
        self.cache = ShiftedFactorizationCache()

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        vec = X.ndim == 1
        X2 = X.reshape(X.shape[0], -1) if vec else X
        if X2.shape[0] != self.dim:
            raise DimensionError(f"operator of size {self.dim} applied to {X.shape[0]} rows")
        return X2, vec

    def apply(self, X):
        X2, vec = self._check(X)
        Y = self._apply(X2)
        return Y[:, 0] if vec else Y

    def solve_shifted(self, shift, rhs):
        shift = _normalize_shift(shift)
        R, vec = self._check(rhs)
        if isinstance(shift, float):
            Y = self._solve_scalar(shift, R)
        else:
            if R.shape[1] != 2:
                raise DimensionError("a 2x2 shift needs a right-hand side with two columns")
            Y = self._solve_block(shift, R)
        return Y[:, 0] if vec else Y

    def to_dense(self):
        raise NotImplementedError

    def fro_norm(self):
        return fro_norm(self.to_dense())

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class DenseOperator(CoefficientOperator):
    """Full matrix.  Shifted solves reuse one real Schur factorization
    ``A = Q T Q^T`` and cost O(dim^2) per right-hand side column."""

    kind = "dense"

    def __init__(self, A):
        A = np.array(A, dtype=np.float64, order="C")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"dense operator needs a square matrix, got {A.shape}")
        super().__init__(A.shape[0])
        self.A = A
        self.A.setflags(write=False)
        self._schur = None
        self._schur_lock = threading.Lock()

    def _apply(self, X):
        return self.A @ X

    def to_dense(self):
        return self.A.copy()

    def fro_norm(self):
        return fro_norm(self.A)

    def schur(self):
        with self._schur_lock:
            if self._schur is None:
                self._schur = real_schur(self.A)
            return self._schur

    def _solve_quasi(self, S, R):
        sch = self.schur()
        smin = _pencil_floor(sch.T, S)
        Rt = np.ascontiguousarray((sch.Q.T @ R).T)
        Wt = np.empty_like(Rt)
        q = S.shape[0]
        for c0 in range(0, Rt.shape[0], q):
            blk, status = _k.quasi_tri_solve(sch.T, sch.starts, sch.sizes, S,
                                             np.ascontiguousarray(Rt[c0:c0 + q]), smin)
            if status != 0:
                raise ShiftedSolveError(S if q == 2 else S[0, 0])
            Wt[c0:c0 + q] = blk
        return sch.Q @ Wt.T

    def _solve_scalar(self, s, R):
        return self._solve_quasi(np.array([[s]]), R)

    def _solve_block(self, S, R):
        return self._solve_quasi(np.ascontiguousarray(S), R)


class TridiagonalOperator(CoefficientOperator):
    """Tridiagonal matrix stored as three diagonals.

    Shifted solves use banded Gaussian elimination with partial pivoting:
    bandwidth 1 for scalar shifts, and bandwidth 2 on the interleaved
    unknowns for 2x2 block shifts.  ``op_count`` accumulates the inner
    multiply-add count of all factorizations and solves.
    """

    kind = "tridiagonal"

    def __init__(self, sub, diag, sup):
        diag = np.array(diag, dtype=np.float64)
        n = diag.shape[0]
        sub = np.array(sub, dtype=np.float64).reshape(-1)
        sup = np.array(sup, dtype=np.float64).reshape(-1)
        if sub.shape[0] != max(n - 1, 0) or sup.shape[0] != max(n - 1, 0):
            raise DimensionError("tridiagonal off-diagonals must have length dim - 1")
        super().__init__(n)
        self.sub, self.diag, self.sup = sub, diag, sup
        for a in (sub, diag, sup):
            a.setflags(write=False)
        self.op_count = 0

    def _apply(self, X):
        Y = self.diag[:, None] * X
        if self.dim > 1:
            Y[:-1] += self.sup[:, None] * X[1:]
            Y[1:] += self.sub[:, None] * X[:-1]
        return Y

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.sup, 1) + np.diag(self.sub, -1)

    def fro_norm(self):
        return float(np.sqrt(np.sum(self.diag ** 2) + np.sum(self.sub ** 2) + np.sum(self.sup ** 2)))

    def _factor_scalar(self, s):
        n = self.dim
        B = np.zeros((n, 4))
        B[1:, 0] = self.sub
        B[:, 1] = self.diag + s
        B[:-1, 2] = self.sup
        L, piv, status, ops = _k.band_lu_factor(B, 1, 1)
        self.op_count += ops
        if status != 0:
            raise ShiftedSolveError(s, f"zero pivot at row {status - 1}")
        return B, L, piv

    def _factor_block(self, S):
        n = self.dim
        B = np.zeros((2 * n, 7))
        ev, od = slice(0, 2 * n, 2), slice(1, 2 * n, 2)
        B[ev, 2] = self.diag + S[0, 0]
        B[ev, 3] = S[0, 1]
        B[od, 1] = S[1, 0]
        B[od, 2] = self.diag + S[1, 1]
        B[2:2 * n:2, 0] = self.sub
        B[0:2 * n - 2:2, 4] = self.sup
        B[3:2 * n:2, 0] = self.sub
        B[1:2 * n - 2:2, 4] = self.sup
        L, piv, status, ops = _k.band_lu_factor(B, 2, 2)
        self.op_count += ops
        if status != 0:
            raise ShiftedSolveError(S, f"zero pivot at row {status - 1}")
        return B, L, piv

    def _solve_scalar(self, s, R):
        B, L, piv = self.cache.get(s, lambda: self._factor_scalar(s))
        Y, ops = _k.band_lu_solve(B, L, piv, 1, 1, np.ascontiguousarray(R))
        self.op_count += ops
        return Y

    def _solve_block(self, S, R):
        B, L, piv = self.cache.get(S, lambda: self._factor_block(S))
        r = np.ascontiguousarray(R).reshape(-1, 1)
        y, ops = _k.band_lu_solve(B, L, piv, 2, 2, r)
        self.op_count += ops
        return y.reshape(self.dim, 2)


class CsrOperator(CoefficientOperator):
    """Compressed sparse row matrix; shifted solves use a sparse LU per shift."""

    kind = "csr-sparse"

    def __init__(self, indptr, indices, data, dim):
        indptr = np.array(indptr, dtype=np.int64)
        indices = np.array(indices, dtype=np.int64)
        data = np.array(data, dtype=np.float64)
        dim = int(dim)
        if indptr.shape != (dim + 1,) or indptr[0] != 0 or indptr[-1] != indices.shape[0]:
            raise DimensionError("CSR row pointer array is malformed")
        if indices.shape != data.shape:
            raise DimensionError("CSR index and value arrays differ in length")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("CSR row pointers must be nondecreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= dim):
            raise ValueError("CSR column index out of range")
        for i in range(dim):
            row = indices[indptr[i]:indptr[i + 1]]
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise ValueError(f"CSR column indices in row {i} are not strictly increasing")
        super().__init__(dim)
        self.indptr, self.indices, self.data = indptr, indices, data
        for a in (indptr, indices, data):
            a.setflags(write=False)
        self._mat = sp.csr_matrix((data, indices, indptr), shape=(dim, dim))

    @classmethod
    def from_dense(cls, A, drop_zeros=True):
        A = np.asarray(A, dtype=np.float64)
        M = sp.csr_matrix(A)
        if drop_zeros:
            M.eliminate_zeros()
        M.sort_indices()
        return cls(M.indptr, M.indices, M.data, A.shape[0])

    @classmethod
    def from_scipy(cls, M):
        M = sp.csr_matrix(M)
        M.sum_duplicates()
        M.sort_indices()
        return cls(M.indptr, M.indices, M.data, M.shape[0])

    @property
    def nnz(self):
        return int(self.data.shape[0])

    def _apply(self, X):
        return np.asarray(self._mat @ X)

    def to_dense(self):
        return self._mat.toarray()

    def fro_norm(self):
        return fro_norm(self.data)

    def _factor(self, shift):
        n = self.dim
        eye = sp.identity(n, format="csr")
        if isinstance(shift, float):
            M = self._mat + shift * eye
        else:
            S = shift
            M = sp.bmat([[self._mat + S[0, 0] * eye, S[0, 1] * eye],
                         [S[1, 0] * eye, self._mat + S[1, 1] * eye]])
        try:
            return spla.splu(sp.csc_matrix(M))
        except RuntimeError as exc:
            raise ShiftedSolveError(shift, str(exc)) from None

    def _solve_scalar(self, s, R):
        lu = self.cache.get(s, lambda: self._factor(s))
        return np.asarray(lu.solve(np.ascontiguousarray(R)))

    def _solve_block(self, S, R):
        lu = self.cache.get(S, lambda: self._factor(S))
        y = lu.solve(np.concatenate([R[:, 0], R[:, 1]]))
        return np.column_stack([y[:self.dim], y[self.dim:]])


class DeflatedOperator(CoefficientOperator):
    """``A - gamma e e^T`` for a unit vector e, on top of any base operator.

    Used for operators with a known one-dimensional nullspace ``span(e)``:
    the update moves that eigenvalue to ``-gamma`` and leaves ``A`` alone on
    the orthogonal complement.  Shifted solves go through the base operator
    and a Sherman-Morrison (scalar shift) or 2x2 Woodbury (block shift)
    correction, so the base must be nonsingular at the requested shift.
    """

    kind = "deflated"

    def __init__(self, base, e, gamma):
        base = as_operator(base)
        e = np.array(e, dtype=np.float64).reshape(-1)
        if e.shape[0] != base.dim:
            raise DimensionError(f"deflation vector of length {e.shape[0]} for size {base.dim}")
        nrm = float(np.sqrt(e @ e))
        if nrm == 0.0:
            raise ValueError("deflation vector must be nonzero")
        super().__init__(base.dim)
        self.base = base
        self.e = e / nrm
        self.e.setflags(write=False)
        self.gamma = float(gamma)

    def _apply(self, X):
        return self.base.apply(X) - self.gamma * np.outer(self.e, self.e @ X)

    def to_dense(self):
        return self.base.to_dense() - self.gamma * np.outer(self.e, self.e)

    def _solve_scalar(self, s, R):
        Y0 = self.base.solve_shifted(s, R)
        w = self.base.solve_shifted(s, self.e)
        denom = 1.0 - self.gamma * float(self.e @ w)
        if abs(denom) <= 1e3 * np.finfo(float).eps:
            raise ShiftedSolveError(s, "rank-one correction is singular")
        return Y0 + np.outer(w, self.gamma * (self.e @ Y0) / denom)

    def _solve_block(self, S, R):
        n, e = self.dim, self.e
        Y0 = self.base.solve_shifted(S, R)
        W = []
        for b in range(2):
            Eb = np.zeros((n, 2))
            Eb[:, b] = e
            W.append(self.base.solve_shifted(S, Eb))
        G = np.column_stack([e @ Wb for Wb in W])
        cap = np.eye(2) - self.gamma * G
        if abs(np.linalg.det(cap)) <= 1e3 * np.finfo(float).eps:
            raise ShiftedSolveError(S, "rank-two correction is singular")
        c = np.linalg.solve(cap, e @ Y0)
        return Y0 + self.gamma * (c[0] * W[0] + c[1] * W[1])


def as_operator(A):
    """Wrap a dense array, scipy sparse matrix or existing operator."""
    if isinstance(A, CoefficientOperator):
        return A
    if sp.issparse(A):
        return CsrOperator.from_scipy(A)
    return DenseOperator(A)


def solve_sylvester_large_small(opA, M, F):
    """Solve ``A K + K M = F`` with A large (operator) and M small (r x r).

    ``M^T = Z T Z^T`` (real Schur), then ``K~ = K Z`` satisfies
    ``A K~ + K~ T^T = F Z``; its column blocks are found from the last one
    backwards, each by one shifted solve with the block ``T_JJ`` as shift.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    r = M.shape[0]
    if M.shape != (r, r) or F.shape != (opA.dim, r):
        raise DimensionError(f"large-small shapes A{opA.dim} M{M.shape} F{F.shape} do not conform")
    if r == 0:
        return np.zeros((opA.dim, 0))
    sch = real_schur(M.T)
    Z, T = sch.Q, sch.T
    G = F @ Z
    Kt = np.zeros_like(G)
    for j0, q in zip(sch.starts[::-1], sch.block_structure[::-1]):
        j1 = j0 + q
        rhs = G[:, j0:j1] - Kt[:, j1:] @ T[j0:j1, j1:].T
        Kt[:, j0:j1] = opA.solve_shifted(T[j0, j0] if q == 1 else T[j0:j1, j0:j1], rhs)
    return Kt @ Z.T
