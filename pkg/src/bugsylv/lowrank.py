"""Factored low-rank matrices ``X = U S V^T``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import DimensionError, orth, qr, svd


@dataclass
class LowRankMatrix:
    """``X = U @ S @ V.T`` with orthonormal U (m x r) and V (n x r').

    S is usually square; the rank-adaptive solver may carry a rectangular
    core for a single step when the two bases hit different size caps.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = np.ascontiguousarray(self.U, dtype=np.float64)
        self.S = np.ascontiguousarray(self.S, dtype=np.float64)
        self.V = np.ascontiguousarray(self.V, dtype=np.float64)
        if self.S.ndim != 2 or self.U.shape[1] != self.S.shape[0] or self.V.shape[1] != self.S.shape[1]:
            raise DimensionError(
                f"factor shapes U{self.U.shape} S{self.S.shape} V{self.V.shape} do not conform")

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    @property
    def rank(self):
        return self.S.shape[0]

    @property
    def K(self):
        return self.U @ self.S

    @property
    def L(self):
        return self.V @ self.S.T

    def to_dense(self):
        return self.U @ self.S @ self.V.T

    def transpose(self):
        return LowRankMatrix(self.V, self.S.T, self.U)

    def singular_values(self):
        return svd(self.S).sigma

    def orthonormality_error(self):
        eu = np.linalg.norm(self.U.T @ self.U - np.eye(self.U.shape[1]), 2) if self.U.size else 0.0
        ev = np.linalg.norm(self.V.T @ self.V - np.eye(self.V.shape[1]), 2) if self.V.size else 0.0
        return max(eu, ev)

    @classmethod
    def from_dense(cls, X, rank=None, tol=0.0):
        """Truncated SVD of a dense matrix; ``rank`` caps, ``tol`` drops
        singular values at or below ``tol * sigma_1``."""
        f = svd(X)
        keep = len(f.sigma)
        if tol > 0.0 and keep:
            keep = max(1, int(np.count_nonzero(f.sigma > tol * f.sigma[0])))
        if rank is not None:
            keep = min(keep, rank)
        return cls(f.P[:, :keep], np.diag(f.sigma[:keep]), f.Q[:, :keep])

    @classmethod
    def from_factors(cls, left, right, core=None):
        """Build from arbitrary (non-orthonormal) factors ``left @ core @ right.T``."""
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        if core is None:
            core = np.eye(left.shape[1])
        Ql, Rl = qr(left)
        Qr, Rr = qr(right)
        return cls(Ql, Rl @ core @ Rr.T, Qr)

    @classmethod
    def zeros(cls, m, n, rank=1):
        return cls(orth(np.eye(m, rank)), np.zeros((rank, rank)), orth(np.eye(n, rank)))

    def compressed(self, rank=None, tol=0.0):
        """Rotate to SVD form (diagonal S) and optionally truncate."""
        f = svd(self.S)
        keep = len(f.sigma)
        if tol > 0.0 and keep and f.sigma[0] > 0.0:
            keep = max(1, int(np.count_nonzero(f.sigma > tol * f.sigma[0])))
        if rank is not None:
            keep = min(keep, rank)
        return LowRankMatrix(self.U @ f.P[:, :keep], np.diag(f.sigma[:keep]), self.V @ f.Q[:, :keep])
