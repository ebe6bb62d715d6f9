"""Basis-update & Galerkin iteration for ``A X + X B^T = C``.

Each sweep solves two reduced Sylvester equations for the bases,

    K-step:  A K + K (V^T B V)^T = C V        (K = U S, m x r)
    L-step:  B L + L (U^T A U)^T = C^T U      (L = V S^T, n x r)

orthogonalises them, and closes with the r x r Galerkin S-step

    (U^T A U) S + S (V^T B V)^T = U^T C V.

The right-hand side C must be supplied in factored form; no m x n array is
ever formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as kn
from .kernels import (DimensionError, KernelError, SingularPencilError, low_rank_residual_norm,
                      orth, solve_sylvester_dense, subspace_distance, svd)
from .lowrank import LowRankMatrix
from .operators import as_operator, solve_sylvester_large_small
from .rng import Stream

__all__ = [
    "LowRankMatrix", "BugConfig", "ConvergenceTrace", "IterationRecord",
    "ProjectedPencilError", "SolverError",
    "k_step", "l_step", "s_step", "bug_iteration", "truncate_rank", "augmented_basis",
    "fixed_rank_solve", "adaptive_solve",
]

PREV_ERR_INIT = 1e10

CONVERGED = "residual-below-tol"
STAGNATED = "stagnation"
MAX_ITER = "max-iter"


class SolverError(KernelError):
    """The iteration produced something unusable (e.g. a non-finite residual)."""


class ProjectedPencilError(SingularPencilError):
    """The Galerkin-projected Sylvester equation is singular even though the
    full one may not be; new bases can fix it."""


@dataclass
class BugConfig:
    """Solver controls.

    ``theta`` is the absolute truncation tolerance.  When ``theta_rel`` is
    set it takes precedence and the threshold is recomputed every iteration
    as ``theta_rel * ||sigma||_2`` of the current S-step solution.
    ``stop_norm`` chooses which residual is compared against ``tol``:
    ``"fro"`` (plain Frobenius) or ``"scaled"`` (divided by sqrt(m n)).
    """

    tol: float = 1e-8
    theta: float = 0.0
    max_iter: int = 100
    rank: int = 7
    seed: int = 0
    s_step_every_iteration: bool = True
    theta_rel: float | None = None
    freeze_theta: bool = False
    gauss_seidel: bool = False
    stop_norm: str = "fro"
    max_restarts: int = 5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.theta >= 0:
            raise ValueError("theta must be nonnegative")
        if self.theta_rel is not None and not self.theta_rel >= 0:
            raise ValueError("theta_rel must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.stop_norm not in ("fro", "scaled"):
            raise ValueError("stop_norm must be 'fro' or 'scaled'")


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    scaled_residual: float
    rank: object
    theta: float = 0.0


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    reason: str | None = None
    restarts: int = 0

    def append(self, rec):
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must increase")
        if not math.isfinite(rec.residual):
            raise SolverError(f"non-finite residual at iteration {rec.iteration}")
        self.records.append(rec)

    @property
    def residuals(self):
        return np.array([r.residual for r in self.records])

    @property
    def scaled_residuals(self):
        return np.array([r.scaled_residual for r in self.records])

    @property
    def ranks(self):
        return [r.rank for r in self.records]

    @property
    def iterations(self):
        return len(self.records)

    @property
    def final_residual(self):
        return self.records[-1].residual if self.records else math.nan

    def replay(self, tol, stop_norm="fro"):
        """Re-derive the termination reason from the recorded residuals."""
        prev = PREV_ERR_INIT
        vals = self.residuals if stop_norm == "fro" else self.scaled_residuals
        for i, err in enumerate(vals):
            if err <= tol:
                return CONVERGED, i
            if abs(err - prev) <= tol:
                return STAGNATED, i
            prev = err
        return MAX_ITER, len(vals) - 1


def _check_problem(opA, opB, C):
    opA, opB = as_operator(opA), as_operator(opB)
    if not isinstance(C, LowRankMatrix):
        raise TypeError("right-hand side must be a LowRankMatrix (factor dense data first)")
    if C.shape != (opA.dim, opB.dim):
        raise DimensionError(f"C is {C.shape}, operators are {opA.dim} and {opB.dim}")
    return opA, opB


def k_step(opA, opB, C, V):
    """Solve ``A K + K (V^T B V)^T = C V`` for K (m x r)."""
    M = opB.apply(V).T @ V
    F = C.U @ (C.S @ (C.V.T @ V))
    return solve_sylvester_large_small(opA, M, F)


def l_step(opA, opB, C, U):
    """Solve ``B L + L (U^T A U)^T = C^T U`` for L (n x r)."""
    M = opA.apply(U).T @ U
    F = C.V @ (C.S.T @ (C.U.T @ U))
    return solve_sylvester_large_small(opB, M, F)


def s_step(opA, opB, C, U, V):
    """Galerkin core: ``(U^T A U) S + S (V^T B V)^T = U^T C V``."""
    Ar = U.T @ opA.apply(U)
    Br = V.T @ opB.apply(V)
    rhs = (U.T @ C.U) @ C.S @ (C.V.T @ V)
    try:
        return solve_sylvester_dense(Ar, Br, rhs)
    except SingularPencilError as exc:
        raise ProjectedPencilError(f"projected Sylvester equation is singular: {exc}") from None


def truncate_rank(sv, theta):
    """Smallest rank whose discarded tail ``sqrt(sum_{j > r} sigma_j^2)`` is at
    most ``theta``; never below 1.  Accepts :class:`SvdFactors` or a vector."""
    sigma = np.asarray(sv.sigma if hasattr(sv, "sigma") else sv, dtype=np.float64)
    k = sigma.shape[0]
    if k == 0:
        return 0
    tails = np.sqrt(np.cumsum((sigma ** 2)[::-1]))[::-1]
    # tails[j] is the energy of sigma[j:], i.e. the cost of keeping j values
    for r in range(1, k):
        if tails[r] <= theta:
            return r
    return k


def augmented_basis(K, U):
    """Orthonormal basis of span([K, U]) of width min(2r, m)."""
    M = np.hstack([K, U])
    if M.shape[1] <= M.shape[0]:
        return orth(M)
    Q, _, _ = kn._k.qr_householder(np.ascontiguousarray(M), True)
    return Q


def _random_basis(stream, m, r):
    return orth(stream.randn((m, r)))


def _record(trace, it, err, m, n, rank, theta=0.0):
    trace.append(IterationRecord(it, err, err / math.sqrt(m * n) if m * n else 0.0, rank, theta))


def _stop(cfg, rec, prev):
    val = rec.residual if cfg.stop_norm == "fro" else rec.scaled_residual
    if val <= cfg.tol:
        return CONVERGED, val
    if abs(val - prev) <= cfg.tol:
        return STAGNATED, val
    return None, val


def bug_iteration(opA, opB, C, U, V, gauss_seidel=False):
    """One fixed-rank sweep from bases (U, V); returns the new LowRankMatrix."""
    opA, opB = _check_problem(opA, opB, C)
    U1 = orth(k_step(opA, opB, C, V))
    V1 = orth(l_step(opA, opB, C, U1 if gauss_seidel else U))
    return LowRankMatrix(U1, s_step(opA, opB, C, U1, V1), V1)


def fixed_rank_solve(opA, opB, C, cfg=None, initial=None):
    """Fixed-rank iteration.  Returns ``(X, trace)``.

    ``initial`` may supply starting bases ``(U0, V0)``; otherwise they are
    orthonormalised Gaussian matrices from ``Stream(cfg.seed)`` (U0 first).
    """
    cfg = cfg or BugConfig()
    opA, opB = _check_problem(opA, opB, C)
    m, n = C.shape
    r = cfg.rank
    if r > min(m, n):
        raise DimensionError(f"rank {r} exceeds min(m, n) = {min(m, n)}")
    stream = Stream(cfg.seed)
    if initial is None:
        U, V = _random_basis(stream, m, r), _random_basis(stream, n, r)
    else:
        U, V = (np.asarray(b, dtype=np.float64) for b in initial)
    trace = ConvergenceTrace()
    prev = PREV_ERR_INIT
    X = None
    for it in range(1, cfg.max_iter + 1):
        U1 = orth(k_step(opA, opB, C, V))
        V1 = orth(l_step(opA, opB, C, U1 if cfg.gauss_seidel else U))
        if not cfg.s_step_every_iteration:
            change = max(subspace_distance(U, U1), subspace_distance(V, V1))
            U, V = U1, V1
            if change > cfg.tol and it < cfg.max_iter:
                continue
        try:
            S = s_step(opA, opB, C, U1, V1)
        except ProjectedPencilError:
            if trace.restarts >= cfg.max_restarts:
                raise
            trace.restarts += 1
            U, V = _random_basis(stream, m, r), _random_basis(stream, n, r)
            continue
        U, V = U1, V1
        X = LowRankMatrix(U, S, V)
        _record(trace, it, low_rank_residual_norm(opA, opB, C, X), m, n, r)
        reason, prev_val = _stop(cfg, trace.records[-1], prev)
        if reason:
            trace.reason = reason
            return X, trace
        prev = prev_val
    trace.reason = MAX_ITER
    if X is None:
        X = LowRankMatrix(U, s_step(opA, opB, C, U, V), V)
    return X, trace


def adaptive_solve(opA, opB, C, cfg=None, initial=None):
    """Rank-adaptive iteration: bases are augmented with the previous ones,
    the 2r x 2r Galerkin core is solved, and its SVD truncated with the
    threshold rule of :func:`truncate_rank`.  Returns ``(X, trace)`` with X in
    SVD form (diagonal S)."""
    cfg = cfg or BugConfig()
    opA, opB = _check_problem(opA, opB, C)
    m, n = C.shape
    r = min(cfg.rank, m, n)
    stream = Stream(cfg.seed)
    if initial is None:
        U, V = _random_basis(stream, m, r), _random_basis(stream, n, r)
    else:
        U, V = (np.asarray(b, dtype=np.float64) for b in initial)
    trace = ConvergenceTrace()
    prev = PREV_ERR_INIT
    frozen = None
    X = None
    for it in range(1, cfg.max_iter + 1):
        K = k_step(opA, opB, C, V)
        L = l_step(opA, opB, C, U)
        Uh = augmented_basis(K, U)
        Vh = augmented_basis(L, V)
        try:
            S = s_step(opA, opB, C, Uh, Vh)
        except ProjectedPencilError:
            if trace.restarts >= cfg.max_restarts:
                raise
            trace.restarts += 1
            r = U.shape[1]
            U, V = _random_basis(stream, m, r), _random_basis(stream, n, r)
            continue
        f = svd(S)
        if cfg.theta_rel is not None:
            if frozen is None or not cfg.freeze_theta:
                frozen = cfg.theta_rel * kn.fro_norm(f.sigma)
            theta = frozen
        else:
            theta = cfg.theta
        rh = truncate_rank(f, theta)
        U = Uh @ f.P[:, :rh]
        V = Vh @ f.Q[:, :rh]
        X = LowRankMatrix(U, np.diag(f.sigma[:rh]), V)
        _record(trace, it, low_rank_residual_norm(opA, opB, C, X), m, n, rh, theta)
        reason, prev_val = _stop(cfg, trace.records[-1], prev)
        if reason:
            trace.reason = reason
            return X, trace
        prev = prev_val
    trace.reason = MAX_ITER
    if X is None:
        X = LowRankMatrix(U, s_step(opA, opB, C, U, V), V)
    return X, trace
