"""Tucker tensors and the BUG solver for ``sum_i X x_i A_i = B``.

Ordering convention: all vectorizations are co-lexicographic (the first
index runs fastest), i.e. numpy Fortran order.  With that convention

    vec(C x_1 U_1 ... x_d U_d) = (U_d kron ... kron U_1) vec(C),

so the Kronecker factor for mode i sits in slot ``d - i`` counting from the
left.  Every Kronecker assembly below goes through :func:`mode0_vec` and is
tested against it.

The right-hand side is a Tucker tensor ``B = C_B x_i U_i^B``; its core is
called ``C_B`` to keep it apart from the solution core.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as kn
from .bug_matrix import (CONVERGED, MAX_ITER, PREV_ERR_INIT, STAGNATED, BugConfig,
                         ConvergenceTrace, IterationRecord, augmented_basis, truncate_rank)
from .kernels import DimensionError, SingularSystemError, orth, qr, solve_sylvester_dense, svd
from .operators import as_operator, solve_sylvester_large_small
from .rng import Stream

CORE_CAP = 32768
DENSE_CORE_LIMIT = 1024

__all__ = [
    "TuckerTensor", "ModeReduction", "mode_product", "multi_mode_product", "matricize",
    "tensorize", "mode0_vec", "mode0_unvec", "kron_slots", "build_P", "mode_reduction",
    "projected_coefficients", "tucker_k_step", "core_step", "hosvd_truncate",
    "tensor_residual_norm", "tensor_fixed_rank_solve", "tensor_adaptive_solve",
    "CoreCapError", "CORE_CAP",
]


class CoreCapError(DimensionError):
    """The core system has more unknowns than the configured cap."""

    def __init__(self, ranks, cap):
        self.ranks = tuple(ranks)
        self.size = math.prod(self.ranks)
        self.cap = cap
        super().__init__(f"core of ranks {self.ranks} has {self.size} unknowns, cap is {cap}")


# --------------------------------------------------------------------------
# tensor algebra

def mode_product(X, M, k):
    """``(X x_k M)[..., j, ...] = sum_i M[j, i] X[..., i, ...]``."""
    X = np.asarray(X, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if not 0 <= k < X.ndim:
        raise DimensionError(f"mode {k} out of range for a {X.ndim}-way tensor")
    if M.ndim != 2 or M.shape[1] != X.shape[k]:
        raise DimensionError(f"matrix {M.shape} cannot act on mode {k} of size {X.shape[k]}")
    return np.moveaxis(np.tensordot(M, X, axes=(1, k)), 0, k)


def multi_mode_product(X, mats, skip=None):
    """Apply ``mats[i]`` on mode i for every i (``None`` entries and ``skip`` are left alone)."""
    for i, M in enumerate(mats):
        if M is None or i == skip:
            continue
        X = mode_product(X, M, i)
    return X


def matricize(X, k):
    """Mode-k unfolding, ``I_k x prod_{j != k} I_j`` with co-lexicographic columns."""
    X = np.asarray(X, dtype=np.float64)
    if not 0 <= k < X.ndim:
        raise DimensionError(f"mode {k} out of range for a {X.ndim}-way tensor")
    return np.moveaxis(X, k, 0).reshape(X.shape[k], -1, order="F")


def tensorize(M, k, shape):
    """Inverse of :func:`matricize`."""
    shape = tuple(int(s) for s in shape)
    M = np.asarray(M, dtype=np.float64)
    rest = shape[:k] + shape[k + 1:]
    if M.shape != (shape[k], math.prod(rest)):
        raise DimensionError(f"matrix {M.shape} does not unfold a tensor of shape {shape} on mode {k}")
    return np.ascontiguousarray(np.moveaxis(M.reshape((shape[k],) + rest, order="F"), 0, k))


def mode0_vec(X):
    """Co-lexicographic vectorization (the row of the "mode-0" unfolding)."""
    return np.asarray(X, dtype=np.float64).reshape(-1, order="F")


def mode0_unvec(v, shape):
    v = np.asarray(v, dtype=np.float64)
    if v.size != math.prod(shape):
        raise DimensionError(f"vector of length {v.size} does not fill shape {tuple(shape)}")
    return np.ascontiguousarray(v.reshape(tuple(shape), order="F"))


def kron_slots(mats):
    """``mats[d-1] kron ... kron mats[0]``: the matrix acting on mode0_vec when
    ``mats[i]`` acts on mode i."""
    out = np.ones((1, 1))
    for M in reversed(mats):
        out = np.kron(out, M)
    return out


@dataclass
class TuckerTensor:
    """``X = core x_1 U_1 ... x_d U_d`` with orthonormal factors."""

    core: np.ndarray
    factors: list

    def __post_init__(self):
        self.core = np.ascontiguousarray(self.core, dtype=np.float64)
        self.factors = [np.ascontiguousarray(U, dtype=np.float64) for U in self.factors]
        if self.core.ndim != len(self.factors) or self.core.ndim < 1:
            raise DimensionError(f"core has {self.core.ndim} modes but {len(self.factors)} factors given")
        for k, U in enumerate(self.factors):
            if U.ndim != 2 or U.shape[1] != self.core.shape[k]:
                raise DimensionError(f"factor {k} has shape {U.shape}, core rank is {self.core.shape[k]}")
            if U.shape[1] > U.shape[0]:
                raise DimensionError(f"rank {U.shape[1]} exceeds size {U.shape[0]} on mode {k}")

    @property
    def d(self):
        return self.core.ndim

    @property
    def shape(self):
        return tuple(U.shape[0] for U in self.factors)

    @property
    def ranks(self):
        return tuple(self.core.shape)

    def to_dense(self):
        return multi_mode_product(self.core, self.factors)

    def orthonormality_error(self):
        return max(np.linalg.norm(U.T @ U - np.eye(U.shape[1]), 2) for U in self.factors)

    def hosvd_singular_values(self):
        return [svd(matricize(self.core, k)).sigma for k in range(self.d)]

    @classmethod
    def from_factors(cls, core, factors):
        """Orthonormalize arbitrary factors, absorbing the triangular parts into the core."""
        core = np.asarray(core, dtype=np.float64)
        Qs, Rs = [], []
        for U in factors:
            Q, R = qr(U)
            Qs.append(Q)
            Rs.append(R)
        return cls(multi_mode_product(core, Rs), Qs)

    @classmethod
    def from_dense(cls, X, ranks=None):
        """Truncated HOSVD of a dense tensor."""
        X = np.asarray(X, dtype=np.float64)
        factors = []
        for k in range(X.ndim):
            P = svd(matricize(X, k)).P
            r = P.shape[1] if ranks is None else min(ranks[k], P.shape[1])
            factors.append(P[:, :r])
        core = multi_mode_product(X, [U.T for U in factors])
        return cls(core, factors)


# --------------------------------------------------------------------------
# mode reduction and the K-step

@dataclass
class ModeReduction:
    """Data for the mode-k K-step: ``Mat_k(core)^T = Q_k S_k^T`` and the
    projected coefficients ``M_j = U_j^T A_j^T U_j``."""

    k: int
    Q: np.ndarray
    S: np.ndarray
    M: list
    ranks: tuple

    def other_modes(self):
        return [j for j in range(len(self.ranks)) if j != self.k]


def projected_coefficients(ops, factors):
    """``M_j = (A_j U_j)^T U_j`` for every mode."""
    return [as_operator(op).apply(U).T @ U for op, U in zip(ops, factors)]


def mode_reduction(core, k, M):
    ranks = tuple(core.shape)
    rest = math.prod(ranks) // ranks[k]
    if ranks[k] > rest:
        raise DimensionError(
            f"mode {k} rank {ranks[k]} exceeds the product {rest} of the other ranks")
    Q, R = qr(matricize(core, k).T)
    return ModeReduction(k, Q, R.T, list(M), ranks)


def build_P(red, j):
    """``P_jk = Q_k^T R_j Q_k`` where R_j is the Kronecker product with M_j in
    mode j's slot, applied as a mode product on the tensorized columns of Q_k."""
    k = red.k
    if j == k or not 0 <= j < len(red.ranks):
        raise DimensionError(f"build_P needs a mode j != k = {k}, got {j}")
    others = red.other_modes()
    oshape = tuple(red.ranks[i] for i in others)
    rk = red.ranks[k]
    Mj = np.asarray(red.M[j], dtype=np.float64)
    if Mj.shape != (red.ranks[j], red.ranks[j]):
        raise DimensionError(f"M_{j} has shape {Mj.shape}, expected rank {red.ranks[j]}")
    T = red.Q.reshape(oshape + (rk,), order="F")
    T = mode_product(T, Mj, others.index(j))
    return red.Q.T @ T.reshape(-1, rk, order="F")


def _rhs_k(Bt, factors, k):
    """``Mat_k(B) (kron_{j != k} U_j)`` in factored form, before the Q_k product."""
    G = [Ub.T @ U for Ub, U in zip(Bt.factors, factors)]
    W = multi_mode_product(Bt.core, [g.T for g in G], skip=k)
    return Bt.factors[k] @ matricize(W, k)


def tucker_k_step(ops, Bt, X, k, red=None, M=None):
    """Solve ``A_k K + K sum_{j != k} P_jk = Mat_k(B) V_k`` with
    ``V_k = (kron_{j != k} U_j) Q_k``."""
    ops = [as_operator(op) for op in ops]
    if red is None:
        if M is None:
            M = projected_coefficients(ops, X.factors)
        red = mode_reduction(X.core, k, M)
    small = np.zeros((X.ranks[k], X.ranks[k]))
    for j in red.other_modes():
        small += build_P(red, j)
    rhs = _rhs_k(Bt, X.factors, k) @ red.Q
    return solve_sylvester_large_small(ops[k], small, rhs)


# --------------------------------------------------------------------------
# core equation

def _core_rhs(Bt, factors):
    return multi_mode_product(Bt.core, [U.T @ Ub for U, Ub in zip(factors, Bt.factors)])


def _solve_core_lu(N, R):
    shape = R.shape
    d = len(N)
    system = np.zeros((R.size, R.size))
    for i in range(d):
        system += kron_slots([N[j] if j == i else np.eye(shape[j]) for j in range(d)])
    try:
        x = kn.lu_solve(kn.lu_factor(system), mode0_vec(R))
    except SingularSystemError as exc:
        raise SingularSystemError(f"core system is singular: {exc}") from None
    return mode0_unvec(x, shape)


def _solve_core_schur(N, R):
    """Direct solve of ``sum_i C x_i N_i = R`` by Schur back-substitution over
    the last mode; same solution as the dense system, O(r~ sum r_i) work."""
    d = len(N)
    if d == 1:
        try:
            return kn.lu_solve(kn.lu_factor(N[0]), R)
        except SingularSystemError as exc:
            raise SingularSystemError(f"core system is singular: {exc}") from None
    if d == 2:
        try:
            return solve_sylvester_dense(N[0], N[1], R)
        except kn.SingularPencilError as exc:
            raise SingularSystemError(f"core system is singular: {exc}") from None
    sf = kn.real_schur(N[-1])
    T, Z = sf.T, sf.Q
    Rt = mode_product(R, Z.T, d - 1)
    Ct = np.zeros_like(Rt)
    for start, size in reversed(list(zip(sf.starts, sf.block_structure))):
        J = slice(start, start + size)
        rhs = Rt[..., J] - np.tensordot(Ct[..., start + size:], T[J, start + size:], axes=(-1, 1))
        if size == 1:
            shifted = [N[0] + T[start, start] * np.eye(N[0].shape[0])] + list(N[1:-1])
            Ct[..., start] = _solve_core_schur(shifted, rhs[..., 0])
        else:
            # fold the 2-vector into mode d-2 (its index runs fastest)
            rp = N[-2].shape[0]
            folded = np.kron(T[J, J], np.eye(rp)) + np.kron(np.eye(2), N[-2])
            lead = rhs.shape[:-2]
            flat = rhs.reshape(lead + (rp * 2,), order="F")
            sol = _solve_core_schur(list(N[:-2]) + [folded], flat)
            Ct[..., J] = sol.reshape(lead + (rp, 2), order="F")
    return mode_product(Ct, Z, d - 1)


def core_step(ops, Bt, factors, cap=CORE_CAP, method="auto", N=None):
    """Galerkin core: solve ``sum_i C x_i N_i = C_B x_i (U_i^T U_i^B)`` with
    ``N_i = U_i^T A_i U_i``.

    ``method="lu"`` assembles the r~ x r~ Kronecker system and factors it
    densely; ``"schur"`` uses the recursive Schur solver.  ``"auto"`` uses LU up
    to ``DENSE_CORE_LIMIT`` unknowns.
    """
    ranks = tuple(U.shape[1] for U in factors)
    if math.prod(ranks) > cap:
        raise CoreCapError(ranks, cap)
    if N is None:
        N = [U.T @ as_operator(op).apply(U) for op, U in zip(ops, factors)]
    R = _core_rhs(Bt, factors)
    if method == "auto":
        method = "lu" if R.size <= DENSE_CORE_LIMIT else "schur"
    if method == "lu":
        return _solve_core_lu(N, R)
    if method == "schur":
        return _solve_core_schur(list(N), R)
    raise ValueError(f"unknown core method {method!r}")


# --------------------------------------------------------------------------
# truncation and residual

def hosvd_truncate(X, theta):
    """Per-mode SVD of the core unfoldings, truncated with :func:`truncate_rank`."""
    Ps = []
    for k in range(X.d):
        f = svd(matricize(X.core, k))
        Ps.append(f.P[:, :truncate_rank(f, theta)])
    core = multi_mode_product(X.core, [P.T for P in Ps])
    return TuckerTensor(core, [U @ P for U, P in zip(X.factors, Ps)])


def tensor_residual_norm(ops, Bt, X):
    """Exact ``||sum_j X x_j A_j - B||_F`` from the factors.

    Per mode the stacked basis is ``[U_k, A_k U_k, U_k^B]``; the combined
    core holds ``core`` at block 1 on mode j and block 0 elsewhere for term
    j, and ``-C_B`` at block 2 everywhere.
    """
    ops = [as_operator(op) for op in ops]
    d = X.d
    if Bt.shape != X.shape or len(ops) != d:
        raise DimensionError(f"residual operands do not conform: X{X.shape} B{Bt.shape}")
    r, rb = X.ranks, Bt.ranks
    Rs = []
    for k in range(d):
        W = np.hstack([X.factors[k], ops[k].apply(X.factors[k]), Bt.factors[k]])
        Rs.append(qr(W)[1])
    G = np.zeros(tuple(2 * r[k] + rb[k] for k in range(d)))
    for j in range(d):
        idx = tuple(slice(r[k], 2 * r[k]) if k == j else slice(0, r[k]) for k in range(d))
        G[idx] += X.core
    G[tuple(slice(2 * r[k], None) for k in range(d))] = -Bt.core
    return kn.fro_norm(multi_mode_product(G, Rs))


# --------------------------------------------------------------------------
# drivers

def _check_tensor_problem(ops, Bt):
    ops = [as_operator(op) for op in ops]
    if not isinstance(Bt, TuckerTensor):
        raise TypeError("right-hand side must be a TuckerTensor")
    if len(ops) != Bt.d:
        raise DimensionError(f"{len(ops)} operators for a {Bt.d}-way right-hand side")
    for k, op in enumerate(ops):
        if op.dim != Bt.shape[k]:
            raise DimensionError(f"operator {k} has size {op.dim}, mode size is {Bt.shape[k]}")
    return ops


def _initial(stream, shape, ranks):
    factors = [orth(stream.randn((n, r))) for n, r in zip(shape, ranks)]
    core = stream.rand(tuple(ranks))
    return TuckerTensor(core, factors)


def _resolve_ranks(cfg, shape, ranks):
    if ranks is None:
        ranks = (cfg.rank,) * len(shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise DimensionError(f"{len(ranks)} ranks for {len(shape)} modes")
    return ranks


def _record_and_check(trace, cfg, it, err, size, ranks, theta, prev):
    scaled = err / math.sqrt(size)
    trace.append(IterationRecord(it, err, scaled, tuple(ranks), theta))
    val = err if cfg.stop_norm == "fro" else scaled
    if val <= cfg.tol:
        return CONVERGED, val
    if abs(val - prev) <= cfg.tol:
        return STAGNATED, val
    return None, val


def tensor_fixed_rank_solve(ops, Bt, cfg=None, ranks=None, initial=None, core_method="auto",
                            cap=CORE_CAP):
    """Fixed-rank Tucker iteration.  Returns ``(X, trace)``.

    Starting factors are orthonormalized Gaussian matrices drawn mode by
    mode from ``Stream(cfg.seed)``, followed by a uniform(0, 1) core.
    """
    cfg = cfg or BugConfig()
    ops = _check_tensor_problem(ops, Bt)
    shape = Bt.shape
    ranks = _resolve_ranks(cfg, shape, ranks)
    for k, (n, r) in enumerate(zip(shape, ranks)):
        if r > n:
            raise DimensionError(f"rank {r} exceeds size {n} on mode {k}")
    stream = Stream(cfg.seed)
    X = initial if initial is not None else _initial(stream, shape, ranks)
    trace = ConvergenceTrace()
    prev = PREV_ERR_INIT
    size = math.prod(shape)
    for it in range(1, cfg.max_iter + 1):
        M = projected_coefficients(ops, X.factors)
        new = [orth(tucker_k_step(ops, Bt, X, k, M=M)) for k in range(X.d)]
        X = TuckerTensor(core_step(ops, Bt, new, cap=cap, method=core_method), new)
        reason, prev_val = _record_and_check(trace, cfg, it, tensor_residual_norm(ops, Bt, X),
                                             size, X.ranks, 0.0, prev)
        if reason:
            trace.reason = reason
            return X, trace
        prev = prev_val
    trace.reason = MAX_ITER
    return X, trace


def tensor_adaptive_solve(ops, Bt, cfg=None, ranks=None, initial=None, core_method="auto",
                          cap=CORE_CAP):
    """Rank-adaptive Tucker iteration: per-mode augmentation ``orth([K_k U_k])``,
    core solve at the augmented ranks, then HOSVD truncation."""
    cfg = cfg or BugConfig()
    ops = _check_tensor_problem(ops, Bt)
    shape = Bt.shape
    ranks = tuple(min(r, n) for r, n in zip(_resolve_ranks(cfg, shape, ranks), shape))
    stream = Stream(cfg.seed)
    X = initial if initial is not None else _initial(stream, shape, ranks)
    trace = ConvergenceTrace()
    prev = PREV_ERR_INIT
    frozen = None
    size = math.prod(shape)
    for it in range(1, cfg.max_iter + 1):
        M = projected_coefficients(ops, X.factors)
        aug = []
        for k in range(X.d):
            K = tucker_k_step(ops, Bt, X, k, M=M)
            aug.append(augmented_basis(K, X.factors[k]))
        Y = TuckerTensor(core_step(ops, Bt, aug, cap=cap, method=core_method), aug)
        if cfg.theta_rel is not None:
            if frozen is None or not cfg.freeze_theta:
                frozen = cfg.theta_rel * kn.fro_norm(Y.core)
            theta = frozen
        else:
            theta = cfg.theta
        X = hosvd_truncate(Y, theta)
        reason, prev_val = _record_and_check(trace, cfg, it, tensor_residual_norm(ops, Bt, X),
                                             size, X.ranks, theta, prev)
        if reason:
            trace.reason = reason
            return X, trace
        prev = prev_val
    trace.reason = MAX_ITER
    return X, trace
