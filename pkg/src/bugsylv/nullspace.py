"""Sum-of-Kronecker problems whose coefficients share a constant nullspace.

Periodic Laplacians satisfy ``A_i e_i = 0`` with ``e_i`` the normalized
constant vector, so ``sum_i X x_i A_i`` annihilates ``e_1 o ... o e_d``.
After the right-hand side has lost that component (the caller removes its
mean), the minimum-norm solution splits by which modes point along ``e``:
for every proper subset ``F`` of modes,

    sum_{i not in F} Y_F x_i A_i = B x_{i in F} e_i^T x_{i not in F} P_i,

with ``P_i = I - e_i e_i^T``, and ``X = sum_F Y_F x_{i in F} e_i``.  On the
complement each ``A_i`` can be swapped for the invertible
``A_i - gamma e_i e_i^T`` without changing the solution, so the F = {} piece
runs through the ordinary low-rank solvers.  Pieces with one free mode are a
single bordered sparse solve; pieces with two free modes use the matrix
solver.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels as kn
from .bug_matrix import adaptive_solve, fixed_rank_solve
from .kernels import DimensionError, SingularSystemError
from .lowrank import LowRankMatrix
from .operators import CsrOperator, DeflatedOperator, TridiagonalOperator, as_operator
from .tucker import (TuckerTensor, hosvd_truncate, tensor_adaptive_solve, tensor_fixed_rank_solve,
                     tensor_residual_norm)


def constant_vector(n):
    return np.full(n, 1.0 / math.sqrt(n))


def _sparse(op):
    if isinstance(op, CsrOperator):
        return op._mat
    if isinstance(op, TridiagonalOperator):
        return sp.diags([op.sub, op.diag, op.sup], [-1, 0, 1], format="csr")
    return sp.csr_matrix(op.to_dense())


def complement_solve(op, e, b):
    """Solve ``A y = b`` with ``y`` orthogonal to e, for b orthogonal to e,
    through the bordered system ``[[A, e], [e^T, 0]]``."""
    n = op.dim
    K = sp.bmat([[_sparse(op), sp.csr_matrix(e.reshape(-1, 1))],
                 [sp.csr_matrix(e.reshape(1, -1)), None]], format="csc")
    try:
        sol = spla.splu(K).solve(np.concatenate([b, [0.0]]))
    except RuntimeError as exc:
        raise SingularSystemError(f"bordered system is singular: {exc}") from None
    return sol[:n]


def deflate(op, gamma=None):
    e = constant_vector(op.dim)
    if gamma is None:
        gamma = op.fro_norm() / math.sqrt(op.dim)
    return DeflatedOperator(op, e, gamma)


def _as_tucker(rhs):
    if isinstance(rhs, LowRankMatrix):
        return TuckerTensor(rhs.S, [rhs.U, rhs.V])
    return rhs


def _restricted_rhs(Bt, free, fixed, es):
    """``B x_{i in F} e_i^T x_{i not in F} P_i`` with fixed modes dropped."""
    core = Bt.core
    for i in sorted(fixed, reverse=True):
        core = np.tensordot(core, es[i] @ Bt.factors[i], axes=(i, 0))
    factors = [Bt.factors[i] - np.outer(es[i], es[i] @ Bt.factors[i]) for i in free]
    return core, factors


def _embed(Y, free, fixed, es, d):
    """Tucker tensor of the full order from a piece living on ``free`` modes."""
    if isinstance(Y, LowRankMatrix):
        core, fac = Y.S, [Y.U, Y.V]
    elif isinstance(Y, TuckerTensor):
        core, fac = Y.core, Y.factors
    else:
        y = np.asarray(Y)
        nrm = float(np.sqrt(y @ y))
        core = np.array([nrm])
        fac = [(y / nrm if nrm > 0 else np.eye(y.shape[0], 1)[:, 0]).reshape(-1, 1)]
    factors = [None] * d
    full_core = core
    for pos, i in enumerate(free):
        factors[i] = fac[pos]
    for i in sorted(fixed):
        full_core = np.expand_dims(full_core, i)
        factors[i] = es[i].reshape(-1, 1)
    return TuckerTensor(full_core, factors)


def tucker_sum(terms):
    """Exact sum of Tucker tensors by stacking factors and a block-diagonal core."""
    d = terms[0].d
    ranks = [sum(t.ranks[k] for t in terms) for k in range(d)]
    core = np.zeros(ranks)
    offs = [0] * d
    for t in terms:
        idx = tuple(slice(offs[k], offs[k] + t.ranks[k]) for k in range(d))
        core[idx] = t.core
        offs = [offs[k] + t.ranks[k] for k in range(d)]
    factors = [np.hstack([t.factors[k] for t in terms]) for k in range(d)]
    return TuckerTensor.from_factors(core, factors)


def solve_with_constant_nullspace(ops, rhs, cfg, mode="adaptive", gamma=None):
    """Minimum-norm low-rank solution of ``sum_i X x_i A_i = B`` when every
    ``A_i`` has the constant vector as its only null direction and B has no
    component along ``e_1 o ... o e_d``.

    Returns ``(X, trace, pieces)``: the trace belongs to the full-dimensional
    piece, ``pieces`` counts the lower-dimensional solves.
    """
    ops = [as_operator(op) for op in ops]
    d = len(ops)
    Bt = _as_tucker(rhs)
    if Bt.d != d:
        raise DimensionError(f"{d} operators for a {Bt.d}-way right-hand side")
    es = [constant_vector(op.dim) for op in ops]
    defl = [deflate(op, gamma) for op in ops]
    terms, trace, pieces = [], None, 0
    for nfix in range(d):
        for fixed in itertools.combinations(range(d), nfix):
            free = [i for i in range(d) if i not in fixed]
            core, factors = _restricted_rhs(Bt, free, fixed, es)
            if len(free) == 1:
                b = factors[0] @ core
                Y = complement_solve(ops[free[0]], es[free[0]], b)
            elif len(free) == 2:
                C = LowRankMatrix.from_factors(factors[0], factors[1], core)
                solver = adaptive_solve if mode == "adaptive" else fixed_rank_solve
                Y, tr = solver(defl[free[0]], defl[free[1]], C, cfg)
            else:
                Bs = TuckerTensor.from_factors(core, factors)
                solver = tensor_adaptive_solve if mode == "adaptive" else tensor_fixed_rank_solve
                Y, tr = solver([defl[i] for i in free], Bs, cfg)
            if nfix == 0:
                trace = tr
            else:
                pieces += 1
            terms.append(_embed(Y, free, fixed, es, d))
    X = tucker_sum(terms)
    theta = cfg.theta if cfg.theta_rel is None else cfg.theta_rel * kn.fro_norm(X.core)
    X = hosvd_truncate(X, theta)
    if d == 2:
        return LowRankMatrix(X.factors[0], X.core, X.factors[1]), trace, pieces
    return X, trace, pieces


def nullspace_residual_norm(ops, rhs, X):
    """Residual against the original (singular) coefficients."""
    ops = [as_operator(op) for op in ops]
    Xt = _as_tucker(X)
    return tensor_residual_norm(ops, _as_tucker(rhs), Xt)
