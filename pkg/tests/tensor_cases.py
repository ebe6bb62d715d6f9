"""Randomized tensor-algebra checks shared by the unit and acceptance suites.

Each check builds its reference with plain index loops or np.kron/einsum and
returns a relative error."""
import string

import numpy as np

from bugsylv.tucker import (TuckerTensor, build_P, core_step, matricize, mode0_vec, mode_product,
                            mode_reduction, tensorize)


def _kron_colex(mats):
    # vec in first-index-fastest order: mode 0 is the rightmost factor
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(M, out)
    return out


def _shape(rng, d, lo=1, hi=5):
    return tuple(int(x) for x in rng.integers(lo, hi + 1, size=d))


def check_matricize(rng):
    d = int(rng.integers(1, 5))
    shape = _shape(rng, d)
    X = rng.standard_normal(shape)
    k = int(rng.integers(d))
    M = matricize(X, k)
    ref = np.zeros_like(M)
    for idx in np.ndindex(*shape):
        col, stride = 0, 1
        for j in range(d):
            if j == k:
                continue
            col += idx[j] * stride
            stride *= shape[j]
        ref[idx[k], col] = X[idx]
    err = np.abs(M - ref).max()
    err = max(err, np.abs(tensorize(M, k, shape) - X).max())
    return err


def check_mode_product(rng):
    d = int(rng.integers(1, 5))
    shape = _shape(rng, d)
    X = rng.standard_normal(shape)
    k = int(rng.integers(d))
    M = rng.standard_normal((int(rng.integers(1, 5)), shape[k]))
    N = rng.standard_normal((int(rng.integers(1, 5)), M.shape[0]))
    letters = string.ascii_lowercase[:d]
    out = letters[:k] + "z" + letters[k + 1:]
    ref = np.einsum(f"z{letters[k]},{letters}->{out}", M, X)
    Y = mode_product(X, M, k)
    errs = [np.abs(Y - ref).max() / max(np.abs(ref).max(), 1e-300)]
    # (X x_k M) x_k N = X x_k (N M)
    lhs, rhs = mode_product(Y, N, k), mode_product(X, N @ M, k)
    errs.append(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1e-300))
    # products on different modes commute
    if d > 1:
        j = (k + 1) % d
        P = rng.standard_normal((3, shape[j]))
        a = mode_product(mode_product(X, M, k), P, j)
        b = mode_product(mode_product(X, P, j), M, k)
        errs.append(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))
    # Mat_k(X x_k M) = M Mat_k(X)
    errs.append(np.abs(matricize(Y, k) - M @ matricize(X, k)).max() / max(np.abs(ref).max(), 1e-300))
    return max(errs)


def check_build_P(rng):
    d = int(rng.integers(2, 5))
    while True:
        ranks = _shape(rng, d, 1, 4)
        k = int(rng.integers(d))
        if ranks[k] <= np.prod(ranks) // ranks[k]:
            break
    core = rng.standard_normal(ranks)
    M = [rng.standard_normal((r, r)) for r in ranks]
    red = mode_reduction(core, k, M)
    errs = []
    others = [j for j in range(d) if j != k]
    for j in others:
        R = _kron_colex([M[j] if i == j else np.eye(ranks[i]) for i in others])
        ref = red.Q.T @ R @ red.Q
        errs.append(np.linalg.norm(build_P(red, j) - ref) / max(np.linalg.norm(ref), 1e-300))
    # Q S^T reproduces the unfolding
    errs.append(np.linalg.norm(red.Q @ red.S.T - matricize(core, k).T) / np.linalg.norm(core))
    return max(errs)


def check_core_step(rng, method="auto"):
    d = int(rng.integers(1, 5))
    shape = _shape(rng, d, 3, 6)
    ranks = tuple(int(rng.integers(1, n + 1)) for n in shape)
    ops = []
    for n in shape:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        ops.append(Q @ np.diag(1 + rng.random(n)) @ Q.T + 0.1 * rng.standard_normal((n, n)))
    factors = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(shape, ranks)]
    rb = tuple(int(rng.integers(1, n + 1)) for n in shape)
    Bt = TuckerTensor(rng.standard_normal(rb), [np.linalg.qr(rng.standard_normal((n, r)))[0]
                                               for n, r in zip(shape, rb)])
    C = core_step(ops, Bt, factors, method=method)
    N = [U.T @ A @ U for A, U in zip(ops, factors)]
    system = sum(_kron_colex([N[j] if j == i else np.eye(ranks[j]) for j in range(d)]) for i in range(d))
    rhs = mode0_vec(Bt.to_dense())
    rhs = _kron_colex([U.T for U in factors]) @ rhs
    ref = np.linalg.solve(system, rhs)
    return np.linalg.norm(mode0_vec(C) - ref) / max(np.linalg.norm(ref), 1e-300)


CHECKS = {
    "matricize": (check_matricize, 1e-15),
    "mode_product": (check_mode_product, 1e-12),
    "build_P": (check_build_P, 1e-12),
    "core_step": (check_core_step, 1e-10),
}
