import json
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def separated_pair(rng, m, n, gap=2.0, normal=False):
    """A with spectrum in [1+gap/2, 2+gap/2], B likewise, so A and -B are apart."""
    def make(k):
        lam = 1.0 + gap / 2 + rng.random(k)
        if normal:
            Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
        else:
            Q = rng.standard_normal((k, k)) + 3 * np.eye(k)
        return Q @ np.diag(lam) @ np.linalg.inv(Q)
    return make(m), make(n)


def kron_solve(A, B, C):
    """Independent numpy route for A X + X B^T = C."""
    m, n = C.shape
    K = np.kron(np.eye(n), A) + np.kron(B, np.eye(m))
    return np.linalg.solve(K, C.ravel(order="F")).reshape((m, n), order="F")


def principal_sine(U, W):
    Qu, _ = np.linalg.qr(U)
    Qw, _ = np.linalg.qr(W)
    return np.linalg.norm(Qw - Qu @ (Qu.T @ Qw), 2)


def constructed_instance(seed, n=64, r=4, kind="dense", normalize=True):
    """Operators with spectra in [1, 2] (so A and -B sit 2 apart) and a
    right-hand side built from a known rank-r solution."""
    from bugsylv.lowrank import LowRankMatrix
    from bugsylv.operators import DenseOperator, TridiagonalOperator

    rng = np.random.default_rng(seed)

    def op():
        if kind == "tridiagonal":
            off = 0.2 * rng.random(n - 1)
            return TridiagonalOperator(off, 1.5 + 0.05 * rng.random(n), off)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        return DenseOperator(Q @ np.diag(1.0 + rng.random(n)) @ Q.T)

    opA, opB = op(), op()
    Us, _ = np.linalg.qr(rng.standard_normal((n, r)))
    Vs, _ = np.linalg.qr(rng.standard_normal((n, r)))
    Ss = np.diag(np.sort(rng.random(r) + 0.5)[::-1])
    C = LowRankMatrix.from_factors(np.hstack([opA.apply(Us), Us]), np.hstack([Vs, opB.apply(Vs)]),
                                   np.kron(np.eye(2), Ss))
    if normalize:
        c = np.linalg.norm(C.S)
        C = LowRankMatrix(C.U, C.S / c, C.V)
        Ss = Ss / c
    return opA, opB, C, LowRankMatrix(Us, Ss, Vs)


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one acceptance outcome; all of them are printed at the end of the run."""
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
