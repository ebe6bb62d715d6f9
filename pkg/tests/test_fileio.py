import numpy as np
import pytest
import scipy.sparse as sp

from bugsylv.fileio import (FormatError, dense_to_text, read_csv, read_dense, read_lowrank_bundle,
                            read_matrix_market, read_operator, read_tucker_bundle, write_csv,
                            write_dense, write_lowrank_bundle, write_matrix_market,
                            write_tucker_bundle)
from bugsylv.lowrank import LowRankMatrix
from bugsylv.operators import CsrOperator, DenseOperator
from bugsylv.tucker import TuckerTensor

from conftest import DATA


def test_dense_roundtrip_exact(tmp_path):
    A = np.random.default_rng(0).standard_normal((3, 4)) * 1e-7
    A[0, 0] = 1 / 3
    write_dense(tmp_path / "a.txt", A)
    assert np.array_equal(read_dense(tmp_path / "a.txt"), A)


def test_dense_text_layout():
    assert dense_to_text(np.array([[1.0, 2.0], [3.0, 4.5]])) == "2 2\n1\n2\n3\n4.5\n"


def test_dense_bad_count(tmp_path):
    (tmp_path / "a.txt").write_text("2 2\n1\n2\n3\n")
    with pytest.raises(FormatError):
        read_dense(tmp_path / "a.txt")
    (tmp_path / "b.txt").write_text("2\n1\n")
    with pytest.raises(FormatError):
        read_dense(tmp_path / "b.txt")


def test_read_handwritten_fixture():
    M = read_matrix_market(DATA / "fixture3x3.mtx").toarray()
    ref = np.array([[-2.0, 1.5, 0.0], [0.0, 4.0, 0.0], [0.25, 0.0, -1.0]])
    assert np.array_equal(M, ref)
    op = read_operator(DATA / "fixture3x3.mtx")
    assert isinstance(op, CsrOperator) and op.nnz == 5


def test_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    A = sp.random(20, 20, density=0.2, random_state=2, format="csr")
    write_matrix_market(tmp_path / "a.mtx", A)
    assert np.array_equal(read_matrix_market(tmp_path / "a.mtx").toarray(), A.toarray())
    op = CsrOperator.from_scipy(A)
    write_matrix_market(tmp_path / "b.mtx", op)
    assert np.array_equal(read_operator(tmp_path / "b.mtx").to_dense(), A.toarray())
    D = rng.standard_normal((3, 3))
    write_matrix_market(tmp_path / "c.mtx", D)
    assert np.array_equal(read_matrix_market(tmp_path / "c.mtx").toarray(), D)


def test_read_operator_dense(tmp_path):
    write_dense(tmp_path / "a.txt", np.eye(3))
    assert isinstance(read_operator(tmp_path / "a.txt"), DenseOperator)


def test_lowrank_bundle(tmp_path):
    rng = np.random.default_rng(3)
    X = LowRankMatrix.from_factors(rng.standard_normal((6, 2)), rng.standard_normal((5, 2)))
    write_lowrank_bundle(tmp_path / "x", X)
    Y = read_lowrank_bundle(tmp_path / "x")
    assert np.array_equal(X.U, Y.U) and np.array_equal(X.S, Y.S) and np.array_equal(X.V, Y.V)
    write_tucker_bundle(tmp_path / "t", TuckerTensor(X.S, [X.U, X.V]))
    with pytest.raises(FormatError):
        read_lowrank_bundle(tmp_path / "t")


def test_tucker_bundle(tmp_path):
    rng = np.random.default_rng(4)
    T = TuckerTensor.from_factors(rng.standard_normal((2, 3, 2)),
                                  [rng.standard_normal((n, r)) for n, r in [(4, 2), (5, 3), (6, 2)]])
    write_tucker_bundle(tmp_path / "t", T)
    U = read_tucker_bundle(tmp_path / "t")
    assert np.array_equal(U.core, T.core)
    assert all(np.array_equal(a, b) for a, b in zip(U.factors, T.factors))
    # core stored with the first index running fastest
    col = read_dense(tmp_path / "t" / "core.txt")[:, 0]
    assert col[1] == T.core[1, 0, 0]


def test_tucker_bundle_shape_mismatch(tmp_path):
    T = TuckerTensor(np.ones((1, 1)), [np.eye(3, 1), np.eye(2, 1)])
    write_tucker_bundle(tmp_path / "t", T)
    (tmp_path / "t" / "manifest.txt").write_text("format tucker\nd 2\nshape 3 4\nranks 1 1\n")
    with pytest.raises(FormatError):
        read_tucker_bundle(tmp_path / "t")


def test_csv(tmp_path):
    write_csv(tmp_path / "a.csv", ["i", "x", "s"], [[1, 0.1, "a"], [np.int64(2), np.float64(1 / 3), "b"]])
    text = (tmp_path / "a.csv").read_text()
    assert text == "i,x,s\n1,0.10000000000000001,a\n2,0.33333333333333331,b\n"
    head, rows = read_csv(tmp_path / "a.csv")
    assert head == ["i", "x", "s"] and float(rows[1][1]) == 1 / 3


def test_atomic_write_leaves_no_temp(tmp_path):
    write_dense(tmp_path / "a.txt", np.eye(2))
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]
