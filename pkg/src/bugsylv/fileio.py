"""On-disk formats.

Dense text: first line ``rows cols``, then one entry per line in row-major
order, printed with 17 significant digits (exact round trip for float64).

Matrix Market: coordinate real general, read and written through
``scipy.io``.

Low-rank bundle: a directory holding ``manifest.txt`` plus ``U.txt``,
``S.txt``, ``V.txt`` in dense text.

Tucker bundle: a directory holding ``manifest.txt`` (lines ``d``, ``shape``,
``ranks``), one ``U<k>.txt`` per mode (k from 1) and ``core.txt``, the core
in co-lexicographic order as a single column.

Every file is written to a temporary name in the target directory and then
renamed into place.
"""
from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .lowrank import LowRankMatrix
from .operators import CsrOperator, DenseOperator
from .tucker import TuckerTensor, mode0_unvec, mode0_vec


class FormatError(ValueError):
    pass


def fmt(x):
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dense_to_text(A):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines.extend(fmt(x) for x in A.ravel(order="C"))
    return "\n".join(lines) + "\n"


def write_dense(path, A):
    atomic_write_text(path, dense_to_text(A))


def read_dense(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise FormatError(f"{path}: expected 'rows cols' header")
        rows, cols = int(head[0]), int(head[1])
        vals = np.array([float(t) for t in fh.read().split()], dtype=np.float64)
    if vals.size != rows * cols:
        raise FormatError(f"{path}: header says {rows}x{cols} but found {vals.size} entries")
    return vals.reshape(rows, cols)


def write_matrix_market(path, M):
    """Coordinate real general; accepts a dense array, a scipy matrix or a CsrOperator."""
    if isinstance(M, CsrOperator):
        M = sp.csr_matrix((M.data, M.indices, M.indptr), shape=(M.dim, M.dim))
    elif not sp.issparse(M):
        M = sp.coo_matrix(np.asarray(M, dtype=np.float64))
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, sp.coo_matrix(M), field="real", symmetry="general", precision=17)
    atomic_write_text(path, buf.getvalue().decode("ascii"))


def read_matrix_market(path):
    M = scipy.io.mmread(str(path))
    return sp.csr_matrix(M, dtype=np.float64)


def read_operator(path):
    """``.mtx`` files become CSR operators, anything else is read as dense text."""
    path = Path(path)
    if path.suffix == ".mtx":
        return CsrOperator.from_scipy(read_matrix_market(path))
    return DenseOperator(read_dense(path))


def _read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                out[parts[0]] = parts[1:]
    return out


def write_lowrank_bundle(directory, X):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    m, n = X.shape
    write_dense(d / "U.txt", X.U)
    write_dense(d / "S.txt", X.S)
    write_dense(d / "V.txt", X.V)
    atomic_write_text(d / "manifest.txt",
                      f"format lowrank\nshape {m} {n}\nrank {X.S.shape[0]} {X.S.shape[1]}\n")


def read_lowrank_bundle(directory):
    d = Path(directory)
    man = _read_manifest(d / "manifest.txt")
    if man.get("format") != ["lowrank"]:
        raise FormatError(f"{d}: not a low-rank bundle")
    X = LowRankMatrix(read_dense(d / "U.txt"), read_dense(d / "S.txt"), read_dense(d / "V.txt"))
    if list(X.shape) != [int(v) for v in man["shape"]]:
        raise FormatError(f"{d}: factor shapes disagree with the manifest")
    return X


def write_tucker_bundle(directory, X):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, U in enumerate(X.factors, start=1):
        write_dense(d / f"U{k}.txt", U)
    write_dense(d / "core.txt", mode0_vec(X.core).reshape(-1, 1))
    atomic_write_text(d / "manifest.txt",
                      "format tucker\n"
                      f"d {X.d}\n"
                      f"shape {' '.join(str(s) for s in X.shape)}\n"
                      f"ranks {' '.join(str(r) for r in X.ranks)}\n")


def read_tucker_bundle(directory):
    d = Path(directory)
    man = _read_manifest(d / "manifest.txt")
    if man.get("format") != ["tucker"]:
        raise FormatError(f"{d}: not a Tucker bundle")
    nd = int(man["d"][0])
    ranks = tuple(int(r) for r in man["ranks"])
    factors = [read_dense(d / f"U{k}.txt") for k in range(1, nd + 1)]
    core = mode0_unvec(read_dense(d / "core.txt").ravel(), ranks)
    X = TuckerTensor(core, factors)
    if list(X.shape) != [int(v) for v in man["shape"]]:
        raise FormatError(f"{d}: factor shapes disagree with the manifest")
    return X


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer))
                                                           else fmt(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows
