import numpy as np
import pytest

from bugsylv.cli import build_parser, main
from bugsylv.fileio import (read_csv, read_dense, read_lowrank_bundle, write_dense, write_lowrank_bundle,
                            write_matrix_market)
from bugsylv.lowrank import LowRankMatrix

from conftest import constructed_instance, rel_err


def _files(tmp_path, seed=0, n=20, r=3):
    opA, opB, C, Xs = constructed_instance(seed, n=n, r=r)
    write_dense(tmp_path / "A.txt", opA.to_dense())
    write_matrix_market(tmp_path / "B.mtx", opB.to_dense())
    write_lowrank_bundle(tmp_path / "C", C)
    write_dense(tmp_path / "C.txt", C.to_dense())
    return opA, opB, C, Xs


def test_parser_defaults():
    a = build_parser().parse_args(["bench", "poisson2d", "--out", "x"])
    assert (a.n, a.rhs_rank, a.spec_dist, a.tol, a.theta_rel, a.max_iter, a.mode) == \
        (128, 7, 10.0, 1e-8, 1e-10, 50, "adaptive")


def test_bench_poisson(tmp_path, capsys):
    assert main(["bench", "poisson2d", "--n", "24", "--out", str(tmp_path), "--stop-norm", "scaled"]) == 0
    out = capsys.readouterr().out
    assert "residual-below-tol" in out and "trace.csv" in out
    head, rows = read_csv(tmp_path / "trace.csv")
    assert head == ["iter", "residual_fro", "residual_scaled_fro", "rank"]


def test_bench_random3d(tmp_path):
    assert main(["bench", "random3d", "--n", "8", "--rhs-rank", "2", "--out", str(tmp_path),
                 "--theta-rel", "1e-12"]) == 0
    head, _ = read_csv(tmp_path / "trace.csv")
    assert head[-3:] == ["rank_1", "rank_2", "rank_3"]
    head, _ = read_csv(tmp_path / "sv_approx.csv")
    assert head == ["mode", "index", "sigma"]


def test_bench_from_files(tmp_path):
    _files(tmp_path)
    out = tmp_path / "run"
    assert main(["bench", "from-files", "--a", str(tmp_path / "A.txt"), "--b", str(tmp_path / "B.mtx"),
                 "--c", str(tmp_path / "C"), "--out", str(out), "--rank", "3"]) == 0
    assert (out / "sv_distance.csv").exists()


def test_bench_from_files_needs_paths(tmp_path):
    with pytest.raises(SystemExit):
        main(["bench", "from-files", "--out", str(tmp_path)])


def test_solve_command(tmp_path):
    _, _, _, Xs = _files(tmp_path)
    assert main(["solve", "--a", str(tmp_path / "A.txt"), "--b", str(tmp_path / "B.mtx"),
                 "--c", str(tmp_path / "C"), "--out", str(tmp_path / "X"),
                 "--trace", str(tmp_path / "t.csv"), "--tol", "1e-12", "--theta-rel", "1e-13"]) == 0
    X = read_lowrank_bundle(tmp_path / "X")
    assert rel_err(X.to_dense(), Xs.to_dense()) <= 1e-9
    assert (tmp_path / "t.csv").exists()


@pytest.mark.parametrize("method", ["dense", "kron"])
def test_oracle_command(tmp_path, method):
    _, _, _, Xs = _files(tmp_path, n=12)
    assert main(["oracle", "--a", str(tmp_path / "A.txt"), "--b", str(tmp_path / "B.mtx"),
                 "--c", str(tmp_path / "C.txt"), "--out", str(tmp_path / "X.txt"), "--method", method]) == 0
    assert rel_err(read_dense(tmp_path / "X.txt"), Xs.to_dense()) <= 1e-10


def test_error_exit_code(tmp_path, capsys):
    assert main(["oracle", "--a", str(tmp_path / "missing.txt"), "--b", str(tmp_path / "missing.txt"),
                 "--c", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "X.txt")]) == 1
    assert "error" in capsys.readouterr().err


def test_singular_oracle_reports_error(tmp_path, capsys):
    write_dense(tmp_path / "A.txt", np.eye(2))
    write_dense(tmp_path / "B.txt", -np.eye(2))
    write_dense(tmp_path / "C.txt", np.ones((2, 2)))
    assert main(["oracle", "--a", str(tmp_path / "A.txt"), "--b", str(tmp_path / "B.txt"),
                 "--c", str(tmp_path / "C.txt"), "--out", str(tmp_path / "X.txt")]) == 1
