"""Command-line driver: ``bugsylv bench | solve | oracle``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels as kn
from .bug_matrix import BugConfig, adaptive_solve, fixed_rank_solve
from .experiments import KINDS, ExperimentSpec, run_experiment
from .fileio import (read_dense, read_lowrank_bundle, read_operator, write_csv, write_dense,
                     write_lowrank_bundle)

log = logging.getLogger("bugsylv")


def _solver_flags(p, bench=False):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--theta-rel", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("fixed", "adaptive"), default="adaptive")
    p.add_argument("--rank", type=int, default=None, help="(initial) rank, defaults to the rhs rank")
    p.add_argument("--stop-norm", choices=("fro", "scaled"), default="fro",
                   help="residual compared against --tol")


def build_parser():
    ap = argparse.ArgumentParser(prog="bugsylv", description="Low-rank Sylvester solvers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run one benchmark experiment")
    b.add_argument("kind", choices=KINDS)
    b.add_argument("--n", type=int, default=128)
    b.add_argument("--d", type=int, default=None)
    b.add_argument("--boundary", choices=("dirichlet", "periodic"), default="dirichlet")
    b.add_argument("--rhs-rank", type=int, default=7)
    b.add_argument("--spec-dist", type=float, default=10.0)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--theta-source", choices=("Y", "X"), default="Y",
                   help="scale theta by the iterate (Y) or the direct solution (X)")
    b.add_argument("--freeze-theta", action="store_true", help="keep the iteration-1 theta")
    b.add_argument("--oracle-max", type=int, default=1024,
                   help="largest side for which the direct solution is computed")
    b.add_argument("--zero-rhs", action="store_true")
    b.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    b.add_argument("--a", help="from-files: coefficient A")
    b.add_argument("--b", help="from-files: coefficient B")
    b.add_argument("--c", help="from-files: low-rank bundle of C")
    _solver_flags(b, bench=True)

    s = sub.add_parser("solve", help="solve A X + X B^T = C for a low-rank C bundle")
    s.add_argument("--a", required=True, help="Matrix Market (.mtx) or dense text file")
    s.add_argument("--b", required=True)
    s.add_argument("--c", required=True, help="low-rank bundle directory")
    s.add_argument("--out", required=True, help="bundle directory for X")
    s.add_argument("--trace", help="optional CSV path for the convergence trace")
    _solver_flags(s)

    o = sub.add_parser("oracle", help="dense reference solve of A X + X B^T = C")
    o.add_argument("--a", required=True)
    o.add_argument("--b", required=True)
    o.add_argument("--c", required=True, help="dense text file")
    o.add_argument("--out", required=True, help="dense text file for X")
    o.add_argument("--method", choices=("dense", "kron"), default="dense")
    return ap


def _bench(args):
    paths = {k: getattr(args, k) for k in ("a", "b", "c") if getattr(args, k)}
    if args.kind == "from-files" and set(paths) != {"a", "b", "c"}:
        raise SystemExit("bench from-files needs --a, --b and --c")
    spec = ExperimentSpec(kind=args.kind, n=args.n, d=args.d, boundary=args.boundary,
                          rhs_rank=args.rhs_rank, spec_dist=args.spec_dist, tol=args.tol,
                          theta_rel=args.theta_rel, max_iter=args.max_iter, seed=args.seed,
                          mode=args.mode, output_dir=args.out, rank=args.rank,
                          stop_norm=args.stop_norm, theta_source=args.theta_source,
                          freeze_theta=args.freeze_theta, oracle_max=args.oracle_max,
                          zero_rhs=args.zero_rhs, plot=args.plot, paths=paths)
    res = run_experiment(spec)
    info = res.info
    print(f"{spec.kind} n={spec.n} d={spec.d}: {info['termination']} after {info['iterations']} "
          f"iterations, residual {info['final_residual_fro']:.3e} "
          f"(scaled {info['final_residual_scaled_fro']:.3e}), rank {info['final_rank']}")
    if "max_sv_distance_rel" in info:
        print(f"max singular value distance / sigma_1: {info['max_sv_distance_rel']:.3e}")
    print(f"wrote {', '.join(sorted(p.name for p in res.files.values()))} to {spec.output_dir}")
    return 0


def _solve(args):
    opA, opB = read_operator(args.a), read_operator(args.b)
    C = read_lowrank_bundle(args.c)
    cfg = BugConfig(tol=args.tol, max_iter=args.max_iter, rank=args.rank or C.rank, seed=args.seed,
                    theta_rel=args.theta_rel, stop_norm=args.stop_norm)
    solver = adaptive_solve if args.mode == "adaptive" else fixed_rank_solve
    X, trace = solver(opA, opB, C, cfg)
    write_lowrank_bundle(args.out, X)
    if args.trace:
        write_csv(args.trace, ["iter", "residual_fro", "residual_scaled_fro", "rank"],
                  [[r.iteration, r.residual, r.scaled_residual, int(r.rank)] for r in trace.records])
    print(f"{trace.reason} after {trace.iterations} iterations, residual {trace.final_residual:.3e}, "
          f"rank {X.rank}")
    return 0


def _oracle(args):
    A = read_operator(args.a).to_dense()
    B = read_operator(args.b).to_dense()
    C = read_dense(args.c)
    if args.method == "kron":
        X = kn.solve_sylvester_kron_oracle(A, B, C)
    else:
        X = kn.solve_sylvester_dense(A, B, C)
    write_dense(args.out, X)
    res = kn.fro_norm(A @ X + X @ B.T - C)
    print(f"residual {res:.3e}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"bench": _bench, "solve": _solve, "oracle": _oracle}
    try:
        return handlers[args.command](args)
    except (kn.KernelError, ValueError, OSError, RuntimeError) as exc:
        print(f"bugsylv {args.command}: error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
