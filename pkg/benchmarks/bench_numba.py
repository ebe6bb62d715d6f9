"""Time the compiled kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time.  Usage: python3 benchmarks/bench_numba.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from bugsylv import _accel, kernels as kn
from bugsylv.bug_matrix import BugConfig, adaptive_solve
from bugsylv.experiments import build_cosine_rhs, build_poisson_operator
from bugsylv.operators import DenseOperator

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
M = rng.standard_normal((200, 120))
A = rng.standard_normal((150, 150)) / 12 + 3 * np.eye(150)
B = rng.standard_normal((100, 100)) / 10 + 3 * np.eye(100)
C = rng.standard_normal((150, 100))
op = build_poisson_operator(1024)
rhs = build_cosine_rhs(1024, 2).rhs
dense_op = DenseOperator(A)

cases = {
    "qr 200x120": lambda: kn.qr(M),
    "svd 200x120": lambda: kn.svd(M),
    "schur 150": lambda: kn.real_schur(A),
    "bartels-stewart 150x100": lambda: kn.solve_sylvester_dense(A, B, C),
    "poisson2d n=1024 adaptive": lambda: adaptive_solve(op, op, rhs, BugConfig(theta_rel=1e-10, stop_norm="scaled")),
}
for fn in cases.values():  # warm up (includes JIT compilation)
    fn()
out = {"backend": _accel.backend_name()}
for name, fn in cases.items():
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(flag, repeat):
    env = dict(os.environ, BUGSYLV_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run("1", args.repeat), run("0", args.repeat)
    print(f"{'case':32s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:32s} {fast[key]:10.4f} {slow[key]:10.4f} {slow[key] / fast[key]:8.1f}x")


if __name__ == "__main__":
    main()
