"""Experiment generators and the benchmark runner.

Grid conventions on [0, L], L = 4 pi:
    dirichlet: x_j = j dx, j = 1..n,   dx = L / (n + 1)
    periodic:  x_j = j dx, j = 0..n-1, dx = L / n

Random draws come from one :class:`~bugsylv.rng.Stream` per experiment, in
this order: right-hand side first, then coefficient matrices, then the
solver's starting bases (the solver seeds its own stream from the same
seed).  The cosine right-hand side draws every amplitude ``a_k`` (randn,
k in lexicographic order over {-3..3}^d) before every phase ``phi_k``
(2 pi rand, same order).
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels as kn
from ._accel import backend_name
from .bug_matrix import BugConfig, adaptive_solve, fixed_rank_solve
from .fileio import atomic_write_text, fmt, write_csv, write_lowrank_bundle, write_tucker_bundle
from .kernels import DimensionError, orth, svd
from .lowrank import LowRankMatrix
from .nullspace import nullspace_residual_norm, solve_with_constant_nullspace
from .operators import CsrOperator, DenseOperator, TridiagonalOperator
from .rng import Stream
from .tucker import (TuckerTensor, matricize, mode_product, multi_mode_product,
                     tensor_adaptive_solve, tensor_fixed_rank_solve)

DOMAIN = 4.0 * math.pi
KINDS = ("poisson2d", "poisson3d", "random2d", "random3d", "from-files")
WAVES = 3
ORACLE_MAX = 1024
COND_LIMIT = 1e12


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    kind: str = "poisson2d"
    n: int = 128
    d: int | None = None
    boundary: str = "dirichlet"
    rhs_rank: int = 7
    spec_dist: float = 10.0
    tol: float = 1e-8
    theta_rel: float = 1e-10
    max_iter: int = 50
    seed: int = 0
    mode: str = "adaptive"
    output_dir: str | None = None
    rank: int | None = None
    stop_norm: str = "fro"
    theta_source: str = "Y"
    freeze_theta: bool = False
    oracle_max: int = ORACLE_MAX
    zero_rhs: bool = False
    plot: bool = False
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.d is None:
            self.d = 3 if self.kind.endswith("3d") else 2
        if self.kind.endswith("2d") and self.d != 2 or self.kind.endswith("3d") and self.d != 3:
            raise ValueError(f"kind {self.kind} fixes d, got d={self.d}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.rhs_rank < 1:
            raise ValueError("rhs_rank must be at least 1")
        if self.theta_rel < 0:
            raise ValueError("theta_rel must be nonnegative")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError("boundary must be 'dirichlet' or 'periodic'")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError("mode must be 'fixed' or 'adaptive'")
        if self.theta_source not in ("Y", "X"):
            raise ValueError("theta_source must be 'Y' or 'X'")
        if self.rank is None:
            self.rank = self.rhs_rank

    def config(self):
        return BugConfig(tol=self.tol, max_iter=self.max_iter, rank=self.rank, seed=self.seed,
                         theta_rel=self.theta_rel, freeze_theta=self.freeze_theta,
                         stop_norm=self.stop_norm)


# --------------------------------------------------------------------------
# generators

def grid(n, boundary, length=DOMAIN):
    if boundary == "dirichlet":
        dx = length / (n + 1)
        return dx, dx * np.arange(1, n + 1)
    if boundary == "periodic":
        dx = length / n
        return dx, dx * np.arange(n)
    raise ValueError(f"unknown boundary {boundary!r}")


def build_poisson_operator(n, boundary="dirichlet", domain_length=DOMAIN):
    """``tridiag(1, -2, 1) / dx^2``; periodic adds the wrap-around corners."""
    if n < 2:
        raise ValueError("n must be at least 2")
    dx, _ = grid(n, boundary, domain_length)
    h = 1.0 / dx ** 2
    if boundary == "dirichlet":
        return TridiagonalOperator(np.full(n - 1, h), np.full(n, -2.0 * h), np.full(n - 1, h))
    rows = np.repeat(np.arange(n), 3)
    cols = (rows + np.tile([-1, 0, 1], n)) % n
    vals = np.tile([h, -2.0 * h, h], n)
    return CsrOperator.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def poisson_eigenvalues(n, domain_length=DOMAIN):
    """Closed-form Dirichlet spectrum ``-4/dx^2 sin^2(j pi / (2 (n+1)))``."""
    dx = domain_length / (n + 1)
    j = np.arange(1, n + 1)
    return -4.0 / dx ** 2 * np.sin(j * math.pi / (2 * (n + 1))) ** 2


def trig_basis(x, waves=WAVES):
    """Columns ``1, cos x, sin x, cos 2x, sin 2x, ...``."""
    cols = [np.ones_like(x)]
    for k in range(1, waves + 1):
        cols += [np.cos(k * x), np.sin(k * x)]
    return np.column_stack(cols)


def _exp_coeffs(k, waves=WAVES):
    """Coefficients of ``exp(i k x)`` in :func:`trig_basis`."""
    c = np.zeros(2 * waves + 1, dtype=np.complex128)
    if k == 0:
        c[0] = 1.0
    else:
        c[2 * abs(k) - 1] = 1.0
        c[2 * abs(k)] = 1j if k > 0 else -1j
    return c


def cosine_terms(stream, d, waves=WAVES):
    """``(k, a_k, phi_k)`` for every k in {-waves..waves}^d."""
    ks = list(itertools.product(range(-waves, waves + 1), repeat=d))
    amps = [stream.randn() / (1.0 + sum(abs(v) for v in k)) for k in ks]
    phases = [2.0 * math.pi * stream.rand() for _ in ks]
    return list(zip(ks, amps, phases))


def cosine_core(terms, d, waves=WAVES):
    """Trig-basis core of ``sum a cos(k . x + phi)`` via angle addition."""
    core = np.zeros((2 * waves + 1,) * d)
    for k, a, phi in terms:
        t = np.array(a * np.exp(1j * phi))
        for kj in k:
            t = np.multiply.outer(t, _exp_coeffs(kj, waves))
        core += t.real
    return core


@dataclass
class CosineRhs:
    rhs: object
    compatibility_residual: float = 0.0
    discarded: float = 0.0


def build_cosine_rhs(n, d, boundary="dirichlet", rhs_rank=7, seed=0, stream=None, terms=None):
    """Cosine-sum right-hand side in factored form, compressed to
    (multilinear) rank ``rhs_rank``.  For periodic grids the mean is removed
    so the singular Kronecker-sum system stays consistent; its size is
    reported as ``compatibility_residual``."""
    stream = stream or Stream(seed)
    if terms is None:
        terms = cosine_terms(stream, d)
    _, x = grid(n, boundary)
    F = trig_basis(x)
    core = cosine_core(terms, d)
    compat = 0.0
    if boundary == "periodic":
        means = F.mean(axis=0)
        mean = float(multi_mode_product(core, [means.reshape(1, -1)] * d).reshape(()))
        core[(0,) * d] -= mean
        compat = abs(mean) * math.sqrt(n ** d)
    full = TuckerTensor.from_factors(core, [F] * d)
    # per-mode HOSVD truncation to rhs_rank
    Ps = []
    for k in range(d):
        f = svd(matricize(full.core, k))
        keep = min(rhs_rank, len(f.sigma))
        Ps.append(f.P[:, :keep])
    trunc = TuckerTensor(multi_mode_product(full.core, [P.T for P in Ps]),
                         [U @ P for U, P in zip(full.factors, Ps)])
    # factors are orthonormal, so the truncation error lives in core space
    discarded = kn.fro_norm(full.core - multi_mode_product(trunc.core, Ps))
    if d == 2:
        rhs = LowRankMatrix(trunc.factors[0], trunc.core, trunc.factors[1])
    else:
        rhs = trunc
    return CosineRhs(rhs, compat, discarded)


@dataclass
class SpectralOperator:
    op: DenseOperator
    interval: tuple
    eigenvalues: np.ndarray
    cond: float
    attempts: int


def build_random_spectral_operator(n, i, spec_dist, seed=0, stream=None, max_attempts=10):
    """``A_i = P diag(lam) P^{-1}``, P uniform with unit columns,
    ``lam = (-1)^i (rand(n) + 1 + spec_dist (i - 1))``."""
    stream = stream or Stream(seed)
    shift = 1.0 + spec_dist * (i - 1)
    sign = -1.0 if i % 2 else 1.0
    for attempt in range(1, max_attempts + 1):
        P = stream.rand((n, n))
        lam = sign * (stream.rand(n) + shift)
        P /= np.sqrt(np.sum(P * P, axis=0))
        sv = svd(P).sigma
        cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        if cond >= COND_LIMIT:
            continue
        Pinv = kn.lu_solve(kn.lu_factor(P), np.eye(n))
        A = (P * lam) @ Pinv
        lo, hi = sorted((sign * shift, sign * (shift + 1.0)))
        return SpectralOperator(DenseOperator(A), (lo, hi), lam, cond, attempt)
    raise ExperimentError(f"no well-conditioned P_{i} after {max_attempts} draws")


def build_random_tucker_rhs(n, d, rank=7, seed=0, stream=None):
    """``B = C x_i U_i``, core uniform(0, 1), factors orth of Gaussians
    (factors are drawn first, mode by mode)."""
    stream = stream or Stream(seed)
    factors = [orth(stream.randn((n, rank))) for _ in range(d)]
    core = stream.rand((rank,) * d)
    if d == 2:
        return LowRankMatrix(factors[0], core, factors[1])
    return TuckerTensor(core, factors)


def zero_rhs(shape, rank=1):
    if len(shape) == 2:
        return LowRankMatrix.zeros(shape[0], shape[1], rank)
    return TuckerTensor(np.zeros((rank,) * len(shape)), [orth(np.eye(n, rank)) for n in shape])


# --------------------------------------------------------------------------
# direct oracles

def dense_oracle(opA, opB, C):
    return kn.solve_sylvester_dense(opA.to_dense(), opB.to_dense(), C.to_dense())


def laplacian_eigen_oracle(ops, B, pinv=False):
    """Diagonalize each symmetric coefficient and divide in the eigenbasis.

    Uses numpy's symmetric eigensolver on purpose: it shares no code with
    the solvers under test.  ``pinv`` zeroes the components whose eigenvalue
    sum vanishes (minimum-norm solution of a singular but consistent system)."""
    eig = [np.linalg.eigh(op.to_dense()) for op in ops]
    Bd = B.to_dense()
    Bh = multi_mode_product(Bd, [Q.T for _, Q in eig])
    denom = np.zeros(Bd.shape)
    for i, (lam, _) in enumerate(eig):
        shape = [1] * Bd.ndim
        shape[i] = -1
        denom = denom + lam.reshape(shape)
    if pinv:
        scale = sum(float(np.max(np.abs(lam))) for lam, _ in eig)
        small = np.abs(denom) <= 1e-12 * scale
        denom = np.where(small, 1.0, denom)
        Bh = np.where(small, 0.0, Bh)
    return multi_mode_product(Bh / denom, [Q for _, Q in eig])


# --------------------------------------------------------------------------
# runner

@dataclass
class ExperimentResult:
    solution: object
    trace: object
    ops: list
    rhs: object
    info: dict
    files: dict


def _build_problem(spec, stream):
    info = {}
    d, n = spec.d, spec.n
    if spec.kind.startswith("poisson"):
        if spec.zero_rhs:
            rhs = zero_rhs((n,) * d)
        else:
            res = build_cosine_rhs(n, d, spec.boundary, spec.rhs_rank, stream=stream)
            rhs = res.rhs
            info["compatibility_residual"] = res.compatibility_residual
            info["rhs_truncation_error"] = res.discarded
        op = build_poisson_operator(n, spec.boundary)
        ops = [op] * d
        dx, _ = grid(n, spec.boundary)
        info["dx"] = dx
        info["grid"] = ("x_j = j*dx, j=1..n, dx=L/(n+1)" if spec.boundary == "dirichlet"
                        else "x_j = j*dx, j=0..n-1, dx=L/n")
    elif spec.kind.startswith("random"):
        rhs = zero_rhs((n,) * d) if spec.zero_rhs else build_random_tucker_rhs(
            n, d, spec.rhs_rank, stream=stream)
        built = [build_random_spectral_operator(n, i, spec.spec_dist, stream=stream)
                 for i in range(1, d + 1)]
        ops = [b.op for b in built]
        info["intervals"] = [list(b.interval) for b in built]
        info["conditions"] = [b.cond for b in built]
        lo = sum(b.interval[0] for b in built)
        hi = sum(b.interval[1] for b in built)
        info["spectral_sum_interval"] = [lo, hi]
        # A_1 (+) ... (+) A_d is invertible when the sum of the eigenvalue
        # intervals stays away from zero (for d = 2: spectra of A_1, -A_2 apart)
        info["separation"] = max(lo, -hi)
        if info["separation"] <= 0:
            raise ExperimentError(f"spectra overlap: {info['intervals']}")
    else:
        from .fileio import read_lowrank_bundle, read_operator
        ops = [read_operator(spec.paths["a"]), read_operator(spec.paths["b"])]
        rhs = read_lowrank_bundle(spec.paths["c"])
    return ops, rhs, info


def _solve(spec, ops, rhs, cfg):
    if spec.kind.startswith("poisson") and spec.boundary == "periodic":
        X, trace, _ = solve_with_constant_nullspace(ops, rhs, cfg, spec.mode)
        return X, trace
    if spec.d == 2:
        solver = adaptive_solve if spec.mode == "adaptive" else fixed_rank_solve
        return solver(ops[0], ops[1], rhs, cfg)
    solver = tensor_adaptive_solve if spec.mode == "adaptive" else tensor_fixed_rank_solve
    return solver(ops, rhs, cfg)


def _oracle(spec, ops, rhs):
    n, d = spec.n, spec.d
    if spec.kind.startswith("poisson") and spec.boundary == "periodic":
        if n > min(spec.oracle_max, 2048 if d == 2 else 96):
            return None
        return laplacian_eigen_oracle(ops, rhs if d == 3 else TuckerTensor(rhs.S, [rhs.U, rhs.V]),
                                      pinv=True)
    if d == 2:
        if max(op.dim for op in ops) > spec.oracle_max:
            return None
        return dense_oracle(ops[0], ops[1], rhs)
    if spec.kind == "poisson3d" and n <= min(spec.oracle_max, 96):
        return laplacian_eigen_oracle(ops, rhs)
    return None


def _singular_values(X):
    if isinstance(X, LowRankMatrix):
        return [X.singular_values()]
    return X.hosvd_singular_values()


def _dense_singular_values(Xd):
    if Xd.ndim == 2:
        return [svd(Xd).sigma]
    return [svd(matricize(Xd, k)).sigma for k in range(Xd.ndim)]


def _sv_rows(svs, d):
    rows = []
    for k, s in enumerate(svs):
        for i, v in enumerate(s):
            rows.append((i + 1, v) if d == 2 else (k + 1, i + 1, v))
    return rows


def run_experiment(spec, write=True):
    """Build, solve, compare against the direct oracle when feasible and
    (optionally) write trace.csv, sv_approx.csv, sv_direct.csv,
    sv_distance.csv and manifest.json into ``spec.output_dir``."""
    timers = {}
    t0 = time.perf_counter()
    stream = Stream(spec.seed)
    ops, rhs, info = _build_problem(spec, stream)
    timers["build"] = time.perf_counter() - t0
    cfg = spec.config()
    oracle = None
    if spec.theta_source == "X":
        t0 = time.perf_counter()
        oracle = _oracle(spec, ops, rhs)
        timers["oracle"] = time.perf_counter() - t0
        if oracle is None:
            raise ExperimentError("theta_source 'X' needs the direct oracle")
        sx = _dense_singular_values(oracle)[0]
        cfg.theta_rel = None
        cfg.theta = spec.theta_rel * kn.fro_norm(sx)
    t0 = time.perf_counter()
    X, trace = _solve(spec, ops, rhs, cfg)
    timers["solve"] = time.perf_counter() - t0
    if oracle is None and spec.theta_source == "Y":
        t0 = time.perf_counter()
        oracle = _oracle(spec, ops, rhs)
        timers["oracle"] = time.perf_counter() - t0
    sv_approx = _singular_values(X)
    sv_direct = _dense_singular_values(oracle) if oracle is not None else None
    if spec.kind.startswith("poisson") and spec.boundary == "periodic":
        res = nullspace_residual_norm(ops, rhs, X)
        info["residual_original_fro"] = res
        info["residual_original_scaled_fro"] = res / math.sqrt(spec.n ** spec.d)
    info.update(termination=trace.reason, iterations=trace.iterations,
                final_residual_fro=trace.final_residual,
                final_residual_scaled_fro=float(trace.scaled_residuals[-1]) if trace.records else None,
                final_rank=list(X.ranks) if isinstance(X, TuckerTensor) else X.rank)
    if sv_direct is not None:
        dist = []
        for sa, sd in zip(sv_approx, sv_direct):
            m = min(len(sa), len(sd))
            dist.append(np.abs(sd[:m] - sa[:m]))
        info["max_sv_distance_rel"] = max(float(np.max(v)) / float(sd[0]) if len(v) and sd[0] > 0
                                          else 0.0 for v, sd in zip(dist, sv_direct))
    files = {}
    if write and spec.output_dir:
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        d = spec.d
        rank_cols = ["rank"] if d == 2 else [f"rank_{k + 1}" for k in range(d)]
        rows = []
        for rec in trace.records:
            ranks = [rec.rank] if d == 2 else list(rec.rank)
            rows.append([rec.iteration, rec.residual, rec.scaled_residual] + [int(r) for r in ranks])
        write_csv(out / "trace.csv", ["iter", "residual_fro", "residual_scaled_fro"] + rank_cols, rows)
        files["trace"] = out / "trace.csv"
        sv_head = ["index", "sigma"] if d == 2 else ["mode", "index", "sigma"]
        write_csv(out / "sv_approx.csv", sv_head, _sv_rows(sv_approx, d))
        files["sv_approx"] = out / "sv_approx.csv"
        if sv_direct is not None:
            write_csv(out / "sv_direct.csv", sv_head, _sv_rows(sv_direct, d))
            files["sv_direct"] = out / "sv_direct.csv"
            drows = []
            for k, (sa, sd) in enumerate(zip(sv_approx, sv_direct)):
                for i in range(min(len(sa), len(sd))):
                    row = [i + 1, sd[i], sa[i], abs(sd[i] - sa[i])]
                    drows.append(row if d == 2 else [k + 1] + row)
            dhead = ["index", "sigma_direct", "sigma_approx", "distance"]
            write_csv(out / "sv_distance.csv", dhead if d == 2 else ["mode"] + dhead, drows)
            files["sv_distance"] = out / "sv_distance.csv"
        if isinstance(X, LowRankMatrix):
            write_lowrank_bundle(out / "solution", X)
        else:
            write_tucker_bundle(out / "solution", X)
        if spec.plot:
            atomic_write_text(out / "plot.gp", _gnuplot_script(d))
            files["plot"] = out / "plot.gp"
        manifest = {
            "spec": asdict(spec),
            "seed": spec.seed,
            "backend": backend_name(),
            "rng": "PCG64 (numpy), Box-Muller normals",
            "theta_rule": "theta = theta_rel * ||sigma||_F of the current iterate"
                          if spec.theta_source == "Y" else "theta = theta_rel * ||sigma(X_direct)||_F",
            "info": _jsonable(info),
            "timers_s": {k: round(v, 6) for k, v in timers.items()},
        }
        atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        files["manifest"] = out / "manifest.json"
    return ExperimentResult(X, trace, ops, rhs, info, files)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(fmt(obj)) if math.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _gnuplot_script(d):
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale y\n"
        "set xlabel 'iteration'\n"
        "set ylabel 'scaled residual'\n"
        "set y2label 'rank'\n"
        "set y2tics\n"
        "plot 'trace.csv' using 1:3 with linespoints, "
        "'trace.csv' using 1:4 axes x1y2 with steps\n"
    )
