"""Low-rank basis-update & Galerkin solvers for Sylvester and tensor Sylvester equations."""
from ._accel import USE_NUMBA, backend_name
from .bug_matrix import BugConfig, ConvergenceTrace, adaptive_solve, fixed_rank_solve
from .kernels import (SchurFactors, SvdFactors, low_rank_residual_norm, orth, real_schur,
                      scaled_fro_norm, solve_sylvester_dense, solve_sylvester_kron_oracle, svd)
from .lowrank import LowRankMatrix
from .operators import (CoefficientOperator, CsrOperator, DenseOperator, TridiagonalOperator,
                        solve_sylvester_large_small)
from .tucker import TuckerTensor, tensor_adaptive_solve, tensor_fixed_rank_solve

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "backend_name", "BugConfig", "ConvergenceTrace", "adaptive_solve",
    "fixed_rank_solve", "SchurFactors", "SvdFactors", "low_rank_residual_norm", "orth",
    "real_schur", "scaled_fro_norm", "solve_sylvester_dense", "solve_sylvester_kron_oracle",
    "svd", "LowRankMatrix", "CoefficientOperator", "CsrOperator", "DenseOperator",
    "TridiagonalOperator", "solve_sylvester_large_small", "TuckerTensor",
    "tensor_adaptive_solve", "tensor_fixed_rank_solve",
]
