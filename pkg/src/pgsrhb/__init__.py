"""Hyperband with a group-sparse spectral sampler over log-linearly encoded spaces."""
from ._backend import BACKEND
from .fourier import Surrogate, build_design, enumerate_basis, exact_fourier_coeffs
from .lasso import GroupedProblem, Solution, SolverSettings, solve, solve_lasso
from .objectives import LogLinear2D, SyntheticSparse, make_objective, random_sparse
from .pgsr import Guidance, History, PgsrSampler, PgsrSettings, UniformSampler, fit_guidance
from .scheduler import (BudgetParams, RunResult, bracket_schedule, run_hyperband,
                        run_pgsr_hb, run_random_search, run_successive_halving)
from .space import (CategoricalCategory, LogGridCategory, NumericCategory, SearchSpace,
                    decode_config, encode_config)
from .store import TrialLog, TrialLogRecord, load_history, load_records

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BudgetParams", "CategoricalCategory", "GroupedProblem", "Guidance",
    "History", "LogGridCategory", "LogLinear2D", "NumericCategory", "PgsrSampler",
    "PgsrSettings", "RunResult", "SearchSpace", "Solution", "SolverSettings", "Surrogate",
    "SyntheticSparse", "TrialLog", "TrialLogRecord", "UniformSampler", "bracket_schedule",
    "build_design", "decode_config", "encode_config", "enumerate_basis",
    "exact_fourier_coeffs", "fit_guidance", "load_history", "load_records",
    "make_objective", "random_sparse", "run_hyperband", "run_pgsr_hb", "run_random_search",
    "run_successive_halving", "solve", "solve_lasso",
]
