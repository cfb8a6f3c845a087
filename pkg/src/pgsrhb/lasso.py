"""Group lasso by cyclic block coordinate descent.

Solves::

    min_{alpha, b}  0.5 * ||y - b - sum_l Psi_l alpha_l||^2
                    + lam * sum_l sqrt(p_l) * ||alpha_l||_2

with an unpenalized intercept ``b``.  Plain lasso is the special case where
every column is its own block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend


class SolverError(ValueError):
    pass


@dataclass
class GroupedProblem:
    y: np.ndarray
    design: np.ndarray
    groups: list
    lam: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        self.design = np.asarray(self.design, dtype=np.float64)
        if self.design.ndim != 2:
            raise SolverError("design must be a 2-d array")
        if self.design.shape[0] != self.y.shape[0]:
            raise SolverError(
                f"y has {self.y.shape[0]} rows, design has {self.design.shape[0]}")
        if self.lam < 0:
            raise SolverError("lambda must be >= 0")
        self.groups = [np.asarray(g, dtype=np.intp) for g in self.groups]
        cols = np.sort(np.concatenate(self.groups)) if self.groups else np.empty(0, np.intp)
        if not np.array_equal(cols, np.arange(self.design.shape[1])):
            raise SolverError("groups must partition the design columns")

    @property
    def weights(self) -> np.ndarray:
        return np.sqrt([len(g) for g in self.groups])

    @classmethod
    def from_design(cls, dm, y, lam) -> "GroupedProblem":
        return cls(y, dm.matrix, dm.column_groups, lam)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    max_sweeps: int = 10_000
    standardize: bool = True
    fit_intercept: bool = True
    inner_max: int = 1_000

    def __post_init__(self):
        if not self.tol > 0:
            raise SolverError("tol must be positive")
        if self.max_sweeps < 1:
            raise SolverError("max_sweeps must be >= 1")


@dataclass
class Solution:
    coefficients: np.ndarray
    intercept: float
    objective: float
    converged: bool
    sweeps_used: int
    kkt_residual: float
    trace: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    column_scale: np.ndarray = field(repr=False, default=None)

    def predict(self, design) -> np.ndarray:
        return self.intercept + np.asarray(design, dtype=np.float64) @ self.coefficients


def objective(problem: GroupedProblem, coefficients, intercept: float = 0.0) -> float:
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    if coefficients.shape[0] != problem.design.shape[1]:
        raise SolverError("coefficient length does not match the design")
    resid = problem.y - intercept - problem.design @ coefficients
    pen = sum(w * np.linalg.norm(coefficients[g])
              for g, w in zip(problem.groups, problem.weights))
    return 0.5 * float(resid @ resid) + problem.lam * float(pen)


def kkt_residual(problem: GroupedProblem, coefficients, intercept: float = 0.0,
                 fit_intercept: bool = True) -> float:
    """Largest violation of the block optimality conditions.

    Active blocks: ``||Psi_l^T r - lam w_l alpha_l/||alpha_l|| ||``.  Zero
    blocks: ``max(0, ||Psi_l^T r|| - lam w_l)`` where ``r`` is the residual.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    r = problem.y - intercept - problem.design @ coefficients
    worst = abs(float(r.sum())) if fit_intercept else 0.0
    for g, w in zip(problem.groups, problem.weights):
        grad = problem.design[:, g].T @ r
        a = coefficients[g]
        na = np.linalg.norm(a)
        thr = problem.lam * w
        if na > 0:
            v = np.linalg.norm(grad - thr * a / na)
        else:
            v = max(0.0, np.linalg.norm(grad) - thr)
        worst = max(worst, float(v))
    return worst


def standardized(problem: GroupedProblem, fit_intercept: bool = True):
    """Unit-norm columns and (with an intercept) centered response.

    Returns ``(problem_s, scale, y_offset)``; a solution ``beta`` of the
    standardized problem maps back as ``alpha = beta / scale``.
    """
    scale = np.linalg.norm(problem.design, axis=0)
    scale[scale == 0] = 1.0
    offset = float(problem.y.mean()) if fit_intercept and problem.y.size else 0.0
    ps = GroupedProblem(problem.y - offset, problem.design / scale,
                        problem.groups, problem.lam)
    return ps, scale, offset


def critical_lambda(problem: GroupedProblem, fit_intercept: bool = True) -> float:
    """Smallest lambda at which every block is zero."""
    yc = problem.y - problem.y.mean() if fit_intercept else problem.y
    if not problem.groups:
        return 0.0
    return max(float(np.linalg.norm(problem.design[:, g].T @ yc)) / w
               for g, w in zip(problem.groups, problem.weights))


def _prepare_blocks(X: np.ndarray, groups: Sequence[np.ndarray]):
    order = np.concatenate(groups) if groups else np.empty(0, np.intp)
    Xo = np.asfortranarray(X[:, order])
    starts = np.zeros(len(groups) + 1, dtype=np.int64)
    starts[1:] = np.cumsum([len(g) for g in groups])
    grams, offs, lips, ortho = [], [0], [], []
    for l in range(len(groups)):
        Xl = Xo[:, starts[l]:starts[l + 1]]
        A = Xl.T @ Xl
        grams.append(A.ravel())
        offs.append(offs[-1] + A.size)
        diag = np.diag(A)
        off = A - np.diag(diag)
        c = diag[0] if diag.size else 0.0
        is_ortho = (c > 0 and np.all(np.abs(diag - c) <= 1e-12 * c)
                    and np.all(np.abs(off) <= 1e-12 * c))
        ortho.append(1 if is_ortho else 0)
        L = float(np.linalg.eigvalsh(A)[-1]) if A.size else 0.0
        lips.append(L if L > 0 else 1.0)
    gram = np.concatenate(grams) if grams else np.zeros(0)
    return (order, Xo, starts, gram, np.asarray(offs, dtype=np.int64),
            np.asarray(lips, dtype=np.float64), np.asarray(ortho, dtype=np.uint8))


def solve(problem: GroupedProblem, settings: SolverSettings | None = None,
          kernels=None) -> Solution:
    """Fit the group lasso.

    With ``settings.standardize`` the penalty applies to the coefficients of
    unit-norm columns (and a centered response); the returned coefficients
    are always on the original column scale.  ``objective`` and
    ``kkt_residual`` on the Solution refer to the problem actually solved.
    """
    settings = settings or SolverSettings()
    kernels = kernels or _backend.kernels
    if problem.y.size == 0:
        raise SolverError("need at least one observation")
    if not (np.all(np.isfinite(problem.y)) and np.all(np.isfinite(problem.design))):
        raise SolverError("non-finite entries in the problem")
    if not math.isfinite(problem.lam):
        raise SolverError("lambda must be finite")

    if settings.standardize:
        work, scale, offset = standardized(problem, settings.fit_intercept)
    else:
        work, scale, offset = problem, np.ones(problem.design.shape[1]), 0.0
    p = work.design.shape[1]
    order, Xo, starts, gram, offs, lips, ortho = _prepare_blocks(work.design, work.groups)
    beta0 = np.zeros(p)
    b0 = float(work.y.mean()) if settings.fit_intercept else 0.0
    beta_o, b, sweeps, converged, kkt, trace = kernels.bcd_solve(
        Xo, np.ascontiguousarray(work.y), starts, np.ascontiguousarray(work.weights),
        gram, offs, lips, ortho, float(work.lam), float(settings.tol),
        int(settings.max_sweeps), bool(settings.fit_intercept), beta0, b0,
        int(settings.inner_max))
    beta = np.empty(p)
    beta[order] = beta_o
    obj = float(trace[-1]) if len(trace) else objective(work, beta, b)
    return Solution(coefficients=beta / scale, intercept=float(b + offset),
                    objective=obj, converged=bool(converged), sweeps_used=int(sweeps),
                    kkt_residual=float(kkt), trace=np.asarray(trace), column_scale=scale)


def solve_lasso(y, design, lam: float, settings: SolverSettings | None = None,
                kernels=None) -> Solution:
    """Plain l1-penalized least squares (every column its own block)."""
    design = np.asarray(design, dtype=np.float64)
    groups = [np.array([j]) for j in range(design.shape[1])]
    return solve(GroupedProblem(y, design, groups, lam), settings, kernels)
