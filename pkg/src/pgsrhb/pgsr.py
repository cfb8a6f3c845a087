"""Group-sparse spectral sampling over the observed loss history.

The sampler fits a low-degree Fourier surrogate of the loss by group lasso
on the richest history level with at least ``min_observations`` records,
fixes the variables of its ``sparsity`` largest terms to the surrogate
minimizer, and samples the remaining variables uniformly.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .fourier import (Restriction, Surrogate, build_design, enumerate_basis,
                      group_columns, restrict_sample)
from .lasso import GroupedProblem, SolverSettings, solve, solve_lasso
from .space import (CategoricalCategory, LogGridCategory, NumericCategory,
                    SearchSpace, random_config)

log = logging.getLogger(__name__)

MAX_FIXED = 24


class GuidanceError(RuntimeError):
    pass


class History:
    """Append-only ``resource -> [(config, loss)]`` record lists.

    Only finite losses belong here; failed trials stay out of the fit.
    """

    def __init__(self):
        self._levels: dict[float, list] = {}
        self._lock = threading.Lock()

    def add(self, resource: float, config, loss: float) -> None:
        if not math.isfinite(loss):
            raise ValueError("history losses must be finite")
        cfg = np.asarray(config, dtype=np.int8).copy()
        cfg.setflags(write=False)
        with self._lock:
            self._levels.setdefault(float(resource), []).append((cfg, float(loss)))

    def counts(self) -> dict[float, int]:
        with self._lock:
            return {r: len(v) for r, v in sorted(self._levels.items())}

    def snapshot(self, resource: float) -> tuple[np.ndarray, np.ndarray]:
        with self._lock:
            recs = list(self._levels.get(float(resource), ()))
        if not recs:
            return np.zeros((0, 0), dtype=np.int8), np.zeros(0)
        return np.stack([c for c, _ in recs]), np.array([l for _, l in recs])

    def records(self, resource: float) -> list:
        with self._lock:
            return list(self._levels.get(float(resource), ()))

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._levels.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        a, b = self._levels, other._levels
        if a.keys() != b.keys():
            return False
        return all(len(a[r]) == len(b[r]) and all(
            np.array_equal(ca, cb) and la == lb for (ca, la), (cb, lb) in zip(a[r], b[r]))
            for r in a)


@dataclass(frozen=True)
class PgsrSettings:
    sparsity: int = 5
    degree: int = 2
    min_observations: int = 50
    reset_prob: float = 0.2
    lam: float = 1.0

    def __post_init__(self):
        if self.sparsity < 1 or self.degree < 1 or self.min_observations < 1:
            raise ValueError("sparsity, degree and min_observations must be >= 1")
        if not 0.0 <= self.reset_prob <= 1.0:
            raise ValueError("reset_prob must lie in [0, 1]")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass
class Guidance:
    J: tuple
    z: tuple
    surrogate: Surrogate
    source_resource: Optional[float] = None
    reduced_ranges: dict = field(default_factory=dict)
    method: str = "pgsr"
    lam: float = 0.0

    @property
    def restriction(self) -> Restriction:
        return Restriction(self.J, self.z)

    def to_dict(self) -> dict:
        return {"method": self.method, "lambda": self.lam,
                "source_resource": self.source_resource,
                "J": list(self.J), "z": list(self.z),
                "surrogate": self.surrogate.to_dict(),
                "reduced_ranges": self.reduced_ranges}


def select_history(history: History, T: int):
    """Largest resource level holding at least ``T`` records, else None."""
    levels = [r for r, n in history.counts().items() if n >= T]
    if not levels:
        return None
    r = max(levels)
    X, y = history.snapshot(r)
    return r, X, y


def minimize_on(surrogate: Surrogate, J, kernels=None) -> tuple[tuple, float]:
    """Minimize ``surrogate`` over assignments of ``J`` (terms must lie in J).

    Ties resolve to the lexicographically first assignment with -1 < +1.
    """
    kernels = kernels or _backend.kernels
    J = list(J)
    if len(J) > MAX_FIXED:
        raise GuidanceError(f"{len(J)} fixed variables exceed the cap of {MAX_FIXED}")
    if not J:
        return (), surrogate.intercept
    pos = {j: len(J) - 1 - k for k, j in enumerate(J)}
    masks = np.array([sum(1 << pos[i] for i in S) for S, _ in surrogate.terms],
                     dtype=np.uint64)
    coefs = np.array([c for _, c in surrogate.terms], dtype=np.float64)
    k, val = kernels.minimize_parity_poly(masks, coefs, len(J))
    z = tuple(1 if (k >> pos[j]) & 1 else -1 for j in J)
    return z, val + surrogate.intercept


def top_terms(basis, coefficients, s: int) -> list[int]:
    """Indices of the ``s`` largest nonzero |coefficients|, ties by basis order."""
    order = sorted((j for j in range(len(basis)) if coefficients[j] != 0.0),
                   key=lambda j: (-abs(coefficients[j]), j))
    return order[:s]


def fit_guidance(inputs, outputs, space: SearchSpace, settings: PgsrSettings,
                 method: str = "pgsr", solver: SolverSettings | None = None,
                 source_resource: float | None = None) -> Guidance:
    """Fit the surrogate and choose the restriction.

    ``method`` is ``"pgsr"`` (blocks follow the space's bit groups) or
    ``"psr"`` (plain lasso, every column on its own).
    """
    inputs = np.asarray(inputs)
    outputs = np.asarray(outputs, dtype=np.float64)
    if len(outputs) < 1:
        raise GuidanceError("need at least one observation")
    n = space.total_bits
    basis = enumerate_basis(n, min(settings.degree, n))
    dm = build_design(list(inputs), basis)
    if method == "pgsr":
        dm.column_groups = group_columns(basis, space.index_groups())
        sol = solve(GroupedProblem.from_design(dm, outputs, settings.lam), solver)
    elif method == "psr":
        sol = solve_lasso(outputs, dm.matrix, settings.lam, solver)
    else:
        raise ValueError(f"unknown guidance method {method!r}")
    if not sol.converged:
        log.warning("%s fit stopped after %d sweeps (kkt %.2e)", method,
                    sol.sweeps_used, sol.kkt_residual)
    picked = top_terms(basis, sol.coefficients, settings.sparsity)
    surrogate = Surrogate(tuple((basis[j], sol.coefficients[j]) for j in picked),
                          sol.intercept)
    J = tuple(surrogate.variables)
    z, _ = minimize_on(surrogate, J)
    g = Guidance(J, z, surrogate, source_resource, method=method, lam=settings.lam)
    g.reduced_ranges = reduced_ranges(g, space)
    return g


def _consistent(width: int, fixed: dict[int, int]):
    """Integers in [0, 2**width) whose big-endian bits agree with ``fixed``."""
    for v in range(1 << width):
        if all(((v >> (width - 1 - k)) & 1) == (1 if bit > 0 else 0)
               for k, bit in fixed.items()):
            yield v


def reduced_ranges(guidance: Guidance, space: SearchSpace) -> dict:
    """Per-category values still reachable under the guidance restriction."""
    fixed_all = dict(zip(guidance.J, guidance.z))
    out = {}
    for cat, off in zip(space.categories, space.offsets):
        fixed = {i - off: v for i, v in fixed_all.items() if off <= i < off + cat.bits}
        if isinstance(cat, NumericCategory):
            eb, mb = cat.exponent_bits, cat.mantissa_bits
            values = [cat.value_of(v >> mb, v & ((1 << mb) - 1))
                      for v in _consistent(eb + mb, fixed)]
            out[cat.name] = {"low": min(values), "high": max(values),
                             "fixed_bits": len(fixed)}
        elif isinstance(cat, LogGridCategory):
            values = [cat.value_of(v) for v in _consistent(cat.bits, fixed)]
            out[cat.name] = {"low": min(values), "high": max(values),
                             "fixed_bits": len(fixed)}
        elif isinstance(cat, CategoricalCategory):
            labels = []
            for v in _consistent(cat.bits, fixed):
                label = cat.choices[v % len(cat.choices)]
                if label not in labels:
                    labels.append(label)
            out[cat.name] = {"choices": labels, "fixed_bits": len(fixed)}
    return out


class UniformSampler:
    """Hyperband's sampler: independent uniform bits."""

    def __init__(self, space: SearchSpace):
        self.space = space
        self.draws = 0

    def sample(self, history: History, rng: np.random.Generator):
        self.draws += 1
        return random_config(self.space, rng), "uniform"


class PgsrSampler:
    """Restricted sampling with a lazily refitted, cached guidance.

    The guidance is refitted only when the selected history level or its
    record count changes.
    """

    def __init__(self, space: SearchSpace, settings: PgsrSettings,
                 solver: SolverSettings | None = None):
        self.space = space
        self.settings = settings
        self.solver = solver
        self.draws = 0
        self.fits = 0
        self.warnings: list[str] = []
        self._key = None
        self._guidance: Optional[Guidance] = None

    def guidance(self, history: History) -> Optional[Guidance]:
        counts = history.counts()
        levels = [r for r, n in counts.items() if n >= self.settings.min_observations]
        if not levels:
            return None
        r = max(levels)
        key = (r, counts[r])
        if key != self._key:
            self._key = key
            _, X, y = select_history(history, self.settings.min_observations)
            try:
                self._guidance = fit_guidance(X, y, self.space, self.settings,
                                              solver=self.solver, source_resource=r)
                self.fits += 1
            except GuidanceError as exc:
                msg = f"guidance fit at r={r} failed: {exc}; sampling uniformly"
                log.warning(msg)
                self.warnings.append(msg)
                self._guidance = None
        return self._guidance

    def sample(self, history: History, rng: np.random.Generator):
        self.draws += 1
        g = self.guidance(history)
        if g is None or not g.J:
            return random_config(self.space, rng), "uniform"
        if rng.random() < self.settings.reset_prob:
            return random_config(self.space, rng), "pgsr-reset"
        return restrict_sample(self.space, g.restriction, rng), "pgsr-restricted"
