"""Fourier analysis of functions on the Boolean hypercube {-1, +1}^n.

A basis index is a sorted tuple of 0-based variable indices ``S``; the parity
``chi_S(x)`` is the product of the selected coordinates.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_ORACLE_BITS = 16


def _check_index(S: Sequence[int], n: int) -> None:
    if any(i < 0 or i >= n for i in S):
        raise IndexError(f"basis index {tuple(S)} out of range for n={n}")


def eval_basis(S: Sequence[int], x) -> int:
    """Parity ``prod_{i in S} x_i``; the empty set gives +1."""
    x = np.asarray(x)
    _check_index(S, len(x))
    return int(np.prod(x[list(S)], dtype=np.int64)) if len(S) else 1


def enumerate_basis(n: int, d: int) -> list[tuple]:
    """All nonempty subsets of ``range(n)`` of size <= d, by (degree, lex)."""
    if d < 1 or d > n:
        raise ValueError(f"degree must satisfy 1 <= d <= n, got d={d}, n={n}")
    return [S for k in range(1, d + 1) for S in itertools.combinations(range(n), k)]


def basis_size(n: int, d: int) -> int:
    return sum(math.comb(n, k) for k in range(1, d + 1))


@dataclass
class DesignMatrix:
    matrix: np.ndarray
    basis: list
    column_groups: list = field(default_factory=list)

    @property
    def shape(self):
        return self.matrix.shape


def build_design(configs, basis: Sequence[Sequence[int]]) -> DesignMatrix:
    """Rows are configurations, columns are parities ``chi_S``."""
    configs = list(configs)
    basis = [tuple(S) for S in basis]
    if not configs:
        return DesignMatrix(np.zeros((0, len(basis))), basis)
    lengths = {len(c) for c in configs}
    if len(lengths) != 1:
        raise ValueError(f"configs have mixed lengths {sorted(lengths)}")
    n = lengths.pop()
    X = np.asarray(configs, dtype=np.float64).reshape(len(configs), n)
    if not basis:
        return DesignMatrix(np.zeros((len(configs), 0)), basis)
    for S in basis:
        _check_index(S, n)
    d = max(len(S) for S in basis)
    # pad with a column of ones so mixed-degree products vectorize
    padded = np.hstack([X, np.ones((X.shape[0], 1))])
    idx = np.full((len(basis), d), n, dtype=np.intp)
    for j, S in enumerate(basis):
        idx[j, :len(S)] = S
    M = padded[:, idx].prod(axis=2)
    return DesignMatrix(np.asfortranarray(M), basis)


def group_columns(basis: Sequence[Sequence[int]], groups: Sequence[Sequence[int]]) -> list[np.ndarray]:
    """Partition columns by the set of variable groups each basis index touches.

    Blocks are ordered by their first column.
    """
    owner = {}
    for g, idx in enumerate(groups):
        for i in idx:
            owner[i] = g
    blocks: dict[tuple, list[int]] = {}
    for j, S in enumerate(basis):
        signature = tuple(sorted({owner[i] for i in S}))
        blocks.setdefault(signature, []).append(j)
    return [np.asarray(cols, dtype=np.intp) for cols in blocks.values()]


def group_signatures(basis, groups) -> list[tuple]:
    owner = {i: g for g, idx in enumerate(groups) for i in idx}
    seen = {}
    for S in basis:
        seen.setdefault(tuple(sorted({owner[i] for i in S})), None)
    return list(seen)


@dataclass(frozen=True)
class Surrogate:
    """Sparse multilinear polynomial ``intercept + sum coef * chi_S``."""

    terms: tuple = ()
    intercept: float = 0.0

    def __post_init__(self):
        terms = tuple((tuple(sorted(S)), float(c)) for S, c in self.terms)
        if len({S for S, _ in terms}) != len(terms):
            raise ValueError("surrogate basis indices must be distinct")
        if not all(math.isfinite(c) for _, c in terms) or not math.isfinite(self.intercept):
            raise ValueError("surrogate coefficients must be finite")
        object.__setattr__(self, "terms", terms)

    @property
    def support(self) -> list[tuple]:
        return [S for S, _ in self.terms]

    @property
    def variables(self) -> list[int]:
        return sorted({i for S, _ in self.terms for i in S})

    def to_dict(self) -> dict:
        return {"intercept": self.intercept,
                "terms": [{"indices": list(S), "coef": c} for S, c in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "Surrogate":
        return cls(tuple((tuple(t["indices"]), t["coef"]) for t in d["terms"]),
                   float(d["intercept"]))


def eval_surrogate(g: Surrogate, x) -> float:
    x = np.asarray(x)
    total = g.intercept
    for S, c in g.terms:
        total += c * eval_basis(S, x)
    return total


@dataclass(frozen=True)
class Restriction:
    """Fix the variables ``J`` to the values ``z``."""

    J: tuple = ()
    z: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(int(j) for j in self.J))
        object.__setattr__(self, "z", tuple(int(v) for v in self.z))
        if len(self.J) != len(self.z):
            raise ValueError("restriction needs one value per fixed index")
        if len(set(self.J)) != len(self.J):
            raise ValueError("restriction indices must be distinct")
        if any(v not in (-1, 1) for v in self.z):
            raise ValueError("restriction values must be -1 or +1")

    def apply(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.int8, copy=True)
        _check_index(self.J, len(x))
        if self.J:
            x[list(self.J)] = self.z
        return x


def restrict_sample(space, restriction: Restriction, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the subcube where ``x_J = z``."""
    from .space import random_config
    return restriction.apply(random_config(space, rng))


def all_points(n: int) -> np.ndarray:
    """Every point of {-1,+1}^n as rows, in big-endian counting order."""
    k = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return (2 * ((k[:, None] >> shifts) & 1) - 1).astype(np.int8)


def exact_fourier_coeffs(f: Callable, n: int) -> dict[tuple, float]:
    """All ``2**n`` Fourier coefficients by direct averaging over the cube.

    ``f`` is called on an ``(2**n, n)`` array of points if it accepts one
    (vectorized), otherwise point by point.
    """
    if n > MAX_ORACLE_BITS:
        raise ValueError(f"exact coefficients need n <= {MAX_ORACLE_BITS}, got {n}")
    X = all_points(n)
    try:
        values = np.asarray(f(X), dtype=np.float64)
        if values.shape != (X.shape[0],):
            raise TypeError
    except (TypeError, ValueError, IndexError):
        values = np.array([f(x) for x in X], dtype=np.float64)
    # in-place butterfly: each pass sums over one coordinate
    coef = values.copy()
    h = 1
    while h < coef.size:
        coef = coef.reshape(-1, 2, h)
        a, b = coef[:, 0, :].copy(), coef[:, 1, :].copy()
        coef[:, 0, :] = a + b
        coef[:, 1, :] = b - a
        coef = coef.reshape(-1)
        h *= 2
    coef /= coef.size
    # position k holds the subset whose members are the set bits of k,
    # with the most significant bit standing for variable 0
    out = {}
    for k in range(1 << n):
        S = tuple(i for i in range(n) if (k >> (n - 1 - i)) & 1)
        out[S] = float(coef[k])
    return out
