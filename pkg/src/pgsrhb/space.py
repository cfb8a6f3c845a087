"""Hyperparameter search spaces and their Boolean encodings.

Every category owns a contiguous run of bits in a configuration vector
``x in {-1, +1}^n``.  A bit value ``x_j`` maps to a binary digit
``b_j = (x_j + 1) / 2`` and runs of digits are read big-endian.

Numeric categories use a log-linear encoding: the exponent bits pick an
integer power of ten from ``[e_min, e_min + 2**exponent_bits - 1]`` and the
mantissa bits pick a factor from ``{1/2**k, 2/2**k, ..., 1}`` (``k`` mantissa
bits).  The value is ``10**exponent * mantissa``.  Exponent bits and mantissa
bits form two separate groups, which is what the group lasso exploits.

Indices in this package are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union

import numpy as np


class EncodingError(ValueError):
    """Raised when bits or values cannot be encoded/decoded."""


def _as_pm1(bits: Sequence[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise EncodingError(f"expected a 1-d bit vector, got shape {arr.shape}")
    if not np.all((arr == 1) | (arr == -1)):
        raise EncodingError("bit entries must be -1 or +1")
    return arr.astype(np.int8)


def bits_to_uint(bits: Sequence[int] | np.ndarray) -> int:
    """Read a +-1 vector as a big-endian unsigned integer.

    >>> bits_to_uint([1, -1, 1])
    5
    """
    arr = _as_pm1(bits)
    if arr.size == 0:
        raise EncodingError("cannot read an empty bit vector")
    value = 0
    for b in arr:
        value = (value << 1) | (1 if b > 0 else 0)
    return value


def uint_to_bits(value: int, width: int) -> np.ndarray:
    """Inverse of :func:`bits_to_uint` for a fixed width."""
    if value < 0 or value >= (1 << width):
        raise EncodingError(f"{value} does not fit in {width} bits")
    out = np.empty(width, dtype=np.int8)
    for k in range(width):
        out[width - 1 - k] = 1 if (value >> k) & 1 else -1
    return out


@dataclass(frozen=True)
class NumericCategory:
    """Log-linear numeric hyperparameter: ``10**g(x) * h(y)``."""

    name: str
    exponent_bits: int
    mantissa_bits: int
    e_min: int

    kind = "numeric"

    def __post_init__(self):
        if self.exponent_bits < 0:
            raise EncodingError(f"{self.name}: exponent_bits must be >= 0")
        if self.mantissa_bits < 1:
            raise EncodingError(f"{self.name}: mantissa_bits must be >= 1")

    @property
    def bits(self) -> int:
        return self.exponent_bits + self.mantissa_bits

    @property
    def n_exponents(self) -> int:
        return 1 << self.exponent_bits

    def exponent(self, x) -> int:
        if self.exponent_bits == 0:
            return self.e_min
        return self.e_min + bits_to_uint(x)

    def mantissa(self, y) -> float:
        return (bits_to_uint(y) + 1) / (1 << self.mantissa_bits)

    def value_of(self, exponent_index: int, mantissa_index: int) -> float:
        return 10.0 ** (self.e_min + exponent_index) * (
            (mantissa_index + 1) / (1 << self.mantissa_bits))

    @property
    def min_value(self) -> float:
        return self.value_of(0, 0)

    @property
    def max_value(self) -> float:
        return self.value_of(self.n_exponents - 1, (1 << self.mantissa_bits) - 1)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": "numeric", "e_min": self.e_min,
                "exponent_bits": self.exponent_bits,
                "mantissa_bits": self.mantissa_bits}


@dataclass(frozen=True)
class CategoricalCategory:
    """Unordered choice among ``len(choices)`` labels on ``ceil(log2 c)`` bits.

    Bit patterns beyond ``c - 1`` wrap around modulo ``c``.
    """

    name: str
    choices: tuple

    kind = "categorical"

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if len(self.choices) < 2:
            raise EncodingError(f"{self.name}: need at least two choices")

    @property
    def bits(self) -> int:
        return math.ceil(math.log2(len(self.choices)))

    def decode(self, bits) -> Any:
        return self.choices[bits_to_uint(bits) % len(self.choices)]

    def encode(self, label) -> np.ndarray:
        try:
            idx = self.choices.index(label)
        except ValueError:
            raise EncodingError(f"{self.name}: unknown choice {label!r}") from None
        return uint_to_bits(idx, self.bits)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": "categorical",
                "choices": list(self.choices)}


@dataclass(frozen=True)
class LogGridCategory:
    """Numeric hyperparameter on ``2**bits`` evenly log-spaced values.

    This is the conventional single-block encoding, used as the baseline
    against the log-linear exponent/mantissa split.
    """

    name: str
    n_bits: int
    low: float
    high: float

    kind = "loggrid"

    def __post_init__(self):
        if self.n_bits < 1:
            raise EncodingError(f"{self.name}: n_bits must be >= 1")
        if not (0 < self.low < self.high) or not math.isfinite(self.high):
            raise EncodingError(f"{self.name}: need 0 < low < high")

    @property
    def bits(self) -> int:
        return self.n_bits

    def value_of(self, index: int) -> float:
        lo, hi = math.log10(self.low), math.log10(self.high)
        steps = (1 << self.n_bits) - 1
        return 10.0 ** (lo + (hi - lo) * index / steps)

    @property
    def min_value(self) -> float:
        return self.low

    @property
    def max_value(self) -> float:
        return self.high

    def decode(self, bits) -> float:
        return self.value_of(bits_to_uint(bits))

    def encode(self, v: float) -> np.ndarray:
        _check_positive(v)
        lo, hi = math.log10(self.low), math.log10(self.high)
        steps = (1 << self.n_bits) - 1
        idx = int(round((math.log10(v) - lo) / (hi - lo) * steps))
        return uint_to_bits(min(max(idx, 0), steps), self.n_bits)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": "loggrid", "bits": self.n_bits,
                "low": self.low, "high": self.high}


Category = Union[NumericCategory, CategoricalCategory, LogGridCategory]


def _check_positive(v) -> None:
    if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v) or v <= 0:
        raise EncodingError(f"value must be a finite positive number, got {v!r}")


def decode_numeric(cat: NumericCategory, x, y) -> float:
    """Decode exponent bits ``x`` and mantissa bits ``y`` to a positive value."""
    x = _as_pm1(x) if len(x) else np.empty(0, dtype=np.int8)
    y = _as_pm1(y)
    if len(x) != cat.exponent_bits or len(y) != cat.mantissa_bits:
        raise EncodingError(
            f"{cat.name}: expected {cat.exponent_bits}+{cat.mantissa_bits} bits, "
            f"got {len(x)}+{len(y)}")
    return 10.0 ** cat.exponent(x) * cat.mantissa(y)


_TIE_EPS = 1e-12


def encode_numeric(cat: NumericCategory, v: float) -> np.ndarray:
    """Bits of the representable value closest to ``v`` in log10 distance.

    Ties go to the smaller value.  Values outside the representable range
    clamp to the nearest end.
    """
    _check_positive(v)
    target = math.log10(v)
    best = None
    # representable sets are small (2**bits); exhaustive search is exact
    for e in range(cat.n_exponents):
        for k in range(1 << cat.mantissa_bits):
            value = cat.value_of(e, k)
            if value == v:
                return np.concatenate([uint_to_bits(e, cat.exponent_bits),
                                       uint_to_bits(k, cat.mantissa_bits)])
            dist = abs(target - math.log10(value))
            # log10 rounding can split exact ties; treat near-equal as tied
            if (best is None or dist < best[0] - _TIE_EPS
                    or (abs(dist - best[0]) <= _TIE_EPS and value < best[1])):
                best = (dist, value, e, k)
    _, _, e, k = best
    return np.concatenate([uint_to_bits(e, cat.exponent_bits),
                           uint_to_bits(k, cat.mantissa_bits)])


@dataclass(frozen=True)
class Group:
    """A labeled block of bit indices (exponent, mantissa or categorical)."""

    label: str
    category: str
    indices: tuple


@dataclass(frozen=True)
class SearchSpace:
    categories: tuple
    offsets: tuple = field(init=False)
    groups: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise EncodingError(f"duplicate category names in {names}")
        offsets, groups, pos = [], [], 0
        for cat in self.categories:
            offsets.append(pos)
            if isinstance(cat, NumericCategory):
                if cat.exponent_bits:
                    groups.append(Group(f"{cat.name}:exp", cat.name,
                                        tuple(range(pos, pos + cat.exponent_bits))))
                start = pos + cat.exponent_bits
                groups.append(Group(f"{cat.name}:man", cat.name,
                                    tuple(range(start, start + cat.mantissa_bits))))
            else:
                groups.append(Group(cat.name, cat.name, tuple(range(pos, pos + cat.bits))))
            pos += cat.bits
        object.__setattr__(self, "offsets", tuple(offsets))
        object.__setattr__(self, "groups", tuple(groups))
        covered = sorted(i for g in groups for i in g.indices)
        assert covered == list(range(pos)), "groups must partition the bit indices"

    @property
    def total_bits(self) -> int:
        return sum(c.bits for c in self.categories)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.categories]

    def category(self, name: str) -> Category:
        for cat in self.categories:
            if cat.name == name:
                return cat
        raise KeyError(name)

    def slice_of(self, name: str) -> slice:
        for cat, off in zip(self.categories, self.offsets):
            if cat.name == name:
                return slice(off, off + cat.bits)
        raise KeyError(name)

    def index_groups(self) -> list[tuple]:
        return [g.indices for g in self.groups]

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.categories]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "SearchSpace":
        return cls(tuple(category_from_dict(d) for d in items))


def category_from_dict(d: dict) -> Category:
    kind = d.get("kind")
    name = d.get("name")
    if not name:
        raise EncodingError(f"category without a name: {d!r}")
    if kind == "numeric":
        return NumericCategory(name, int(d.get("exponent_bits", 0)),
                               int(d.get("mantissa_bits", 1)), int(d["e_min"]))
    if kind == "categorical":
        return CategoricalCategory(name, tuple(d["choices"]))
    if kind == "loggrid":
        return LogGridCategory(name, int(d["bits"]), float(d["low"]), float(d["high"]))
    raise EncodingError(f"{name}: unknown category kind {kind!r}")


def decode_config(space: SearchSpace, cfg) -> dict:
    """Map a configuration to ``{category name: value or label}``."""
    cfg = _as_pm1(cfg) if len(cfg) else np.empty(0, dtype=np.int8)
    if len(cfg) != space.total_bits:
        raise EncodingError(f"config has {len(cfg)} bits, space has {space.total_bits}")
    out = {}
    for cat, off in zip(space.categories, space.offsets):
        chunk = cfg[off:off + cat.bits]
        if isinstance(cat, NumericCategory):
            out[cat.name] = decode_numeric(cat, chunk[:cat.exponent_bits],
                                           chunk[cat.exponent_bits:])
        else:
            out[cat.name] = cat.decode(chunk)
    return out


def encode_config(space: SearchSpace, assignment: dict) -> np.ndarray:
    """Encode a named assignment; numeric values snap to the nearest grid point."""
    parts = []
    for cat in space.categories:
        if cat.name not in assignment:
            raise EncodingError(f"assignment is missing {cat.name!r}")
        v = assignment[cat.name]
        if isinstance(cat, NumericCategory):
            parts.append(encode_numeric(cat, v))
        else:
            parts.append(cat.encode(v))
    if not parts:
        return np.empty(0, dtype=np.int8)
    return np.concatenate(parts).astype(np.int8)


def random_config(space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from ``{-1, +1}^n``."""
    n = space.total_bits
    return (2 * rng.integers(0, 2, size=n, dtype=np.int8) - 1).astype(np.int8)
