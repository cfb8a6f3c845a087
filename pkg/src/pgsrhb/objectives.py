"""Objective functions ``f(config, resource) -> loss``.

Noise is a deterministic function of ``(config, resource, seed, trial_seed)``
so that runs replay exactly without storing draws.
"""
from __future__ import annotations

import hashlib
import math
import os
import re
import subprocess
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fourier import Surrogate, eval_surrogate
from .space import NumericCategory, SearchSpace, decode_config


class ObjectiveError(RuntimeError):
    """The objective could not produce a loss for this trial."""


def keyed_normal(config, resource: float, seed: int, trial_seed: int = 0) -> float:
    """A standard normal draw keyed by its arguments."""
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(config, dtype=np.int8).tobytes())
    h.update(repr((float(resource), int(seed), int(trial_seed))).encode())
    key = int.from_bytes(h.digest(), "little")
    return float(np.random.default_rng(key).standard_normal())


class Objective:
    kind = "abstract"

    def __call__(self, config, resource: float, trial_seed: int = 0) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class SyntheticSparse(Objective):
    """Sparse Fourier polynomial plus ``noise / sqrt(r)`` Gaussian noise."""

    n: int
    true_terms: list
    noise: float = 0.0
    seed: int = 0

    kind = "synthetic-sparse"

    def __post_init__(self):
        self.true_terms = [(tuple(sorted(S)), float(c)) for S, c in self.true_terms]
        if self.noise < 0:
            raise ValueError("noise scale must be >= 0")
        self._poly = Surrogate(tuple(self.true_terms), 0.0)

    def __call__(self, config, resource, trial_seed=0):
        config = np.asarray(config)
        if len(config) != self.n:
            raise ObjectiveError(f"config has {len(config)} bits, objective expects {self.n}")
        if resource < 1:
            raise ObjectiveError("resource must be >= 1")
        loss = eval_surrogate(self._poly, config)
        if self.noise:
            loss += self.noise / math.sqrt(resource) * keyed_normal(
                config, resource, self.seed, trial_seed)
        return loss

    @property
    def optimum(self) -> float:
        """Noise-free minimum, by enumeration over the variables in use."""
        from .pgsr import minimize_on
        J = sorted({i for S, _ in self.true_terms for i in S})
        return minimize_on(self._poly, J)[1]

    def to_dict(self):
        return {"kind": self.kind, "noise": self.noise, "seed": self.seed,
                "terms": [{"indices": list(S), "coef": c} for S, c in self.true_terms]}


def known_support(obj: Objective) -> list[tuple]:
    if not isinstance(obj, SyntheticSparse):
        raise TypeError(f"known support needs a synthetic-sparse objective, got {obj.kind}")
    return [S for S, _ in obj.true_terms]


def random_sparse(n: int, n_terms: int, max_degree: int, seed: int,
                  coef_range: tuple = (1.0, 3.0), noise: float = 0.0) -> SyntheticSparse:
    """Planted polynomial with ``n_terms`` distinct supports of degree <= max_degree."""
    if n_terms > sum(math.comb(n, k) for k in range(1, max_degree + 1)):
        raise ValueError("more terms requested than basis functions exist")
    rng = np.random.default_rng(seed)
    terms, seen = [], set()
    while len(terms) < n_terms:
        k = int(rng.integers(1, max_degree + 1))
        S = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
        if S in seen:
            continue
        seen.add(S)
        c = float(rng.uniform(*coef_range)) * (1 if rng.random() < 0.5 else -1)
        terms.append((S, c))
    return SyntheticSparse(n, terms, noise, seed)


@dataclass
class LogLinear2D(Objective):
    """Quadratic bowl in ``(log10 a, log10 b)`` for two numeric categories."""

    space: SearchSpace
    lr: str
    penalty: str
    center: tuple = (-2.5, -4.5)
    widths: tuple = (1.0, 1.0)
    base_loss: float = 0.5
    noise: float = 0.0
    seed: int = 0

    kind = "loglinear-2d"

    def __post_init__(self):
        for name in (self.lr, self.penalty):
            if not isinstance(self.space.category(name), NumericCategory):
                raise ValueError(f"{name} must be a numeric category")
        self.center = tuple(float(c) for c in self.center)
        self.widths = tuple(float(w) for w in self.widths)

    def value(self, a: float, b: float) -> float:
        da = (math.log10(a) - self.center[0]) / self.widths[0]
        db = (math.log10(b) - self.center[1]) / self.widths[1]
        return self.base_loss + da * da + db * db

    def __call__(self, config, resource, trial_seed=0):
        if resource < 1:
            raise ObjectiveError("resource must be >= 1")
        hp = decode_config(self.space, config)
        loss = self.value(hp[self.lr], hp[self.penalty])
        if self.noise:
            loss += self.noise / math.sqrt(resource) * keyed_normal(
                config, resource, self.seed, trial_seed)
        return loss

    def to_dict(self):
        return {"kind": self.kind, "lr": self.lr, "penalty": self.penalty,
                "center": list(self.center), "widths": list(self.widths),
                "base_loss": self.base_loss, "noise": self.noise, "seed": self.seed}


_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_loss(output: str) -> float:
    """Last whitespace token of the last non-empty output line, as a number."""
    lines = [ln for ln in output.splitlines() if ln.strip()]
    if not lines:
        raise ObjectiveError("command produced no output")
    token = lines[-1].split()[-1]
    if not _NUMBER.match(token):
        raise ObjectiveError(f"cannot parse a loss from {lines[-1]!r}")
    return float(token)


@dataclass
class ExternalCommand(Objective):
    """Runs ``command name=value ... resource=r`` and parses its final line.

    The trial seed is exported as ``PGSRHB_TRIAL_SEED``.
    """

    space: SearchSpace
    command: Sequence[str]
    timeout: float | None = None
    seed: int = 0
    env: dict = field(default_factory=dict)

    kind = "external-command"

    def arguments(self, config, resource) -> list[str]:
        hp = decode_config(self.space, config)
        args = [f"{k}={_fmt(v)}" for k, v in hp.items()]
        return list(self.command) + args + [f"resource={_fmt(resource)}"]

    def __call__(self, config, resource, trial_seed=0):
        env = dict(os.environ, **{k: str(v) for k, v in self.env.items()})
        env["PGSRHB_TRIAL_SEED"] = str(trial_seed)
        try:
            proc = subprocess.run(self.arguments(config, resource), capture_output=True,
                                  text=True, timeout=self.timeout, env=env)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ObjectiveError(str(exc)) from exc
        if proc.returncode != 0:
            raise ObjectiveError(f"command exited with status {proc.returncode}: "
                                 f"{proc.stderr.strip()[-200:]}")
        return parse_loss(proc.stdout)

    def to_dict(self):
        d = {"kind": self.kind, "command": list(self.command), "seed": self.seed}
        if self.timeout is not None:
            d["timeout"] = self.timeout
        if self.env:
            d["env"] = dict(self.env)
        return d


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_objective(spec: dict, space: SearchSpace) -> Objective:
    kind = spec.get("kind")
    seed = int(spec.get("seed", 0))
    if kind == "synthetic-sparse":
        noise = float(spec.get("noise", 0.0))
        if "terms" in spec:
            terms = [(tuple(t["indices"]), float(t["coef"])) for t in spec["terms"]]
            obj = SyntheticSparse(space.total_bits, terms, noise, seed)
        else:
            gen = spec.get("generate", {})
            obj = random_sparse(space.total_bits, int(gen.get("n_terms", 5)),
                                int(gen.get("max_degree", 2)), seed,
                                tuple(gen.get("coef_range", (1.0, 3.0))), noise)
        for S in known_support(obj):
            if any(i >= space.total_bits for i in S):
                raise ValueError(f"term {S} exceeds the {space.total_bits}-bit space")
        return obj
    if kind == "loglinear-2d":
        return LogLinear2D(space, spec["lr"], spec["penalty"],
                           tuple(spec.get("center", (-2.5, -4.5))),
                           tuple(spec.get("widths", (1.0, 1.0))),
                           float(spec.get("base_loss", 0.5)),
                           float(spec.get("noise", 0.0)), seed)
    if kind == "external-command":
        cmd = spec["command"]
        if isinstance(cmd, str):
            cmd = cmd.split()
        return ExternalCommand(space, list(cmd), spec.get("timeout"), seed,
                               dict(spec.get("env", {})))
    raise ValueError(f"unknown objective kind {kind!r}")
