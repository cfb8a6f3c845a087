"""Experiment configuration files (YAML).

Example::

    seed: 0
    algorithm: pgsr-hb          # pgsr-hb | hyperband | sh | random-search
    log: runs/pgsr.jsonl
    space:
      - {name: lr, kind: numeric, e_min: -6, exponent_bits: 3, mantissa_bits: 2}
      - {name: opt, kind: categorical, choices: [sgd, adam]}
    objective: {kind: loglinear-2d, lr: lr, penalty: l2, noise: 0.1}
    budget: {R: 81, eta: 3, cycles: 2, rs_multiplier: 2}
    pgsr: {sparsity: 10, degree: 2, min_observations: 50, reset_prob: 0.2,
           lam: 1.0, lambdas: [0.5, 1.0, 2.0]}
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .objectives import make_objective
from .pgsr import PgsrSettings
from .scheduler import BudgetParams
from .space import EncodingError, SearchSpace

ALGORITHMS = ("pgsr-hb", "hyperband", "sh", "random-search")


class ConfigError(ValueError):
    pass


@dataclass
class BudgetConfig:
    R: int = 81
    eta: int = 3
    cycles: int = 1
    rs_multiplier: float = 2.0
    sh_s: Optional[int] = None

    def params(self) -> BudgetParams:
        return BudgetParams(self.R, self.eta, self.cycles)


@dataclass
class PgsrConfig:
    sparsity: int = 5
    degree: int = 2
    min_observations: int = 50
    reset_prob: float = 0.2
    lam: float = 1.0
    lambdas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])

    def settings(self, lam: float | None = None) -> PgsrSettings:
        return PgsrSettings(self.sparsity, self.degree, self.min_observations,
                            self.reset_prob, self.lam if lam is None else lam)


@dataclass
class ExperimentConfig:
    space: list
    objective: dict
    algorithm: str = "pgsr-hb"
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    pgsr: PgsrConfig = field(default_factory=PgsrConfig)
    seed: int = 0
    parallelism: int = 1
    log: str = "trials.jsonl"

    def search_space(self) -> SearchSpace:
        return SearchSpace.from_list(self.space)

    def make_objective(self):
        return make_objective(self.objective, self.search_space())

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("space", "objective"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        try:
            cfg = cls(space=list(d["space"]), objective=dict(d["objective"]),
                      algorithm=d.get("algorithm", "pgsr-hb"),
                      budget=BudgetConfig(**(d.get("budget") or {})),
                      pgsr=PgsrConfig(**(d.get("pgsr") or {})),
                      seed=int(d.get("seed", 0)),
                      parallelism=int(d.get("parallelism", 1)),
                      log=str(d.get("log", "trials.jsonl")))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; "
                              f"expected one of {', '.join(ALGORITHMS)}")
        try:
            space = self.search_space()
            make_objective(self.objective, space)
            params = self.budget.params()
            self.pgsr.settings()
            for lam in self.pgsr.lambdas:
                self.pgsr.settings(float(lam))
        except (EncodingError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        if self.budget.sh_s is not None and not 0 <= self.budget.sh_s <= params.s_max:
            raise ConfigError(f"sh_s must lie in [0, {params.s_max}]")
        if self.budget.rs_multiplier <= 0:
            raise ConfigError("rs_multiplier must be positive")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
