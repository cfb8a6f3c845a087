"""Hyperband / Successive Halving scheduling with pluggable samplers.

``run_pgsr_hb`` is Hyperband whose rung-0 configurations come from the
group-sparse spectral sampler; ``run_hyperband``, ``run_successive_halving``
and ``run_random_search`` are the baselines on the same machinery.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .pgsr import History, PgsrSampler, PgsrSettings, UniformSampler
from .space import SearchSpace, decode_config
from .store import TrialLog, TrialLogRecord, complete_prefix, read_lines

log = logging.getLogger(__name__)


class ResumeError(RuntimeError):
    pass


def max_bracket(R: int, eta: int) -> int:
    """``floor(log_eta R)`` in exact integer arithmetic."""
    s = 0
    while eta ** (s + 1) <= R:
        s += 1
    return s


@dataclass(frozen=True)
class BudgetParams:
    R: int
    eta: int = 3
    cycles: int = 1

    def __post_init__(self):
        if int(self.R) != self.R or self.R < 1:
            raise ValueError("R must be an integer >= 1")
        if int(self.eta) != self.eta or self.eta < 2:
            raise ValueError("eta must be an integer >= 2")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")

    @property
    def s_max(self) -> int:
        return max_bracket(self.R, self.eta)

    @property
    def B(self) -> int:
        return (self.s_max + 1) * self.R


@dataclass(frozen=True)
class Rung:
    n: int
    r: float


@dataclass(frozen=True)
class Bracket:
    s: int
    n: int
    r: float
    rungs: tuple

    @property
    def budget(self) -> float:
        return sum(rg.n * rg.r for rg in self.rungs)


def bracket_schedule(R: int, eta: int, s: int) -> Bracket:
    """Initial count, initial resource and every rung of bracket ``s``."""
    s_max = max_bracket(R, eta)
    if not 0 <= s <= s_max:
        raise ValueError(f"bracket s={s} outside [0, {s_max}]")
    # n = ceil((s_max + 1) * eta**s / (s + 1)), all integers
    n = -(-((s_max + 1) * eta ** s) // (s + 1))
    r = R / eta ** s
    rungs = tuple(Rung(n // eta ** i, R * eta ** i / eta ** s) for i in range(s + 1))
    return Bracket(s, n, r, rungs)


def random_search_bracket(params: BudgetParams, multiplier: float) -> Bracket:
    """All configurations at full resource, sized to ``multiplier`` HB cycles."""
    k = int(round(multiplier * (params.s_max + 1) * params.B / params.R))
    if k < 1:
        raise ValueError("random search budget rounds to zero configurations")
    return Bracket(0, k, float(params.R), (Rung(k, float(params.R)),))


@dataclass
class TrialRecord:
    config: np.ndarray
    resource: float
    loss: float
    bracket_s: int
    cycle: int
    rung: int
    sampler_tag: str
    rng_cursor: int = 0


@dataclass
class RunResult:
    algorithm: str
    best_config: Optional[np.ndarray]
    best_loss: float
    best_assignment: dict
    history: History
    records: list
    total_resource_spent: float
    max_resource: float

    def same_as(self, other: "RunResult") -> bool:
        """Bit-identical comparison of every recorded evaluation."""
        if (self.algorithm, self.best_loss, self.total_resource_spent) != (
                other.algorithm, other.best_loss, other.total_resource_spent):
            return False
        if len(self.records) != len(other.records):
            return False
        for a, b in zip(self.records, other.records):
            if not (np.array_equal(a.config, b.config) and a.loss == b.loss
                    and (a.resource, a.bracket_s, a.cycle, a.rung, a.sampler_tag,
                         a.rng_cursor) == (b.resource, b.bracket_s, b.cycle, b.rung,
                                           b.sampler_tag, b.rng_cursor)):
                return False
        return self.history == other.history


class _Run:
    """Shared state of one optimization run."""

    def __init__(self, algorithm, params, space, objective, sampler, seed,
                 parallelism=1, log_path=None, resume=False, fsync=True):
        self.algorithm = algorithm
        self.params = params
        self.space = space
        self.objective = objective
        self.sampler = sampler
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.parallelism = max(1, int(parallelism))
        self.history = History()
        self.records: list[TrialRecord] = []
        self.spent = 0.0
        self.best_at_R = math.inf
        self.replay: dict[tuple, list] = {}
        self.store = None
        if log_path is not None:
            self._open_store(Path(log_path), resume, fsync)

    def _open_store(self, path: Path, resume: bool, fsync: bool) -> None:
        if resume and path.exists():
            kept, cursor = complete_prefix(read_lines(path))
            for line, rec in kept:
                if rec.algorithm != self.algorithm:
                    raise ResumeError(f"log was written by {rec.algorithm}, "
                                      f"not {self.algorithm}")
                self.replay.setdefault(rec.rung_key, []).append(rec)
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_text("".join(line + "\n" for line, _ in kept), encoding="utf-8")
            os.replace(tmp, path)
            log.info("resuming %s after %d logged evaluations (next rung %s)",
                     path, cursor.complete_records, (cursor.cycle, cursor.bracket_s,
                                                     cursor.rung))
            self.store = TrialLog(path, fsync=fsync)
        else:
            self.store = TrialLog(path, fsync=fsync, truncate=True)

    def close(self) -> None:
        if self.store is not None:
            self.store.close()

    def _evaluate_one(self, config, resource):
        try:
            loss = float(self.objective(config, resource, self.seed))
        except Exception as exc:  # noqa: BLE001 - any objective failure is a failed trial
            log.warning("trial failed at r=%g: %s", resource, exc)
            return math.inf
        if not math.isfinite(loss):
            log.warning("trial at r=%g returned %r; treating as failed", resource, loss)
            return math.inf
        return loss

    def _losses(self, key, configs, resource, on_result):
        """Losses of one rung, from the replay log or by evaluation.

        ``on_result(k, loss)`` fires for every fresh evaluation in sample
        order, so the log grows record by record.
        """
        logged = self.replay.get(key)
        if logged is not None:
            if len(logged) != len(configs) or any(
                    not np.array_equal(np.asarray(rec.bits), cfg)
                    for rec, cfg in zip(logged, configs)):
                raise ResumeError(f"logged rung {key} does not match this run; "
                                  "was the config or seed changed?")
            return [rec.loss for rec in logged]
        losses = []
        if self.parallelism > 1 and len(configs) > 1:
            with ThreadPoolExecutor(self.parallelism) as pool:
                # map yields in submission order: the writer sees a fixed order
                for loss in pool.map(lambda c: self._evaluate_one(c, resource), configs):
                    on_result(len(losses), loss)
                    losses.append(loss)
        else:
            for cfg in configs:
                loss = self._evaluate_one(cfg, resource)
                on_result(len(losses), loss)
                losses.append(loss)
        return losses

    def sample(self, n):
        out = []
        for _ in range(n):
            cfg, tag = self.sampler.sample(self.history, self.rng)
            out.append((cfg, tag, self.sampler.draws))
        return out

    def bracket(self, bracket: Bracket, cycle: int) -> None:
        eta = self.params.eta
        R = float(self.params.R)
        T = self.sample(bracket.n)
        for i, rung in enumerate(bracket.rungs):
            key = (cycle, bracket.s, i)

            def persist(k, loss):
                if self.store is not None:
                    cfg, tag, cursor = T[k]
                    self.store.append(TrialLogRecord(
                        self.algorithm, cycle, bracket.s, i, len(T), rung.r, R,
                        [int(b) for b in cfg], decode_config(self.space, cfg), loss,
                        tag, cursor))

            losses = self._losses(key, [t[0] for t in T], rung.r, persist)
            for (cfg, tag, cursor), loss in zip(T, losses):
                self.records.append(TrialRecord(cfg, rung.r, loss, bracket.s, cycle, i,
                                                tag, cursor))
                self.spent += rung.r
                if math.isfinite(loss):
                    self.history.add(rung.r, cfg, loss)
                if rung.r == R and loss < self.best_at_R:
                    self.best_at_R = loss
            log.info("cycle=%d s=%d i=%d n_i=%d r_i=%g best=%g", cycle, bracket.s, i,
                     len(T), rung.r, self.best_at_R)
            keep = min(rung.n // eta, len(T))
            if i == len(bracket.rungs) - 1 or keep == 0:
                break
            # stable: ties keep the earlier-sampled configuration
            order = sorted(range(len(T)), key=lambda k: losses[k])
            T = [T[k] for k in order[:keep]]

    def result(self) -> RunResult:
        R = float(self.params.R)
        best, best_loss = None, math.inf
        for rec in self.records:
            if rec.resource == R and rec.loss < best_loss:
                best, best_loss = rec.config, rec.loss
        return RunResult(self.algorithm, best, best_loss,
                         decode_config(self.space, best) if best is not None else {},
                         self.history, self.records, self.spent, R)


def _execute(algorithm, params, space, objective, sampler, seed, brackets, **kw) -> RunResult:
    run = _Run(algorithm, params, space, objective, sampler, seed, **kw)
    try:
        for cycle, bracket in brackets:
            run.bracket(bracket, cycle)
    finally:
        run.close()
    return run.result()


def _hb_brackets(params: BudgetParams):
    for cycle in range(params.cycles):
        for s in range(params.s_max, -1, -1):
            yield cycle, bracket_schedule(params.R, params.eta, s)


def run_pgsr_hb(params: BudgetParams, space: SearchSpace, objective: Callable,
                pgsr_settings: PgsrSettings, seed: int = 0, solver=None,
                **kw) -> RunResult:
    sampler = PgsrSampler(space, pgsr_settings, solver)
    return _execute("pgsr-hb", params, space, objective, sampler, seed,
                    _hb_brackets(params), **kw)


def run_hyperband(params: BudgetParams, space: SearchSpace, objective: Callable,
                  seed: int = 0, **kw) -> RunResult:
    return _execute("hyperband", params, space, objective, UniformSampler(space), seed,
                    _hb_brackets(params), **kw)


def run_successive_halving(params: BudgetParams, space: SearchSpace, objective: Callable,
                           seed: int = 0, s: int | None = None, **kw) -> RunResult:
    """``cycles * (s_max + 1)`` brackets at a fixed ``s`` (default ``s_max``)."""
    s = params.s_max if s is None else s
    bracket = bracket_schedule(params.R, params.eta, s)
    runs = params.cycles * (params.s_max + 1)
    return _execute("sh", params, space, objective, UniformSampler(space), seed,
                    ((k, bracket) for k in range(runs)), **kw)


def run_random_search(params: BudgetParams, space: SearchSpace, objective: Callable,
                      seed: int = 0, multiplier: float = 2.0, **kw) -> RunResult:
    """Full-resource random search with ``multiplier`` times the HB budget."""
    bracket = random_search_bracket(params, multiplier)
    return _execute("random-search", params, space, objective, UniformSampler(space), seed,
                    ((c, bracket) for c in range(params.cycles)), **kw)


def schedule_budget(algorithm: str, params: BudgetParams, s: int | None = None,
                    multiplier: float = 2.0) -> float:
    """Resource implied by the schedule alone, for budget accounting."""
    if algorithm in ("hyperband", "pgsr-hb"):
        return params.cycles * sum(bracket_schedule(params.R, params.eta, k).budget
                                   for k in range(params.s_max + 1))
    if algorithm == "sh":
        s = params.s_max if s is None else s
        return (params.cycles * (params.s_max + 1)
                * bracket_schedule(params.R, params.eta, s).budget)
    if algorithm == "random-search":
        return params.cycles * random_search_bracket(params, multiplier).budget
    raise ValueError(f"unknown algorithm {algorithm!r}")
