"""Guidance comparison tables, loss-surface grids and run summaries."""
from __future__ import annotations

import csv
import math
import statistics
from pathlib import Path

import numpy as np

from .pgsr import GuidanceError, History, PgsrSettings, fit_guidance, select_history
from .space import (LogGridCategory, NumericCategory, SearchSpace, decode_config,
                    encode_config)
from .store import load_records

METHODS = ("PGSR", "PSR", "PSR-loggrid")


def loggrid_space(space: SearchSpace) -> SearchSpace:
    """Same ranges and bit counts, but evenly log-spaced single-block numerics."""
    cats = []
    for cat in space.categories:
        if isinstance(cat, NumericCategory):
            cats.append(LogGridCategory(cat.name, cat.bits, cat.min_value, cat.max_value))
        else:
            cats.append(cat)
    return SearchSpace(tuple(cats))


def compare_guidance(X, y, space: SearchSpace, settings: PgsrSettings, lambdas,
                     source_resource=None) -> list:
    """Guidance for every (method, lambda) pair on one set of observations.

    ``PSR-loggrid`` re-encodes each observation's decoded values on the
    log-spaced grid before fitting.
    """
    grid = loggrid_space(space)
    Xg = np.array([encode_config(grid, decode_config(space, x)) for x in X])
    rows = []
    for method in METHODS:
        for lam in lambdas:
            st = PgsrSettings(settings.sparsity, settings.degree,
                              settings.min_observations, settings.reset_prob, float(lam))
            if method == "PGSR":
                g = fit_guidance(X, y, space, st, "pgsr", source_resource=source_resource)
            elif method == "PSR":
                g = fit_guidance(X, y, space, st, "psr", source_resource=source_resource)
            else:
                g = fit_guidance(Xg, y, grid, st, "psr", source_resource=source_resource)
            rows.append((method, float(lam), g))
    return rows


def guidance_from_log(path, space: SearchSpace, settings: PgsrSettings, lambdas):
    """Run :func:`compare_guidance` on the richest qualifying history level."""
    h = History()
    for rec in load_records(path):
        if math.isfinite(rec.loss):
            h.add(rec.resource, rec.bits, rec.loss)
    picked = select_history(h, settings.min_observations)
    if picked is None:
        raise GuidanceError(
            f"no resource level has {settings.min_observations} finite records")
    r, X, y = picked
    return r, compare_guidance(X, y, space, settings, lambdas, r)


def _fmt_range(rng: dict) -> str:
    if "choices" in rng:
        return "{" + ",".join(str(c) for c in rng["choices"]) + "}"
    return f"[{rng['low']:.3g}, {rng['high']:.3g}]"


def format_guidance_table(rows, space: SearchSpace) -> str:
    names = space.names
    header = ["method", "lambda"] + names
    body = [[m, f"{lam:g}"] + [_fmt_range(g.reduced_ranges[n]) for n in names]
            for m, lam, g in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
             for r in [header] + body]
    return "\n".join(lines)


def grid_axis(cat, n: int) -> np.ndarray:
    """``n`` log10 exponents spanning a numeric category's range."""
    lo, hi = math.log10(cat.min_value), math.log10(cat.max_value)
    if n == 1:
        return np.array([(lo + hi) / 2])
    return np.linspace(lo, hi, n)


def loss_surface(objective, space: SearchSpace, x_name: str, y_name: str, nx: int,
                 ny: int, resource: float, fixed: dict | None = None,
                 trial_seed: int = 0) -> list[tuple]:
    """``(x_exponent, y_exponent, loss)`` over a log-spaced grid.

    Grid points snap to the nearest representable value; other categories
    take ``fixed`` values or the all-minus-one pattern.
    """
    xc, yc = space.category(x_name), space.category(y_name)
    for cat in (xc, yc):
        if not isinstance(cat, NumericCategory):
            raise ValueError(f"{cat.name} is not a numeric category")
    if x_name == y_name:
        raise ValueError("surface needs two distinct categories")
    base = decode_config(space, -np.ones(space.total_bits, dtype=np.int8))
    base.update(fixed or {})
    out = []
    for ex in grid_axis(xc, nx):
        for ey in grid_axis(yc, ny):
            a = dict(base, **{x_name: 10.0 ** ex, y_name: 10.0 ** ey})
            out.append((float(ex), float(ey),
                        float(objective(encode_config(space, a), resource, trial_seed))))
    return out


def write_surface(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x_exponent", "y_exponent", "loss"])
        for ex, ey, loss in rows:
            w.writerow([repr(ex), repr(ey), repr(loss)])


def summarize(records) -> dict:
    """Best full-resource loss, budget spent and per-bracket bests of one run."""
    records = list(records)
    if not records:
        return {"algorithm": None, "records": 0, "best_loss": math.inf,
                "budget_spent": 0.0, "brackets": {}}
    R = max(rec.max_resource for rec in records)
    best = min((rec for rec in records if rec.resource == R),
               key=lambda rec: rec.loss, default=None)
    brackets: dict[tuple, float] = {}
    for rec in records:
        if rec.resource == R:
            key = (rec.cycle, rec.bracket_s)
            brackets[key] = min(brackets.get(key, math.inf), rec.loss)
    return {"algorithm": records[0].algorithm, "records": len(records),
            "best_loss": best.loss if best else math.inf,
            "best_assignment": best.assignment if best else {},
            "budget_spent": float(sum(rec.resource for rec in records)),
            "brackets": brackets}


def aggregate(summaries: list[dict]) -> dict:
    """Per-algorithm ``(runs, min, median)`` of best losses."""
    by_alg: dict[str, list] = {}
    for s in summaries:
        by_alg.setdefault(s["algorithm"], []).append(s["best_loss"])
    return {alg: {"runs": len(v), "min": min(v), "median": statistics.median(v)}
            for alg, v in sorted(by_alg.items())}


def log_files(path) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        return sorted(p.glob("*.jsonl"))
    return [p]
