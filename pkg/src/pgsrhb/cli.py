"""``pgsrhb`` command line: run, resume, guidance, surface and report.

Exit status: 0 success, 1 objective/system/log failure, 2 invalid config or
arguments, 3 not enough history for guidance.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .pgsr import GuidanceError
from .report import (aggregate, format_guidance_table, guidance_from_log, log_files,
                     loss_surface, summarize, write_surface)
from .scheduler import (ResumeError, run_hyperband, run_pgsr_hb, run_random_search,
                        run_successive_halving)
from .space import EncodingError
from .store import LogError, export_csv, load_records

LOG_DIR_ENV = "PGSRHB_LOG_DIR"

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NO_HISTORY = 3


def resolve_log_path(path) -> Path:
    """Relative log paths live under ``$PGSRHB_LOG_DIR`` when it is set."""
    p = Path(path)
    base = os.environ.get(LOG_DIR_ENV)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def execute(cfg: ExperimentConfig, log_path, resume: bool = False):
    """Run the configured algorithm; returns its RunResult."""
    space = cfg.search_space()
    objective = cfg.make_objective()
    params = cfg.budget.params()
    kw = dict(seed=cfg.seed, parallelism=cfg.parallelism, log_path=log_path, resume=resume)
    if cfg.algorithm == "pgsr-hb":
        return run_pgsr_hb(params, space, objective, cfg.pgsr.settings(), **kw)
    if cfg.algorithm == "hyperband":
        return run_hyperband(params, space, objective, **kw)
    if cfg.algorithm == "sh":
        return run_successive_halving(params, space, objective, s=cfg.budget.sh_s, **kw)
    return run_random_search(params, space, objective,
                             multiplier=cfg.budget.rs_multiplier, **kw)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "parallelism", None) is not None:
        if args.parallelism < 1:
            raise ConfigError("--parallelism must be >= 1")
        cfg.parallelism = args.parallelism
    if getattr(args, "log", None) is not None:
        cfg.log = args.log
    return cfg


def _print_result(res, log_path) -> None:
    print(f"algorithm: {res.algorithm}")
    print(f"best loss at r={res.max_resource:g}: {res.best_loss!r}")
    for k, v in res.best_assignment.items():
        print(f"  {k} = {v!r}")
    print(f"resource spent: {res.total_resource_spent:g}")
    print(f"evaluations: {len(res.records)}")
    print(f"trial log: {log_path}")


def cmd_run(args) -> int:
    cfg = _load(args)
    log_path = resolve_log_path(cfg.log)
    resume = bool(getattr(args, "resume", False))
    if (not resume and not args.overwrite and log_path.exists()
            and log_path.stat().st_size > 0):
        print(f"error: {log_path} exists; pass --resume to continue it or "
              "--overwrite to replace it", file=sys.stderr)
        return EXIT_FAILURE
    res = execute(cfg, log_path, resume=resume)
    _print_result(res, log_path)
    return 0


def cmd_resume(args) -> int:
    args.resume = True
    args.overwrite = False
    return cmd_run(args)


def cmd_guidance(args) -> int:
    cfg = _load(args)
    log_path = resolve_log_path(cfg.log)
    space = cfg.search_space()
    lambdas = args.lam or cfg.pgsr.lambdas
    if not log_path.exists():
        print(f"error: no trial log at {log_path}", file=sys.stderr)
        return EXIT_NO_HISTORY
    try:
        r, rows = guidance_from_log(log_path, space, cfg.pgsr.settings(), lambdas)
    except GuidanceError as exc:
        print(f"error: insufficient history: {exc}", file=sys.stderr)
        return EXIT_NO_HISTORY
    print(f"guidance from {cfg.pgsr.min_observations}+ observations at r={r:g}")
    print(format_guidance_table(rows, space))
    if args.json:
        out = [{"method": m, "lambda": lam, "guidance": g.to_dict()} for m, lam, g in rows]
        Path(args.json).write_text(json.dumps(out, indent=2), encoding="utf-8")
    return 0


def _parse_fixed(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--fix expects name=value, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            out[name] = value
    return out


def cmd_surface(args) -> int:
    cfg = _load(args)
    space = cfg.search_space()
    objective = cfg.make_objective()
    x, y = args.pair
    try:
        rows = loss_surface(objective, space, x, y, args.nx, args.ny,
                            args.resource or float(cfg.budget.R),
                            _parse_fixed(args.fix), cfg.seed)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_surface(rows, args.out)
    best = min(rows, key=lambda t: t[2])
    print(f"wrote {len(rows)} cells to {args.out}; "
          f"minimum {best[2]:.6g} at ({best[0]:.4g}, {best[1]:.4g})")
    return 0


def cmd_report(args) -> int:
    files = log_files(resolve_log_path(args.log))
    if not files or not all(f.exists() for f in files):
        print(f"error: no trial logs at {args.log}", file=sys.stderr)
        return EXIT_FAILURE
    summaries = []
    for f in files:
        records = load_records(f)
        s = summarize(records)
        summaries.append(s)
        print(f"{f}: {s['algorithm']}, {s['records']} evaluations, "
              f"resource spent {s['budget_spent']:g}, best loss {s['best_loss']!r}")
        for (cycle, b), loss in sorted(s["brackets"].items()):
            print(f"  cycle {cycle} bracket s={b}: best {loss!r}")
        if args.csv:
            out = Path(args.csv)
            if len(files) > 1:
                out.mkdir(parents=True, exist_ok=True)
                out = out / (f.stem + ".csv")
            export_csv(records, out)
    if len(files) > 1:
        print("algorithm      runs  min           median")
        for alg, row in aggregate(summaries).items():
            print(f"{alg:<14} {row['runs']:<5} {row['min']:<13.6g} {row['median']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pgsrhb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every rung")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, log=True):
        sp.add_argument("--config", required=True, help="experiment YAML file")
        sp.add_argument("--seed", type=int)
        if log:
            sp.add_argument("--log", help="trial log path (overrides the config)")

    run = sub.add_parser("run", help="run the configured algorithm")
    common(run)
    run.add_argument("--parallelism", type=int)
    run.add_argument("--resume", action="store_true",
                     help="continue from the complete rungs of an existing log")
    run.add_argument("--overwrite", action="store_true",
                     help="replace an existing log instead of refusing")
    run.set_defaults(func=cmd_run)

    res = sub.add_parser("resume", help="same as run --resume")
    common(res)
    res.add_argument("--parallelism", type=int)
    res.set_defaults(func=cmd_resume)

    g = sub.add_parser("guidance", help="PGSR / PSR guidance table from a trial log")
    common(g)
    g.add_argument("--lam", type=float, action="append",
                   help="penalty level (repeatable; default: config lambdas)")
    g.add_argument("--json", help="also write the full guidance records here")
    g.set_defaults(func=cmd_guidance)

    s = sub.add_parser("surface", help="loss over a log-spaced grid of two categories")
    common(s, log=False)
    s.add_argument("--pair", nargs=2, required=True, metavar=("X", "Y"))
    s.add_argument("--nx", type=int, default=8)
    s.add_argument("--ny", type=int, default=8)
    s.add_argument("--resource", type=float, help="default: the config's R")
    s.add_argument("--fix", action="append", metavar="NAME=VALUE")
    s.add_argument("--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_surface)

    rp = sub.add_parser("report", help="summarize a trial log or a directory of logs")
    rp.add_argument("--log", required=True)
    rp.add_argument("--csv", help="CSV export path (a directory for several logs)")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "nx", 1) < 1 or getattr(args, "ny", 1) < 1:
        print("error: grid resolution must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, EncodingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if getattr(exc, "filename", None) == getattr(
            args, "config", None) else EXIT_FAILURE
    except (LogError, ResumeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
