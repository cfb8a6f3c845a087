"""Append-only JSON-lines trial log with rung-granular resume."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .pgsr import History

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class LogError(RuntimeError):
    pass


@dataclass
class TrialLogRecord:
    algorithm: str
    cycle: int
    bracket_s: int
    rung: int
    rung_size: int
    resource: float
    max_resource: float
    bits: list
    assignment: dict
    loss: float
    sampler_tag: str
    rng_cursor: int
    timestamp: float = field(default_factory=time.time)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        d = asdict(self)
        # +inf marks a failed trial; JSON has no infinity
        d["loss"] = self.loss if math.isfinite(self.loss) else None
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialLogRecord":
        d = json.loads(line)
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise LogError(f"schema version {version!r} is not {SCHEMA_VERSION}")
        d["loss"] = math.inf if d["loss"] is None else float(d["loss"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise LogError(f"malformed record: {exc}") from None

    @property
    def rung_key(self) -> tuple:
        return (self.cycle, self.bracket_s, self.rung)


class TrialLog:
    """Single-writer append-only log; every record is flushed before returning."""

    def __init__(self, path, fsync: bool = True, truncate: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._fh = open(self.path, "w" if truncate else "a", encoding="utf-8")

    def append(self, record: TrialLogRecord) -> None:
        if self._fh is None:
            raise LogError("append to a closed trial log")
        self._fh.write(record.to_json() + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @property
    def closed(self) -> bool:
        return self._fh is None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_lines(path) -> list[tuple[str, TrialLogRecord]]:
    """Parse every line; a torn final line is dropped with a warning."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    raw = text.split("\n")
    # a complete log ends with "\n", leaving an empty tail element
    tail = raw.pop()
    out = []
    for i, line in enumerate(raw):
        if not line.strip():
            continue
        try:
            out.append((line, TrialLogRecord.from_json(line)))
        except json.JSONDecodeError:
            if i == len(raw) - 1 and not tail:
                log.warning("dropping unparseable final line of %s", path)
                continue
            raise LogError(f"{path}:{i + 1}: unparseable record") from None
    if tail.strip():
        log.warning("dropping torn final line of %s", path)
    return out


def load_records(path) -> list[TrialLogRecord]:
    return [rec for _, rec in read_lines(path)]


@dataclass(frozen=True)
class ResumeCursor:
    """Position of the first rung that is not fully in the log."""

    cycle: int = 0
    bracket_s: Optional[int] = None
    rung: int = 0
    complete_records: int = 0


def complete_prefix(entries: list) -> tuple[list, ResumeCursor]:
    """Longest prefix of ``(line, record)`` pairs made of whole rungs."""
    kept, i = [], 0
    cursor = ResumeCursor()
    while i < len(entries):
        key = entries[i][1].rung_key
        size = entries[i][1].rung_size
        j = i
        while j < len(entries) and entries[j][1].rung_key == key:
            j += 1
        if j - i != size:
            cycle, s, rung = key
            return kept, ResumeCursor(cycle, s, rung, len(kept))
        kept.extend(entries[i:j])
        cycle, s, rung = key
        cursor = ResumeCursor(cycle, s, rung + 1, len(kept))
        i = j
    return kept, cursor


def history_from(records) -> History:
    h = History()
    for rec in records:
        if math.isfinite(rec.loss):
            h.add(rec.resource, rec.bits, rec.loss)
    return h


def load_history(path) -> tuple[History, ResumeCursor]:
    """History from the complete rungs of a log, and where to resume."""
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return History(), ResumeCursor()
    kept, cursor = complete_prefix(read_lines(path))
    return history_from(rec for _, rec in kept), cursor


CSV_FIELDS = ["schema_version", "algorithm", "cycle", "bracket_s", "rung", "rung_size",
              "resource", "max_resource", "loss", "sampler_tag", "rng_cursor",
              "timestamp", "bits"]


def export_csv(records, path) -> None:
    """Flat CSV, one row per record; decoded hyperparameters become columns."""
    records = list(records)
    hp_names = []
    for rec in records:
        for k in rec.assignment:
            if k not in hp_names:
                hp_names.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS + [f"hp.{k}" for k in hp_names])
        for rec in records:
            d = asdict(rec)
            row = [d[k] for k in CSV_FIELDS[:-1]]
            row.append(" ".join(str(b) for b in rec.bits))
            row += [rec.assignment.get(k, "") for k in hp_names]
            w.writerow(row)
