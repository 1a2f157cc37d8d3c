"""JSON-lines and CSV output with a self-describing header and hard-assertion bookkeeping."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(record) -> str:
    return json.dumps(_clean(record), sort_keys=True, separators=(",", ":"))


class Report:
    """Collects records for one subcommand run and writes them as JSON-lines.

    The header line carries the merged configuration (defaults included) and the only
    run-dependent field, the timestamp.
    """

    def __init__(self, out_dir, name, config, timestamp=None):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.name = name
        self.records = []
        self.failures = []
        ts = timestamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        self.header = {"record": "header", "subcommand": name, "version": __version__, "timestamp": ts,
                       "config": config}
        self.files = []

    def add(self, record: dict):
        self.records.append(dict(record))
        return record

    def hard(self, inequality: str, holds: bool, **data):
        """Record a hard assertion; a failure makes the run exit nonzero."""
        rec = {"record": "assertion", "assertion": inequality, "holds": bool(holds), **data}
        self.records.append(rec)
        if not holds:
            self.failures.append(inequality)
        return bool(holds)

    def csv(self, filename, header, rows):
        path = self.out / filename
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        self.files.append(path.name)
        return path

    @property
    def ok(self):
        return not self.failures

    def write(self):
        path = self.out / f"{self.name}.jsonl"
        summary = {"record": "summary", "n_records": len(self.records), "hard_failures": sorted(set(self.failures)),
                   "n_hard": sum(1 for r in self.records if r.get("record") == "assertion"),
                   "files": sorted(self.files), "exit_status": 0 if self.ok else 1}
        with open(path, "w") as fh:
            for rec in [self.header] + self.records + [summary]:
                fh.write(dumps(rec) + "\n")
        return path


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def strip_timestamp(text: str) -> str:
    """Drop the header timestamp so two runs can be compared byte for byte."""
    lines = text.splitlines(keepends=True)
    if lines:
        head = json.loads(lines[0])
        head.pop("timestamp", None)
        lines[0] = json.dumps(head, sort_keys=True, separators=(",", ":")) + "\n"
    return "".join(lines)
