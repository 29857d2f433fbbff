"""Experiment reports: summary statistics, threshold checks and persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

_OPS = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def _plain(x):
    """Convert numpy scalars/arrays and complex numbers to JSON-friendly values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def config_hash(params) -> str:
    blob = json.dumps(_plain(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    op: str = "<="
    calibrated: bool = True

    @property
    def passed(self) -> bool:
        return bool(_OPS[self.op](self.value, self.threshold))

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: {self.value:.6g} {self.op} {self.threshold:.6g}"


@dataclass
class ExperimentReport:
    """Summary of one experiment run.

    ``rows`` are the raw per-seed (or per-grid-point) records written to CSV;
    ``summary`` holds medians, slopes and distances; ``checks`` compare
    summary values against declared thresholds.  Thresholds marked
    ``calibrated`` are desk-scale constants standing in for asymptotic bounds.
    """

    experiment: str
    params: dict
    seed: int | None = None
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    wall_clock: float = 0.0
    notes: list = field(default_factory=list)

    def check(self, name, value, threshold, op="<=", calibrated=True) -> Check:
        c = Check(name, float(value), float(threshold), op, calibrated)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def config_hash(self) -> str:
        return config_hash({"experiment": self.experiment, "params": self.params, "seed": self.seed})

    def verdict(self) -> str:
        n_ok = sum(c.passed for c in self.checks)
        state = "PASS" if self.passed else "FAIL"
        return f"{state} {self.experiment}: {n_ok}/{len(self.checks)} checks ({self.wall_clock:.1f}s)"

    def to_dict(self):
        return _plain({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "params": self.params,
            "summary": self.summary,
            "checks": [
                {"name": c.name, "value": c.value, "threshold": c.threshold, "op": c.op,
                 "calibrated": c.calibrated, "passed": c.passed}
                for c in self.checks
            ],
            "passed": self.passed,
            "wall_clock": self.wall_clock,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def write_csv(self, path):
        """Raw rows with a header comment carrying the config hash and seed."""
        write_rows_csv(path, self.rows, {"config_hash": self.config_hash, "seed": self.seed,
                                         "experiment": self.experiment})

    def write(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        base = os.path.join(outdir, self.experiment)
        self.write_csv(base + ".csv")
        with open(base + ".json", "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
        return base + ".csv", base + ".json"


def _cell(v):
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return v


def write_rows_csv(path, rows, header_meta=None):
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_meta is not None:
            fh.write("# " + json.dumps(_plain(header_meta), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) for k in keys])
