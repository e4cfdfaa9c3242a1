"""Output writers: JSON-lines reports, CSV tables, a text summary and a
separate metadata file that holds everything non-deterministic.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import plotting

SCHEMA_VERSION = "1.0"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, repr-exact floats, non-finite values as strings."""
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


@dataclass
class Table:
    name: str
    header: list
    rows: list
    plot: str = ""       # plotting kind, empty for none
    title: str = ""


@dataclass
class Outcome:
    """Result of one task or suite row."""

    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)     # dicts from VerificationReport.to_dict
    tables: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        verdicts: dict = {}
        for r in self.reports:
            verdicts[r["verdict"]] = verdicts.get(r["verdict"], 0) + 1
        return {"name": self.name, "passed": self.passed, "values": self.values,
                "verdicts": verdicts, "notes": self.notes}


def write_csv(table: Table, directory: Path) -> Path:
    path = directory / f"{table.name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


class OutputWriter:
    """Lays out <root>/report.jsonl, summary.json, summary.txt, metadata.json, data/, figures/."""

    def __init__(self, root, plots: bool = True):
        self.root = Path(root)
        self.plots = plots
        self.data_dir = self.root / "data"
        self.fig_dir = self.root / "figures"
        self.started = time.time()
        self.timings: dict = {}

    def write(self, task: str, config: dict, outcomes: list) -> dict:
        self.root.mkdir(parents=True, exist_ok=True)
        self.data_dir.mkdir(exist_ok=True)
        artifacts = []
        index = {}
        for oc in outcomes:
            for t in oc.tables:
                csv_path = write_csv(t, self.data_dir)
                artifacts.append(str(csv_path.relative_to(self.root)))
                if t.plot:
                    index[csv_path.name] = {"kind": t.plot, "title": t.title}
                if self.plots and t.plot:
                    svg = plotting.render(t.plot, csv_path, self.fig_dir / f"{t.name}.svg", t.title)
                    artifacts.append(str(Path(svg).relative_to(self.root)))
        (self.data_dir / "plots.json").write_text(dumps(index) + "\n")
        with open(self.root / "report.jsonl", "w") as fh:
            for oc in outcomes:
                for r in oc.reports:
                    fh.write(dumps({"task": oc.name, **r}) + "\n")
        summary = {"schema_version": SCHEMA_VERSION, "task": task, "config": config,
                   "passed": all(oc.passed for oc in outcomes),
                   "outcomes": [oc.summary() for oc in outcomes], "artifacts": sorted(artifacts)}
        (self.root / "summary.json").write_text(dumps(summary) + "\n")
        (self.root / "summary.txt").write_text(summary_table(outcomes, self.timings))
        meta = {"schema_version": SCHEMA_VERSION, "version": __version__,
                "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(self.started)),
                "wall_seconds": time.time() - self.started, "timings": self.timings,
                "python": platform.python_version(), "numpy": np.__version__}
        (self.root / "metadata.json").write_text(json.dumps(_clean(meta), sort_keys=True, indent=1) + "\n")
        return summary


def summary_table(outcomes: list, timings: dict = None) -> str:
    timings = timings or {}
    lines = [f"{'row':<28} {'result':<6} {'reports':>7} {'seconds':>8}  notes"]
    for oc in outcomes:
        sec = timings.get(oc.name)
        sec_s = f"{sec:8.1f}" if sec is not None else " " * 8
        note = "; ".join(oc.notes)[:80]
        lines.append(f"{oc.name:<28} {'PASS' if oc.passed else 'FAIL':<6} {len(oc.reports):>7} {sec_s}  {note}")
    return "\n".join(lines) + "\n"


def rerender(root) -> list:
    """Rebuild every figure under <root>/figures from <root>/data alone."""
    root = Path(root)
    index = json.loads((root / "data" / "plots.json").read_text())
    out = []
    for name in sorted(index):
        spec = index[name]
        out.append(plotting.render(spec["kind"], root / "data" / name,
                                   root / "figures" / (Path(name).stem + ".svg"), spec["title"]))
    return out
