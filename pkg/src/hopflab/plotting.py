"""SVG figures rendered from the CSV files the CLI writes.

Every function takes a CSV path, so a figure can be rebuilt from the data
alone.  Output is deterministic: fixed hash salt, no date metadata.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams.update({
    "svg.hashsalt": "hopflab",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.6),
})

KINDS = ("curve", "heatmap", "histogram", "survival")


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {name: [] for name in header}
    for row in body:
        for name, val in zip(header, row):
            cols[name].append(val)
    out = {}
    for name, vals in cols.items():
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def _save(fig, out_path) -> str:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(out_path)


def plot_curve(csv_path, out_path, title: str = "") -> str:
    """First column on x, every other numeric column as a line."""
    data = read_csv(csv_path)
    names = list(data)
    fig, ax = plt.subplots()
    x = data[names[0]]
    for name in names[1:]:
        if data[name].dtype.kind == "f":
            ls = "--" if "exact" in name or "reference" in name else "-"
            ax.plot(x, data[name], ls, label=name)
    ax.set_xlabel(names[0])
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, out_path)


def plot_heatmap(csv_path, out_path, title: str = "", value: str = None) -> str:
    """Scattered (x, y, value) nodes shown as a triangulated colour map."""
    data = read_csv(csv_path)
    names = list(data)
    value = value or names[2]
    fig, ax = plt.subplots()
    tc = ax.tricontourf(data[names[0]], data[names[1]], data[value], levels=20, cmap="viridis")
    fig.colorbar(tc, ax=ax, label=value)
    ax.set_aspect("equal")
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_title(title)
    return _save(fig, out_path)


def plot_histogram(csv_path, out_path, title: str = "", column: str = "margin") -> str:
    data = read_csv(csv_path)
    vals = data[column]
    vals = vals[np.isfinite(vals)]
    fig, ax = plt.subplots()
    ax.hist(vals, bins=min(40, max(5, vals.size // 5)), color="0.4")
    ax.axvline(0.0, color="C3", lw=1)
    ax.set_xlabel(column)
    ax.set_ylabel("count")
    ax.set_title(title)
    return _save(fig, out_path)


def plot_survival(csv_path, out_path, title: str = "") -> str:
    """Columns t, p, ci and optional reference; log scale on p."""
    data = read_csv(csv_path)
    t, p, ci = data["t"], data["p"], data["ci"]
    fig, ax = plt.subplots()
    pos = p > 0
    ax.errorbar(t[pos], p[pos], yerr=ci[pos], fmt="o", ms=3, capsize=2, label="estimate")
    if "reference" in data:
        ax.plot(t, data["reference"], "--", label="reference")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("P(tau > t)")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, out_path)


def render(kind: str, csv_path, out_path, title: str = "") -> str:
    if kind == "curve":
        return plot_curve(csv_path, out_path, title)
    if kind == "heatmap":
        return plot_heatmap(csv_path, out_path, title)
    if kind == "histogram":
        return plot_histogram(csv_path, out_path, title)
    if kind == "survival":
        return plot_survival(csv_path, out_path, title)
    raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
