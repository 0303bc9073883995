"""SVG plots of comma-separated series written by the runner."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import UsageError


def read_series(path) -> dict[str, np.ndarray]:
    """Numeric columns of a one-header-line CSV file (non-numeric columns are skipped)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise UsageError(f"{path} has a header but no data rows")
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except ValueError:
            continue
    return cols


def tail_slope(x: np.ndarray, y: np.ndarray, tail: float = 0.5) -> float:
    """Least-squares slope of log(y) against x over the last ``tail`` fraction of the range."""
    keep = (x >= x[0] + (1.0 - tail) * (x[-1] - x[0])) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[keep], np.log(y[keep]), 1)[0])


def plot_series(path, x: str, ys, y2: str | None = None, log_y: bool = False, out=None) -> Path:
    """Plot columns ``ys`` (and optionally ``y2`` on a twin axis) against ``x``; returns the SVG path."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = read_series(path)
    wanted = [x, *ys] + ([y2] if y2 else [])
    missing = [c for c in wanted if c not in cols]
    if missing:
        raise UsageError(f"columns not found in {path}: {', '.join(missing)}")
    out = Path(out) if out else Path(path).with_suffix(".svg")
    matplotlib.rcParams["svg.hashsalt"] = "transonic-ep"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xv = cols[x]
    notes = []
    for name in ys:
        yv = np.abs(cols[name]) if log_y else cols[name]
        ax.plot(xv, yv, label=name)
        if log_y:
            notes.append(f"{name}: tail slope {tail_slope(xv, yv):.4g}")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.legend(loc="upper right")
    if y2:
        ax2 = ax.twinx()
        ax2.plot(xv, cols[y2], color="tab:red", linestyle="--", label=y2)
        ax2.set_ylabel(y2)
    if notes:
        ax.text(0.02, 0.02, "\n".join(notes), transform=ax.transAxes, fontsize=8, va="bottom")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
