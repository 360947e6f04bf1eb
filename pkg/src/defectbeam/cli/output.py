"""Field tables (CSV), JSON reports and SVG line plots."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

EB_HEADER = ("x", "w", "w1", "w2", "w3", "torsion", "curvature")
TIMO_HEADER = ("x", "u", "p", "n", "theta", "torsion", "curvature")


def fmt(v: float) -> str:
    """17 significant digits: enough to recover every double exactly."""
    return f"{float(v):.17g}"


def write_table(path, header: Sequence[str], columns: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    data = np.column_stack([np.asarray(columns[h], dtype=float) for h in header])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in data:
            writer.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> dict:
    """Columns of a table written by :func:`write_table`, keyed by header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {h: data[:, i].copy() for i, h in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_svg(path, x: np.ndarray, series: Mapping[str, np.ndarray], title: str = "",
              xlabel: str = "x", logscale: bool = False) -> Path:
    """One panel per series, stacked vertically; output is byte-stable across runs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    names = list(series)
    with matplotlib.rc_context({"svg.hashsalt": "defectbeam", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(len(names), 1, figsize=(6.0, 1.8 * len(names) + 0.6), sharex=True, squeeze=False)
        for ax, name in zip(axes[:, 0], names):
            if logscale:
                ax.loglog(x, series[name], "o-", lw=1.2, ms=3)
            else:
                ax.plot(x, series[name], lw=1.2)
            ax.set_ylabel(name)
            ax.grid(True, alpha=0.3)
        axes[-1, 0].set_xlabel(xlabel)
        if title:
            axes[0, 0].set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
