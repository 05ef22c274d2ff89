"""Render decay curves, detuning-time heatmaps, and population panels from
the simulator's CSV outputs.

Strictly file-in/file-out: no physics is recomputed here.  Rendering is
deterministic for identical inputs (fixed figure geometry, fixed dpi, PNG
backend without timestamps), so repeated runs are byte-stable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("decay", "heatmap", "populations")
DPI = 150


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class FigureSpec:
    """What to draw and where to put it."""

    kind: str
    csv_path: str
    out_path: str
    peaks_path: Optional[str] = None
    port: int = 1
    log_scale: Optional[bool] = None
    t_range: Optional[tuple] = None
    overlay: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}")
        if self.port not in (1, 2):
            raise RenderError(f"port must be 1 or 2, got {self.port}")


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RenderError(f"{path}: empty file")
        rows = [row for row in reader if row]
    if not rows:
        raise RenderError(f"{path}: no data rows")
    try:
        data = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise RenderError(f"{path}: non-numeric cell ({exc})") from exc
    return [h.strip() for h in header], data


def _column(header, data, name, path):
    if name not in header:
        raise RenderError(f"{path}: missing column {name!r} "
                          f"(have {', '.join(header)})")
    return data[:, header.index(name)]


def _normalization_label(csv_path) -> str:
    sidecar = Path(str(csv_path) + ".config.json")
    if sidecar.exists():
        try:
            return str(json.loads(sidecar.read_text()).get("normalize", "unknown"))
        except (json.JSONDecodeError, OSError):
            return "unknown"
    return "unknown"


def _new_figure():
    return plt.subplots(figsize=(6.0, 4.0), dpi=DPI)


def _render_decay(spec: FigureSpec):
    header, data = _read_csv(spec.csv_path)
    t = _column(header, data, "time_ns", spec.csv_path)
    fig, ax = _new_figure()
    if "intensity_port1" in header:
        for name, label in (("intensity_port1", "port 1"),
                            ("intensity_port2", "port 2")):
            ax.plot(t, _column(header, data, name, spec.csv_path), label=label)
        ax.legend(frameon=False)
    else:
        ax.plot(t, _column(header, data, "counts", spec.csv_path))
    if spec.log_scale is None or spec.log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("intensity")
    return fig, ax


def _render_heatmap(spec: FigureSpec):
    header, data = _read_csv(spec.csv_path)
    for name in ("detuning_ghz", "time_ns", "port", "intensity"):
        _column(header, data, name, spec.csv_path)
    sel = data[:, header.index("port")] == spec.port
    if not np.any(sel):
        raise RenderError(f"{spec.csv_path}: no rows for port {spec.port}")
    rows = data[sel]
    detunings = np.unique(rows[:, header.index("detuning_ghz")])
    times = np.unique(rows[:, header.index("time_ns")])
    grid = np.full((len(detunings), len(times)), np.nan)
    d_idx = np.searchsorted(detunings, rows[:, header.index("detuning_ghz")])
    t_idx = np.searchsorted(times, rows[:, header.index("time_ns")])
    grid[d_idx, t_idx] = rows[:, header.index("intensity")]
    if np.any(np.isnan(grid)):
        raise RenderError(f"{spec.csv_path}: detuning-time grid is not complete")

    fig, ax = _new_figure()
    positive = grid[grid > 0]
    log_colors = (spec.log_scale is None or spec.log_scale) and positive.size > 0
    if log_colors:
        from matplotlib.colors import LogNorm
        floor = positive.max() * 1e-4
        mesh = ax.pcolormesh(times, detunings, np.maximum(grid, floor),
                             norm=LogNorm(vmin=floor, vmax=positive.max()),
                             cmap="magma", shading="nearest")
    else:
        mesh = ax.pcolormesh(times, detunings, grid, cmap="magma",
                             shading="nearest")
    fig.colorbar(mesh, ax=ax, label="intensity")
    if spec.overlay and spec.peaks_path:
        ph, pdata = _read_csv(spec.peaks_path)
        det = _column(ph, pdata, "detuning_ghz", spec.peaks_path)
        peak = _column(ph, pdata, "peak_time_ns", spec.peaks_path)
        good = np.isfinite(peak) & (peak <= times.max())
        ax.plot(peak[good], det[good], "w--", lw=1.2)
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("detuning (GHz)")
    ax.set_title(f"port {spec.port}", fontsize=10)
    fig.text(0.99, 0.01, f"normalization: {_normalization_label(spec.csv_path)}",
             ha="right", va="bottom", fontsize=8)
    return fig, ax


def _render_populations(spec: FigureSpec):
    header, data = _read_csv(spec.csv_path)
    t = _column(header, data, "time_ns", spec.csv_path)
    fig, ax = _new_figure()
    ax.plot(t, _column(header, data, "pop_sup", spec.csv_path),
            color="goldenrod", label="superradiant")
    ax.plot(t, _column(header, data, "pop_sub", spec.csv_path),
            color="dimgray", label="subradiant")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("population")
    ax.legend(frameon=False)
    return fig, ax


def render(spec: FigureSpec) -> str:
    """Draw the requested figure and write it to spec.out_path."""
    renderers = {"decay": _render_decay, "heatmap": _render_heatmap,
                 "populations": _render_populations}
    fig, ax = renderers[spec.kind](spec)
    if spec.t_range is not None:
        ax.set_xlim(*spec.t_range)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=DPI, metadata={"Software": "plotkit"})
    plt.close(fig)
    return spec.out_path
