"""CSV and SVG writers for traces and sweeps."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .blocks import SweepResult
from .engine import Trace

TRACE_HEADERS = {("vx", "vy", "vz"): ("t", "vx", "vy", "vz"), ("x", "y", "z"): ("t", "x", "y", "z")}
SWEEP_HEADER = ("vy", "vx", "branch", "stability")


def fmt(v: float) -> str:
    return f"{v:.9g}"


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as e:
        raise OSError(f"{path}: {e.strerror}") from e


def write_trace(tr: Trace, path, svg: bool = False) -> None:
    header = TRACE_HEADERS.get(tuple(tr.names))
    if header is None:
        raise ValueError(f"no CSV schema for state names {tr.names}")
    if np.any(np.diff(tr.times) < 0):
        raise ValueError("trace times are not monotone")
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(tr.times, tr.states):
            w.writerow([fmt(t), *(fmt(v) for v in row)])
    if svg:
        xlabel = "t (s)" if header[1] == "vx" else "t"
        ylabel = "voltage (V)" if header[1] == "vx" else "state"
        write_svg(Path(path).with_suffix(".svg"), tr.times, {n: tr[n] for n in tr.names}, xlabel, ylabel)


def read_trace(path) -> Trace:
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    names = header[1:]
    if header not in TRACE_HEADERS.values():
        raise ValueError(f"{path}: unexpected header {','.join(header)}")
    data = np.array(rows[1:], dtype=float).reshape(-1, 4)
    return Trace(data[:, 0], data[:, 1:], names=names)


def write_sweep(sw: SweepResult, path, svg: bool = False) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p, br in zip(sw.points, sw.branch):
            w.writerow([fmt(p.input), fmt(p.output), br, p.stability])
    if svg and sw.points:
        write_svg(Path(path).with_suffix(".svg"), sw.inputs, {"vx": sw.outputs}, "vy (V)", "vx (V)")


def write_svg(path, x, series: dict[str, np.ndarray], xlabel: str, ylabel: str, width=640, height=360) -> None:
    """Minimal line plot with labelled axes."""
    x = np.asarray(x, float)
    ys = np.concatenate([np.asarray(v, float) for v in series.values()])
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 50
    sx = lambda v: m + (v - x0) / (x1 - x0) * (width - 2 * m)  # noqa: E731
    sy = lambda v: height - m - (v - y0) / (y1 - y0) * (height - 2 * m)  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{m}" y="{height - m + 16}" font-size="10">{x0:.3g}</text>',
        f'<text x="{width - m}" y="{height - m + 16}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    # thin long traces to a few thousand vertices, keeping extremes per bin
    for k, (name, y) in enumerate(series.items()):
        y = np.asarray(y, float)
        idx = np.arange(len(x))
        if len(x) > 4000:
            bins = np.array_split(idx, 2000)
            idx = np.unique(np.concatenate([[b[np.argmin(y[b])], b[np.argmax(y[b])]] for b in bins if len(b)]))
        pts = " ".join(f"{sx(x[i]):.1f},{sy(y[i]):.1f}" for i in idx)
        parts.append(f'<polyline fill="none" stroke="{colors[k % 3]}" stroke-width="1" points="{pts}"><title>{name}</title></polyline>')
    parts.append("</svg>")
    try:
        Path(path).write_text("\n".join(parts))
    except OSError as e:
        raise OSError(f"{path}: {e.strerror}") from e
