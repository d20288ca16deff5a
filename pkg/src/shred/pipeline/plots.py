"""Deterministic SVG emission: sensor-trace line plots and space-time
heat maps (truth, prediction, pointwise error).

SVG 1.1 is written directly with fixed float formatting so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 400
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _axis_range(lo: float, hi: float):
    if hi <= lo:
        pad = 0.5 if lo == 0 else abs(lo) * 0.1
        return lo - pad, lo + pad
    return lo, hi


def svg_line_plot(path, series: dict, title: str = "", xlabel: str = "t",
                  ylabel: str = "value") -> bool:
    """Line plot of named (x, y) series.  Returns False (and warns)
    without writing anything when there is no data."""
    series = {k: (np.asarray(x, float), np.asarray(y, float))
              for k, (x, y) in series.items() if len(np.atleast_1d(y)) > 0}
    if not series:
        logger.warning("no series to plot for %s; skipping", path)
        return False
    x_lo = min(x.min() for x, _ in series.values())
    x_hi = max(x.max() for x, _ in series.values())
    y_lo = min(y.min() for _, y in series.values())
    y_hi = max(y.max() for _, y in series.values())
    x_lo, x_hi = _axis_range(x_lo, x_hi)
    y_lo, y_hi = _axis_range(y_lo, y_hi)

    def sx(v):
        return MARGIN + (v - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def sy(v):
        return HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel} '
        f'[{_fmt(x_lo)}, {_fmt(x_hi)}]</text>',
        f'<text x="15" y="{HEIGHT // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT // 2})">{ylabel} '
        f'[{_fmt(y_lo)}, {_fmt(y_hi)}]</text>',
    ]
    for i, (name, (x, y)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{WIDTH - MARGIN - 5}" y="{MARGIN + 15 + 15 * i}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return True


def _heat_color(v: float) -> str:
    """Blue (0) -> white (0.5) -> red (1) diverging map."""
    v = min(max(v, 0.0), 1.0)
    if v < 0.5:
        t = v / 0.5
        r, g, b = int(255 * t), int(255 * t), 255
    else:
        t = (v - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_heatmap(path, matrix: np.ndarray, title: str = "") -> bool:
    """Space-time heat map: rows = space (vertical), cols = time."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        logger.warning("empty matrix for %s; skipping", path)
        return False
    lo, hi = float(matrix.min()), float(matrix.max())
    span = hi - lo if hi > lo else 1.0
    nh, nt = matrix.shape
    cw = (WIDTH - 2 * MARGIN) / nt
    ch = (HEIGHT - 2 * MARGIN) / nh
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title} '
        f'(range [{_fmt(lo)}, {_fmt(hi)}])</text>',
    ]
    for i in range(nh):
        for j in range(nt):
            color = _heat_color((matrix[i, j] - lo) / span)
            parts.append(
                f'<rect x="{_fmt(MARGIN + j * cw)}" y="{_fmt(MARGIN + i * ch)}" '
                f'width="{_fmt(cw + 0.5)}" height="{_fmt(ch + 0.5)}" fill="{color}"/>'
            )
    parts.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
                 f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return True


def emit_plots(out_dir, sensor_series: dict, truth=None, prediction=None,
               instants=None, prefix: str = "") -> list:
    """Figure set for one run: per-sensor traces plus truth/prediction/
    error heat maps.  Returns the list of files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if sensor_series:
        series = {}
        for name, tr in sensor_series.items():
            n = len(tr["truth"])
            x = instants if instants is not None else np.arange(n)
            series[f"{name} truth"] = (x, tr["truth"])
            series[f"{name} prediction"] = (x, tr["prediction"])
        p = out_dir / f"{prefix}sensor_traces.svg"
        if svg_line_plot(p, series, title="Sensor traces: truth vs prediction"):
            written.append(str(p))
    if truth is not None and prediction is not None:
        for name, mat in (("truth", truth), ("prediction", prediction),
                          ("error", np.asarray(prediction) - np.asarray(truth))):
            p = out_dir / f"{prefix}field_{name}.svg"
            if svg_heatmap(p, mat, title=f"Space-time field: {name}"):
                written.append(str(p))
    return written
