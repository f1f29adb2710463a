"""Minimal SVG output: polyline plots and a categorical heatmap."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=30, bottom=50)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def line_plot(
    x: Sequence[float],
    series: dict[str, Sequence[float]],
    title: str = "",
    xlabel: str = "t",
    ylabel: str = "",
    log_y: bool = False,
) -> str:
    """Polyline plot of several series against a shared x axis.

    With ``log_y`` nonpositive and non-finite samples are dropped.
    """
    x = np.asarray(x, dtype=float)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    cleaned = {}
    for name, ys in series.items():
        y = np.asarray(ys, dtype=float)
        ok = np.isfinite(y) & np.isfinite(x)
        if log_y:
            ok &= y > 0
        if ok.any():
            cleaned[name] = (x[ok], np.log10(y[ok]) if log_y else y[ok])

    if cleaned:
        ally = np.concatenate([c[1] for c in cleaned.values()])
        y_lo, y_hi = float(ally.min()), float(ally.max())
    else:
        y_lo, y_hi = 0.0, 1.0
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    finite_x = x[np.isfinite(x)]
    x_lo, x_hi = (float(finite_x.min()), float(finite_x.max())) if finite_x.size else (0.0, 1.0)
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0

    def sx(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return MARGIN["top"] + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        fx = x_lo + (x_hi - x_lo) * k / 4
        fy = y_lo + (y_hi - y_lo) * k / 4
        label_y = f"1e{fy:.1f}" if log_y else f"{fy:.3g}"
        out.append(f'<text x="{_fmt(sx(fx))}" y="{HEIGHT - MARGIN["bottom"] + 16}" text-anchor="middle">{fx:.3g}</text>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_fmt(sy(fy) + 4)}" text-anchor="end">{label_y}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    ylab = f"log10 {ylabel}" if log_y and ylabel else ylabel
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">{escape(ylab)}</text>'
    )
    for i, (name, (xs, ys)) in enumerate(cleaned.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 16 * (i + 1)
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(
    x_values: Sequence[float],
    y_values: Sequence[float],
    labels: Sequence[Sequence[str]],
    colors: dict[str, str],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Grid of coloured cells; ``labels[i][j]`` belongs to (x_values[i], y_values[j])."""
    nx, ny = len(x_values), len(y_values)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    cw, ch = pw / nx, ph / ny
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i in range(nx):
        for j in range(ny):
            color = colors.get(labels[i][j], "#cccccc")
            x0 = MARGIN["left"] + i * cw
            y0 = MARGIN["top"] + (ny - 1 - j) * ch
            out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(cw)}" height="{_fmt(ch)}" fill="{color}" stroke="white"/>')
    step_x = max(1, math.ceil(nx / 8))
    for i in range(0, nx, step_x):
        cx = MARGIN["left"] + (i + 0.5) * cw
        out.append(f'<text x="{_fmt(cx)}" y="{HEIGHT - MARGIN["bottom"] + 14}" text-anchor="middle">{x_values[i]:.3g}</text>')
    step_y = max(1, math.ceil(ny / 8))
    for j in range(0, ny, step_y):
        cy = MARGIN["top"] + (ny - 1 - j + 0.5) * ch
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_fmt(cy + 4)}" text-anchor="end">{y_values[j]:.3g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>'
    )
    for k, (name, color) in enumerate(colors.items()):
        ly = MARGIN["top"] + 18 * (k + 1)
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{lx + 18}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path: str | Path, svg: str) -> None:
    Path(path).write_text(svg)
