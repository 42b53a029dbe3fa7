"""Minimal deterministic SVG plots: polylines with optional log-y, and heatmaps."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 40, 55)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
LOG_FLOOR = 1e-20


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Frame:
    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float]):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, WIDTH - right
        self.py0, self.py1 = HEIGHT - bottom, top

    def x(self, v):
        return self.px0 + (np.asarray(v) - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v):
        return self.py0 + (np.asarray(v) - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str, y_tick_fmt=lambda v: f"{v:g}",
          y_ticks: Sequence[float] | None = None) -> list[str]:
    out = [
        f'<rect x="{fr.px0}" y="{fr.py1}" width="{fr.px1 - fr.px0}" height="{fr.py0 - fr.py1}" '
        'fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN[2] - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(fr.x0, fr.x1, 5):
        px = _f(float(fr.x(v)))
        out.append(f'<line x1="{px}" y1="{fr.py0}" x2="{px}" y2="{fr.py0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{fr.py0 + 18}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for v in np.linspace(fr.y0, fr.y1, 5) if y_ticks is None else y_ticks:
        py = _f(float(fr.y(v)))
        out.append(f'<line x1="{fr.px0 - 5}" y1="{py}" x2="{fr.px0}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{fr.px0 - 8}" y="{py}" text-anchor="end" font-size="10" '
                   f'dominant-baseline="middle">{y_tick_fmt(v)}</text>')
    return out


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def line_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "", xlabel: str = "",
              ylabel: str = "", logy: bool = False, hline: float | None = None) -> str:
    """One polyline per ``(label, x, y)``; non-finite points break the line."""
    xs = [np.asarray(x, dtype=float) for _, x, _ in series]
    ys = [np.asarray(y, dtype=float) for _, _, y in series]
    if logy:
        ys = [np.log10(np.maximum(y, LOG_FLOOR)) for y in ys]
    finite_x = np.concatenate([x[np.isfinite(x)] for x in xs]) if xs else np.array([0.0])
    finite_y = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0])
    extra = [np.log10(hline) if logy else hline] if hline is not None else []
    finite_y = np.concatenate([finite_y, extra])
    x_range = (float(finite_x.min()), float(finite_x.max())) if finite_x.size else (0.0, 1.0)
    y_range = (float(finite_y.min()), float(finite_y.max())) if finite_y.size else (0.0, 1.0)
    if logy:
        y_range = (np.floor(y_range[0]), np.ceil(y_range[1]))
    fr = _Frame(x_range, y_range)
    if logy:
        step = max(1, int(np.ceil((fr.y1 - fr.y0) / 8)))
        ticks = np.arange(fr.y0, fr.y1 + 0.5, step)
        body = _axes(fr, title, xlabel, ylabel, lambda v: f"1e{int(v)}", ticks)
    else:
        body = _axes(fr, title, xlabel, ylabel)
    if hline is not None:
        py = _f(float(fr.y(extra[0])))
        body.append(f'<line x1="{fr.px0}" y1="{py}" x2="{fr.px1}" y2="{py}" stroke="gray" stroke-dasharray="4 3"/>')
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        color = COLORS[i % len(COLORS)]
        ok = np.isfinite(x) & np.isfinite(y)
        runs, cur = [], []
        for px, py, good in zip(fr.x(x), fr.y(y), ok):
            if good:
                cur.append(f"{_f(px)},{_f(py)}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for r in runs:
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(r)}"/>')
        ly = MARGIN[2] + 14 + 16 * i
        body.append(f'<line x1="{fr.px1 - 120}" y1="{ly}" x2="{fr.px1 - 100}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{fr.px1 - 95}" y="{ly}" font-size="11" dominant-baseline="middle">{escape(label)}</text>')
    return _document(body)


def heatmap(counts: np.ndarray, title: str = "", x_range: tuple[float, float] = (0.0, 1.0),
            y_range: tuple[float, float] = (0.0, 1.0), xlabel: str = "", ylabel: str = "") -> str:
    """``counts[row, col]`` with row 0 at the bottom; log-scaled gray levels, empty cells omitted."""
    counts = np.asarray(counts)
    fr = _Frame(x_range, y_range)
    n_rows, n_cols = counts.shape
    cw = (fr.px1 - fr.px0) / n_cols
    ch = (fr.py0 - fr.py1) / n_rows
    peak = np.log1p(counts.max()) if counts.size and counts.max() > 0 else 1.0
    body = []
    for r, c in zip(*np.nonzero(counts)):
        shade = int(round(230 * (1.0 - np.log1p(counts[r, c]) / peak)))
        x = fr.px0 + c * cw
        y = fr.py0 - (r + 1) * ch
        body.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cw)}" height="{_f(ch)}" '
                    f'fill="rgb({shade},{shade},{min(255, shade + 25)})"/>')
    body += _axes(fr, title, xlabel, ylabel)
    return _document(body)
