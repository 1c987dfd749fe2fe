"""Minimal static SVG line/scatter charts for numerical results.

Deliberately tiny: axes box, ticks, polylines/markers, labels, legend.
Charts are outputs for eyeballing runs, not an interactive surface.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 840
HEIGHT = 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 42, 52

PALETTE = ("#c23b22", "#4878a8", "#777777", "#3a9a5c", "#9a5ca8")

MAX_SCATTER_MARKERS = 2000  # charts subsample dense scatters; csv keeps all


def _fmt(v: float) -> str:
    a = abs(v)
    if v == 0:
        return "0"
    if a >= 1e4 or a < 1e-3:
        return f"{v:.2e}"
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        lo, hi = lo - pad, hi + pad
    return np.linspace(lo, hi, n), lo, hi


class _Scale:
    def __init__(self, lo, hi, out_lo, out_hi, log=False):
        self.log = log
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        self.lo, self.hi = lo, hi
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v):
        v = np.log10(v) if self.log else v
        span = self.hi - self.lo or 1.0
        return self.out_lo + (v - self.lo) / span * (self.out_hi - self.out_lo)


def line_chart(path, series, *, title="", xlabel="", ylabel="",
               log_y: bool = False) -> Path:
    """Render series to an SVG file.

    series: list of dicts with keys x, y (1-d arrays), label (str), and
    optional kind ("line" default, or "scatter").
    """
    if not series:
        raise ValueError("no series to plot")
    xs = np.concatenate([np.asarray(s["x"], dtype=np.float64) for s in series])
    ys = np.concatenate([np.asarray(s["y"], dtype=np.float64) for s in series])
    finite = np.isfinite(xs) & np.isfinite(ys)
    if not finite.any():
        raise ValueError("no finite data to plot")
    xs, ys = xs[finite], ys[finite]
    if log_y:
        ys = ys[ys > 0]
        if ys.size == 0:
            raise ValueError("log scale needs positive values")

    x_ticks, x_lo, x_hi = _ticks(float(xs.min()), float(xs.max()))
    if log_y:
        y_lo, y_hi = float(ys.min()), float(ys.max())
        lo_e = math.floor(math.log10(y_lo))
        hi_e = math.ceil(math.log10(y_hi)) or lo_e + 1
        if hi_e == lo_e:
            hi_e += 1
        y_ticks = [10.0 ** e for e in range(lo_e, hi_e + 1)]
        y_lo, y_hi = 10.0 ** lo_e, 10.0 ** hi_e
    else:
        y_ticks, y_lo, y_hi = _ticks(float(ys.min()), float(ys.max()))

    sx = _Scale(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R)
    sy = _Scale(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T, log=log_y)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#333"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
                     f'font-size="16" font-family="sans-serif">{escape(title)}</text>')
    for tx in x_ticks:
        px = sx(tx)
        parts.append(f'<line x1="{px:.1f}" y1="{HEIGHT - MARGIN_B}" '
                     f'x2="{px:.1f}" y2="{HEIGHT - MARGIN_B + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px:.1f}" y="{HEIGHT - MARGIN_B + 18}" '
                     f'text-anchor="middle" font-size="11" '
                     f'font-family="sans-serif">{_fmt(float(tx))}</text>')
    for ty in y_ticks:
        py = sy(ty)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{py:.1f}" '
                     f'x2="{MARGIN_L}" y2="{py:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{py + 4:.1f}" '
                     f'text-anchor="end" font-size="11" '
                     f'font-family="sans-serif">{_fmt(float(ty))}</text>')
    if xlabel:
        parts.append(f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2}" '
                     f'y="{HEIGHT - 12}" text-anchor="middle" font-size="13" '
                     f'font-family="sans-serif">{escape(xlabel)}</text>')
    if ylabel:
        cy = (MARGIN_T + HEIGHT - MARGIN_B) / 2
        parts.append(f'<text x="18" y="{cy}" text-anchor="middle" font-size="13" '
                     f'font-family="sans-serif" transform="rotate(-90 18 {cy})">'
                     f'{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = s.get("color", PALETTE[i % len(PALETTE)])
        x = np.asarray(s["x"], dtype=np.float64)
        y = np.asarray(s["y"], dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_y:
            keep &= y > 0
        x, y = x[keep], y[keep]
        if x.size == 0:
            continue
        if s.get("kind", "line") == "scatter":
            if x.size > MAX_SCATTER_MARKERS:
                step = max(1, x.size // MAX_SCATTER_MARKERS)
                x, y = x[::step], y[::step]
            for px, py in zip(sx(x), sy(y)):
                parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="1.4" '
                             f'fill="{color}" fill-opacity="0.45"/>')
        else:
            pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(sx(x), sy(y)))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.6"/>')

    ly = MARGIN_T + 14
    for i, s in enumerate(series):
        color = s.get("color", PALETTE[i % len(PALETTE)])
        label = s.get("label", f"series {i}")
        lx = WIDTH - MARGIN_R - 170
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-size="12" '
                     f'font-family="sans-serif">{escape(label)}</text>')
        ly += 16

    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
