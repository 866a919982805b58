"""Minimal SVG line charts: one panel per metric, raw series faint, smoothed bold."""

import math
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 320, 220
MARGIN = {"left": 52, "right": 12, "top": 28, "bottom": 36}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
PANELS = (("reward", "Reward"), ("frechet", "Frechet Distance"), ("mse", "MSE"))


def _nice_range(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.1, 0.5)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(v):
    return f"{v:.3g}"


def _polyline(xs, ys, color, width, opacity):
    if len(xs) == 1:
        return f'<circle cx="{xs[0]:.2f}" cy="{ys[0]:.2f}" r="{1.5 + width:.1f}" fill="{color}" fill-opacity="{opacity}"/>'
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}" '
        f'stroke-opacity="{opacity}" stroke-linejoin="round"/>'
    )


def _panel(ox, title, series):
    """``series``: list of (label, epochs, raw, smooth)."""
    x0, y0 = ox + MARGIN["left"], MARGIN["top"]
    w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    all_x = np.concatenate([np.asarray(s[1], float) for s in series])
    all_y = np.concatenate([np.concatenate([s[2], s[3]]) for s in series])
    xlo, xhi = _nice_range(all_x.min(), all_x.max())
    ylo, yhi = _nice_range(all_y.min(), all_y.max())

    def sx(v):
        return x0 + (np.asarray(v, float) - xlo) / (xhi - xlo) * w

    def sy(v):
        return y0 + h - (np.asarray(v, float) - ylo) / (yhi - ylo) * h

    out = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444" stroke-width="0.8"/>',
        f'<text x="{x0 + w / 2:.1f}" y="{y0 - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 30}" text-anchor="middle" font-size="11">Epoch</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = ylo + frac * (yhi - ylo)
        yp = y0 + h - frac * h
        out.append(f'<text x="{x0 - 4}" y="{yp + 4:.1f}" text-anchor="end" font-size="10">{_fmt(yv)}</text>')
        xv = xlo + frac * (xhi - xlo)
        xp = x0 + frac * w
        out.append(f'<text x="{xp:.1f}" y="{y0 + h + 14}" text-anchor="middle" font-size="10">{_fmt(xv)}</text>')
    for i, (_, epochs, raw, smooth) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        xs = sx(epochs)
        out.append(_polyline(xs, sy(raw), color, 1.0, 0.3))
        out.append(_polyline(xs, sy(smooth), color, 2.2, 1.0))
    return out


def render_svg(curves, title=None):
    """``curves`` maps a label to a metrics table as returned by ``read_metrics_csv``."""
    if not curves:
        raise ValueError("nothing to plot")
    labels = list(curves)
    legend_h = 18 * len(labels) + 8
    width = PANEL_W * len(PANELS)
    height = PANEL_H + legend_h + (20 if title else 0)
    top = 20 if title else 0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" '
        'font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="15" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.append(f'<g transform="translate(0,{top})">')
    for p, (key, name) in enumerate(PANELS):
        series = [(lab, curves[lab]["epoch"], curves[lab][f"{key}_raw"], curves[lab][f"{key}_smooth"]) for lab in labels]
        parts += _panel(p * PANEL_W, name, series)
    parts.append("</g>")
    for i, lab in enumerate(labels):
        y = top + PANEL_H + 14 + 18 * i
        color = COLORS[i % len(COLORS)]
        parts.append(f'<line x1="{MARGIN["left"]}" y1="{y - 4}" x2="{MARGIN["left"] + 24}" y2="{y - 4}" stroke="{color}" stroke-width="2.2"/>')
        parts.append(f'<text x="{MARGIN["left"] + 30}" y="{y}" font-size="11">{escape(lab)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(curves, path, title=None):
    with open(path, "w") as fh:
        fh.write(render_svg(curves, title))
