"""Deterministic SVG line plots (fixed 800x600 canvas, fixed palette, no timestamps)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = 60
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda z: a + (np.asarray(z, dtype=float) - lo) * (b - a) / span


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "",
              xlim=None, ylim=None) -> str:
    """SVG document with one polyline per ``(x, y, label)`` entry of ``series``."""
    xs = [np.asarray(s[0], dtype=float) for s in series]
    ys = [np.asarray(s[1], dtype=float) for s in series]
    finite = [y[np.isfinite(y)] for y in ys]
    if xlim is None:
        xlim = (min(float(x.min()) for x in xs), max(float(x.max()) for x in xs))
    if ylim is None:
        vals = np.concatenate(finite) if finite else np.zeros(1)
        ylim = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        if ylim[0] == ylim[1]:
            ylim = (ylim[0] - 0.5, ylim[1] + 0.5)
    sx = _scale(xlim[0], xlim[1], MARGIN, WIDTH - MARGIN)
    sy = _scale(ylim[0], ylim[1], HEIGHT - MARGIN, MARGIN)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for val, anchor in ((xlim[0], MARGIN), (xlim[1], WIDTH - MARGIN)):
        out.append(f'<text x="{anchor}" y="{HEIGHT - MARGIN + 18}" font-size="12" '
                   f'text-anchor="middle">{val:.4g}</text>')
    for val, anchor in ((ylim[0], HEIGHT - MARGIN), (ylim[1], MARGIN)):
        out.append(f'<text x="{MARGIN - 6}" y="{anchor + 4}" font-size="12" '
                   f'text-anchor="end">{val:.4g}</text>')
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" font-size="16" '
                   f'text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 15}" font-size="13" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{HEIGHT // 2}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 15 {HEIGHT // 2})">{escape(ylabel)}</text>')
    for i, (x, y, s) in enumerate(zip(xs, ys, series)):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(y)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(x[ok]), sy(y[ok])))
        label = escape(str(s[2])) if len(s) > 2 else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}">'
                   f'<title>{label}</title></polyline>')
        if label:
            ly = MARGIN + 16 + 16 * i
            out.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{ly - 4}" x2="{WIDTH - MARGIN - 90}" '
                       f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{WIDTH - MARGIN - 85}" y="{ly}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def snapshot_indices(m: int, count: int = 9) -> list[int]:
    """``count`` evenly spaced time indices from 0 to ``m`` (repeats allowed when ``m`` is small)."""
    return [int(round(i * m / (count - 1))) for i in range(count)]


def path_snapshots(path, title: str = "phi(t, .)") -> str:
    """Nine slices of a path at evenly spaced times."""
    x = path.sgrid.nodes
    t = path.tgrid.nodes
    series = [(x, path.values[k], f"t={t[k]:.3g}") for k in snapshot_indices(path.tgrid.m)]
    return line_plot(series, title=title, xlabel="x", ylabel="phi", xlim=(0.0, 1.0), ylim=(0.0, 1.0))


def trace_plot(t, values, title: str, ylabel: str, label: str = "") -> str:
    return line_plot([(t, values, label)], title=title, xlabel="t", ylabel=ylabel)
