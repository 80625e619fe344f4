"""Minimal standalone SVG line charts with error bars."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 55


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def render_svg(series, labels, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """SVG text for ``series[i] = [(x, mean, ci95), ...]`` labelled ``labels[i]``."""
    if not series or any(len(s) == 0 for s in series):
        raise ValueError("every series needs at least one point")
    if len(labels) != len(series):
        raise ValueError("one label per series")
    pts = [np.asarray(s, dtype=float).reshape(-1, 3) for s in series]
    allx = np.concatenate([p[:, 0] for p in pts])
    lo_y = min(float((p[:, 1] - p[:, 2]).min()) for p in pts)
    hi_y = max(float((p[:, 1] + p[:, 2]).max()) for p in pts)
    x0, x1 = float(allx.min()), float(allx.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (hi_y - lo_y or 1.0)
    y0, y1 = lo_y - pad, hi_y + pad

    def sx(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def sy(v):
        return H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.1f}" y="{H - MB + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{ML - 6}" y="{sy(t) + 4:.1f}" font-size="11" text-anchor="end">{t:.3g}</text>')
    if title:
        out.append(f'<text x="{(ML + W - MR) / 2}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{(MT + H - MB) / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(MT + H - MB) / 2})">{escape(ylabel)}</text>')
    for i, (p, label) in enumerate(zip(pts, labels)):
        color = PALETTE[i % len(PALETTE)]
        order = np.argsort(p[:, 0], kind="stable")
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y, _ in p[order])
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y, ci in p:
            out.append(f'<line x1="{sx(x):.2f}" y1="{sy(y - ci):.2f}" x2="{sx(x):.2f}" y2="{sy(y + ci):.2f}" '
                       f'stroke="{color}"/>')
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = MT + 10 + 20 * i
        out.append(f'<line x1="{W - MR + 12}" y1="{ly}" x2="{W - MR + 36}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 42}" y="{ly + 4}" font-size="12">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series, labels, path, title: str = "", xlabel: str = "", ylabel: str = "") -> Path:
    """Write the chart to ``path``; nothing is written if the input is invalid."""
    text = render_svg(series, labels, title, xlabel, ylabel)
    path = Path(path)
    path.write_text(text)
    return path
