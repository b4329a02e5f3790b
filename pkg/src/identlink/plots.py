"""Static SVG density panels, written by hand (no plotting dependency)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 280, 110
MARGIN_L, MARGIN_T, GAP = 40, 40, 24


@dataclass
class Panel:
    samples: np.ndarray
    label: str = ""
    expected: float | None = None   # drawn dotted
    observed: float | None = None   # drawn solid


def kde(samples, grid) -> np.ndarray:
    """Gaussian kernel density with Silverman's bandwidth."""
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    bw = 0.9 * spread * x.size ** -0.2
    diff = (grid[:, None] - x[None, :]) / bw
    return np.exp(-0.5 * diff * diff).sum(axis=1) / (x.size * bw * np.sqrt(2 * np.pi))


def _panel_svg(panel: Panel, x0: float, y0: float, lo: float, hi: float) -> str:
    def sx(v):
        return x0 + (v - lo) / (hi - lo) * PANEL_W

    parts = ['<g class="panel">',
             f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#999"/>',
             f'<text x="{x0 + 4:.1f}" y="{y0 + 14:.1f}" font-size="11">{escape(panel.label)}</text>']
    x = np.asarray(panel.samples, dtype=float)
    x = x[np.isfinite(x)]
    base = y0 + PANEL_H
    if x.size == 0:
        parts.append(f'<text x="{x0 + PANEL_W / 2:.1f}" y="{y0 + PANEL_H / 2:.1f}" '
                     f'font-size="12" text-anchor="middle">no data</text>')
    elif x.size < 2 or np.ptp(x) == 0:
        xv = sx(float(x[0]))
        parts.append(f'<line class="spike" x1="{xv:.1f}" y1="{base:.1f}" x2="{xv:.1f}" '
                     f'y2="{y0 + 18:.1f}" stroke="black" stroke-width="2"/>')
    else:
        grid = np.linspace(lo, hi, 200)
        dens = kde(x, grid)
        top = dens.max()
        pts = " ".join(f"{sx(g):.1f},{base - d / top * (PANEL_H - 20):.1f}" for g, d in zip(grid, dens))
        parts.append(f'<polyline class="density" points="{pts}" fill="none" stroke="black"/>')
    if panel.expected is not None and np.isfinite(panel.expected):
        xv = sx(panel.expected)
        parts.append(f'<line class="expected" x1="{xv:.1f}" y1="{y0:.1f}" x2="{xv:.1f}" y2="{base:.1f}" '
                     f'stroke="blue" stroke-dasharray="2,3"/>')
    if panel.observed is not None and np.isfinite(panel.observed):
        xv = sx(panel.observed)
        parts.append(f'<line class="observed" x1="{xv:.1f}" y1="{y0:.1f}" x2="{xv:.1f}" y2="{base:.1f}" '
                     f'stroke="red"/>')
    for v in (lo, hi):
        parts.append(f'<text x="{sx(v):.1f}" y="{base + 12:.1f}" font-size="9" text-anchor="middle">{v:.3g}</text>')
    parts.append("</g>")
    return "\n".join(parts)


def emit_density_svg(panels: list[list[Panel]], path, title: str = "", column_titles=None) -> Path:
    """Write a grid of density panels; ``panels[row][col]``.

    Panels in one row share their x-range so the columns can be compared.
    """
    path = Path(path)
    n_rows = len(panels)
    n_cols = max((len(r) for r in panels), default=1)
    width = MARGIN_L + n_cols * (PANEL_W + GAP)
    height = MARGIN_T + n_rows * (PANEL_H + GAP) + 10
    body = []
    if title:
        body.append(f'<text x="{width / 2:.1f}" y="16" font-size="14" text-anchor="middle">{escape(title)}</text>')
    for c, ct in enumerate(column_titles or []):
        body.append(f'<text x="{MARGIN_L + c * (PANEL_W + GAP) + PANEL_W / 2:.1f}" y="32" '
                    f'font-size="12" text-anchor="middle">{escape(ct)}</text>')
    for r, row in enumerate(panels):
        vals = [np.asarray(p.samples, dtype=float) for p in row]
        vals = np.concatenate([v[np.isfinite(v)] for v in vals]) if vals else np.zeros(0)
        marks = [m for p in row for m in (p.expected, p.observed) if m is not None and np.isfinite(m)]
        pool = np.concatenate([vals, marks]) if marks else vals
        if pool.size == 0:
            lo, hi = 0.0, 1.0
        else:
            lo, hi = np.percentile(pool, [0.5, 99.5]) if vals.size > 1 else (pool.min(), pool.max())
            lo, hi = min(lo, *marks) if marks else lo, max(hi, *marks) if marks else hi
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            pad = 0.05 * (hi - lo)
            lo, hi = lo - pad, hi + pad
        y0 = MARGIN_T + r * (PANEL_H + GAP)
        for c, panel in enumerate(row):
            body.append(_panel_svg(panel, MARGIN_L + c * (PANEL_W + GAP), y0, float(lo), float(hi)))
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")
    path.write_text(svg)
    return path
