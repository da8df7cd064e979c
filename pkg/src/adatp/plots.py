"""Dependency-free SVG emitters for the two diagnostic plots.

Output is structural on purpose: one <rect> per bar or grid cell, each
carrying data-index/data-pos and data-value attributes, so tests can assert
on content instead of pixels.
"""

from __future__ import annotations

from typing import Iterable
from xml.sax.saxutils import escape, quoteattr

from .errors import ShapeMismatch

_SVG = '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'


def svg_bar_chart(values: Iterable[float], title: str = "", width: int = 640, height: int = 240) -> str:
    vals = [float(v) for v in values]
    if not vals:
        raise ShapeMismatch("bar chart needs at least one value")
    top = max(vals)
    pad, label_h = 4, 16
    plot_h = height - label_h - pad
    bar_w = (width - 2 * pad) / len(vals)
    parts = [_SVG.format(w=width, h=height)]
    if title:
        parts.append(f'<title>{escape(title)}</title>')
    parts.append(f'<text x="{pad}" y="{label_h - 4}" font-size="12">{escape(title)}</text>')
    for i, v in enumerate(vals):
        h = 0.0 if top <= 0 else plot_h * (v / top)
        x = pad + i * bar_w
        y = label_h + (plot_h - h)
        parts.append(
            f'<rect class="bar" data-index="{i}" data-value={quoteattr(repr(v))} '
            f'x="{x:.2f}" y="{y:.2f}" width="{max(bar_w - 1, 0.5):.2f}" height="{h:.2f}" '
            f'fill="#4878a8"/>'
        )
    parts.append("</svg>")
    return "".join(parts)


def svg_heat_grid(values: Iterable[float], grid_width: int, title: str = "", cell: int = 12) -> str:
    vals = [float(v) for v in values]
    if grid_width < 1 or not vals or len(vals) % grid_width != 0:
        raise ShapeMismatch(f"{len(vals)} values do not reshape to width {grid_width}")
    rows = len(vals) // grid_width
    label_h = 16
    width = grid_width * cell
    height = rows * cell + label_h
    top = max(vals)
    parts = [_SVG.format(w=width, h=height)]
    if title:
        parts.append(f'<title>{escape(title)}</title>')
    parts.append(f'<text x="0" y="{label_h - 4}" font-size="12">{escape(title)}</text>')
    for i, v in enumerate(vals):
        r, col = divmod(i, grid_width)
        level = 0.0 if top <= 0 else v / top
        shade = int(round(255 * (1.0 - level)))
        parts.append(
            f'<rect class="cell" data-pos="{i}" data-value={quoteattr(repr(v))} '
            f'x="{col * cell}" y="{label_h + r * cell}" width="{cell}" height="{cell}" '
            f'fill="rgb(255,{shade},{shade})"/>'
        )
    parts.append("</svg>")
    return "".join(parts)
