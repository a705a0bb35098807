"""Static SVG rendering of attributions and counterfactuals.

Output is plain SVG 1.1 built from strings, with every number printed to
four decimals so identical inputs give identical bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .core import Attribution, BadParams, CounterfactualResult, ExplanationError, ShapeMismatch

WHITE = (255, 255, 255)
BLUE = (0x1F, 0x77, 0xB4)
RED = (0xD6, 0x27, 0x28)
PINK = (0xE3, 0x77, 0xC2)

DIVERGING = "diverging"  # -1 blue, 0 white, +1 red
SEQUENTIAL = "sequential"  # 0 white, 1 red
COLORMAP_FOR_RANGE = {"signed": DIVERGING, "unit": SEQUENTIAL}

FONT = "sans-serif"
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70.0, 90.0, 30.0, 20.0
ROW_GAP = 10.0


class NothingChanged(ExplanationError):
    pass


def hex_color(rgb) -> str:
    return "#{:02X}{:02X}{:02X}".format(*rgb)


@dataclass
class PlotStyle:
    width: int = 800
    row_height: int = 160
    colormap: Optional[str] = None  # picked from the attribution range when None
    original_color: str = hex_color(BLUE)
    cf_color: str = hex_color(PINK)
    title: Optional[str] = None


def _blend(a, b, frac):
    return tuple(int(np.floor(x + (y - x) * frac + 0.5)) for x, y in zip(a, b))


def colormap_rgb(value: float, colormap: str) -> tuple:
    """Piecewise-linear colour for ``value``; endpoints are exact."""
    v = float(value)
    if colormap == DIVERGING:
        v = min(1.0, max(-1.0, v))
        return _blend(WHITE, RED, v) if v >= 0 else _blend(WHITE, BLUE, -v)
    if colormap == SEQUENTIAL:
        return _blend(WHITE, RED, min(1.0, max(0.0, v)))
    raise BadParams(f"unknown colormap {colormap!r}")


def colormap_hex(value: float, colormap: str) -> str:
    return hex_color(colormap_rgb(value, colormap))


def _f(v) -> str:
    return f"{float(v):.4f}"


class _Doc:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.parts = []

    def add(self, s):
        self.parts.append(s)

    def text(self, x, y, s, anchor="start", size=11, cls=None):
        c = f' class="{cls}"' if cls else ""
        self.add(f'<text{c} x="{_f(x)}" y="{_f(y)}" font-family="{FONT}" font-size="{size}" '
                 f'text-anchor="{anchor}">{escape(str(s))}</text>')

    def rect(self, x, y, w, h, fill, stroke=None, cls=None):
        c = f' class="{cls}"' if cls else ""
        s = f' stroke="{stroke}" stroke-width="1.0000"' if stroke else ' stroke="none"'
        self.add(f'<rect{c} x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"{s}/>')

    def polyline(self, xs, ys, color, cls):
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(xs, ys))
        self.add(f'<polyline class="{cls}" points="{pts}" fill="none" stroke="{color}" stroke-width="1.5000"/>')

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{_f(self.height)}" viewBox="0 0 {self.width} {_f(self.height)}">'
        )
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


def _layout(style, n_rows):
    plot_w = style.width - MARGIN_LEFT - MARGIN_RIGHT
    height = MARGIN_TOP + MARGIN_BOTTOM + n_rows * style.row_height + (n_rows - 1) * ROW_GAP
    return plot_w, height


def _scale(values, lo, hi, top, h):
    span = hi - lo if hi > lo else 1.0
    pad = 0.05 * span
    return top + h - (np.asarray(values) - (lo - pad)) / (span + 2 * pad) * h


def _xs(T, plot_w):
    # points sit at cell centres
    cell = plot_w / T
    return MARGIN_LEFT + (np.arange(T) + 0.5) * cell


def _colorbar(doc, colormap, top, height):
    x = doc.width - MARGIN_RIGHT + 20.0
    lo = -1.0 if colormap == DIVERGING else 0.0
    steps = 40
    h = height / steps
    doc.add('<g class="colorbar">')
    for i in range(steps):
        # top of the bar is the maximum
        v = 1.0 - (i + 0.5) / steps * (1.0 - lo)
        doc.rect(x, top + i * h, 14.0, h, colormap_hex(v, colormap))
    doc.rect(x, top, 14.0, height, "none", stroke="#000000")
    ticks = [-1.0, -0.5, 0.0, 0.5, 1.0] if colormap == DIVERGING else [0.0, 0.25, 0.5, 0.75, 1.0]
    for v in ticks:
        y = top + (1.0 - v) / (1.0 - lo) * height
        doc.add(f'<line x1="{_f(x + 14)}" y1="{_f(y)}" x2="{_f(x + 18)}" y2="{_f(y)}" stroke="#000000"/>')
        doc.text(x + 21, y + 4, f"{v:g}", size=10, cls="tick")
    doc.add("</g>")


def render_attribution(x, a: Attribution, style: Optional[PlotStyle] = None) -> str:
    """Heatmap of ``a`` behind a line plot of each channel of ``x``."""
    style = style or PlotStyle()
    x = np.asarray(x, dtype=np.float64)
    if a.scores.shape != x.shape:
        raise ShapeMismatch(reason=f"attribution shape {a.scores.shape} != series shape {x.shape}")
    a.check_range()
    colormap = COLORMAP_FOR_RANGE[a.range_kind]
    if style.colormap is not None and style.colormap != colormap:
        raise BadParams(f"{a.range_kind} attributions must use the {colormap} colormap")

    D, T = x.shape
    plot_w, height = _layout(style, D)
    doc = _Doc(style.width, height)
    if style.title:
        doc.text(style.width / 2, 18, style.title, anchor="middle", size=13, cls="title")
    xs = _xs(T, plot_w)
    cell = plot_w / T
    lo, hi = x.min(), x.max()
    for d in range(D):
        top = MARGIN_TOP + d * (style.row_height + ROW_GAP)
        h = style.row_height
        doc.add(f'<g class="channel-row" data-channel="{d}">')
        doc.add('<g class="heatmap">')
        for t in range(T):
            doc.rect(MARGIN_LEFT + t * cell, top, cell, h, colormap_hex(a.scores[d, t], colormap))
        doc.add("</g>")
        doc.rect(MARGIN_LEFT, top, plot_w, h, "none", stroke="#000000", cls="frame")
        doc.polyline(xs, _scale(x[d], lo, hi, top, h), "#000000", "series")
        doc.text(MARGIN_LEFT - 8, top + h / 2 + 4, f"ch {d}", anchor="end", cls="row-label")
        doc.add("</g>")
    _colorbar(doc, colormap, MARGIN_TOP, height - MARGIN_TOP - MARGIN_BOTTOM)
    return doc.render()


def render_counterfactual(x, r: CounterfactualResult, style: Optional[PlotStyle] = None,
                          original_label: Optional[int] = None) -> str:
    """Original vs counterfactual; multivariate plots show changed channels only."""
    style = style or PlotStyle()
    x = np.asarray(x, dtype=np.float64)
    if r.cf.shape != x.shape:
        raise ShapeMismatch(reason=f"counterfactual shape {r.cf.shape} != series shape {x.shape}")
    changed = np.asarray(r.changed_channels, dtype=bool)
    if not changed.any():
        raise NothingChanged("counterfactual is identical to the original")
    D, T = x.shape
    rows = [0] if D == 1 else [int(d) for d in np.flatnonzero(changed)]
    plot_w, height = _layout(style, len(rows))
    height += 20.0  # legend strip
    doc = _Doc(style.width, height)
    if style.title:
        doc.text(style.width / 2, 18, style.title, anchor="middle", size=13, cls="title")
    xs = _xs(T, plot_w)
    for i, d in enumerate(rows):
        top = MARGIN_TOP + i * (style.row_height + ROW_GAP)
        h = style.row_height
        lo = min(x[d].min(), r.cf[d].min())
        hi = max(x[d].max(), r.cf[d].max())
        doc.add(f'<g class="channel-row" data-channel="{d}">')
        doc.rect(MARGIN_LEFT, top, plot_w, h, "#FFFFFF", stroke="#000000", cls="frame")
        doc.polyline(xs, _scale(x[d], lo, hi, top, h), style.original_color, "original")
        doc.polyline(xs, _scale(r.cf[d], lo, hi, top, h), style.cf_color, "counterfactual")
        doc.text(MARGIN_LEFT - 8, top + h / 2 + 4, f"ch {d}", anchor="end", cls="row-label")
        doc.add("</g>")

    y = height - MARGIN_BOTTOM
    orig = "original" if original_label is None else f"original (class {original_label})"
    doc.add('<g class="legend">')
    doc.add(f'<line x1="{_f(MARGIN_LEFT)}" y1="{_f(y - 4)}" x2="{_f(MARGIN_LEFT + 20)}" y2="{_f(y - 4)}" '
            f'stroke="{style.original_color}" stroke-width="2.0000"/>')
    doc.text(MARGIN_LEFT + 25, y, orig)
    x2 = MARGIN_LEFT + 200
    doc.add(f'<line x1="{_f(x2)}" y1="{_f(y - 4)}" x2="{_f(x2 + 20)}" y2="{_f(y - 4)}" '
            f'stroke="{style.cf_color}" stroke-width="2.0000"/>')
    doc.text(x2 + 25, y, f"counterfactual (class {r.label})")
    doc.add("</g>")
    return doc.render()
