"""Dependency-free SVG rendering for heatmaps and line charts.

Every drawing routine is a pure function from data to an SVG string with
fixed-precision coordinates, so identical inputs give byte-identical
documents. Missing (NaN) heatmap cells are drawn with a diagonal hatch
pattern instead of a color.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .colormap import color_at, normalize
from .errors import EmptyMatrix

CELL = 26.0
LEGEND_STEPS = 64
FONT = "font-family=\"Helvetica, Arial, sans-serif\""


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


@dataclass
class HeatmapSpec:
    row_labels: list[str]
    col_labels: list[str]
    values: np.ndarray
    vmin: float
    vmax: float
    title: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.size == 0:
            raise EmptyMatrix("heatmap needs a nonempty 2-D matrix")
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise EmptyMatrix(
                f"matrix {self.values.shape} does not match "
                f"{len(self.row_labels)} x {len(self.col_labels)} labels")
        if math.isinf(self.vmin) or math.isinf(self.vmax) or self.vmax < self.vmin:
            raise ValueError("color bounds must be finite with vmin <= vmax")


@dataclass
class CurveSeries:
    label: str
    x: np.ndarray
    y: np.ndarray
    band_low: np.ndarray | None = None
    band_high: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape or self.x.ndim != 1 or self.x.size == 0:
            raise EmptyMatrix("curve needs matching nonempty x and y")
        for name in ("band_low", "band_high"):
            band = getattr(self, name)
            if band is not None:
                band = np.asarray(band, dtype=np.float64)
                if band.shape != self.x.shape:
                    raise EmptyMatrix(f"{name} must match x")
                setattr(self, name, band)


_HATCH_DEFS = (
    '<defs><pattern id="miss" width="6" height="6" patternUnits="userSpaceOnUse">'
    '<rect width="6" height="6" fill="#f0f0f0"/>'
    '<path d="M0,6 L6,0" stroke="#999999" stroke-width="1"/></pattern></defs>'
)


def _svg_open(width: float, height: float) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">')


def _text(x: float, y: float, s: str, size: int = 11, anchor: str = "start",
          rotate: float | None = None) -> str:
    transform = ""
    if rotate is not None:
        transform = f' transform="rotate({_fmt(rotate)} {_fmt(x)} {_fmt(y)})"'
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" {FONT} '
            f'text-anchor="{anchor}"{transform}>{escape(s)}</text>')


def _legend(x: float, y: float, height: float, vmin: float, vmax: float) -> list[str]:
    parts = [f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="14.00" height="{_fmt(height)}" '
             f'fill="none" stroke="#333333" stroke-width="0.5"/>']
    step = height / LEGEND_STEPS
    for i in range(LEGEND_STEPS):
        t = (LEGEND_STEPS - 1 - i) / (LEGEND_STEPS - 1)
        parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y + i * step)}" width="14.00" '
                     f'height="{_fmt(step + 0.5)}" fill="{color_at(t)}"/>')
    parts.append(_text(x + 18.0, y + 9.0, _tick(vmax), size=10))
    parts.append(_text(x + 18.0, y + height, _tick(vmin), size=10))
    return parts


def render_heatmap(spec: HeatmapSpec) -> str:
    """One rect per cell, viridis fill between the declared bounds."""
    n_rows, n_cols = spec.values.shape
    left = 16.0 + 7.0 * max(len(s) for s in spec.row_labels)
    top = 40.0 if spec.title else 16.0
    bottom = 16.0 + 7.0 * max(len(s) for s in spec.col_labels)
    width = left + n_cols * CELL + 70.0
    height = top + n_rows * CELL + bottom

    parts = [_svg_open(width, height), _HATCH_DEFS,
             f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>']
    if spec.title:
        parts.append(_text(left, 24.0, spec.title, size=14))

    for i in range(n_rows):
        for j in range(n_cols):
            v = spec.values[i, j]
            if math.isnan(v):
                fill = "url(#miss)"
            else:
                fill = color_at(normalize(v, spec.vmin, spec.vmax))
            parts.append(f'<rect x="{_fmt(left + j * CELL)}" y="{_fmt(top + i * CELL)}" '
                         f'width="{_fmt(CELL)}" height="{_fmt(CELL)}" fill="{fill}"/>')

    for i, label in enumerate(spec.row_labels):
        parts.append(_text(left - 6.0, top + i * CELL + CELL / 2 + 4.0, label,
                           size=10, anchor="end"))
    # decimate column ticks deterministically when the axis is crowded
    stride = max(1, math.ceil(n_cols / 24))
    for j, label in enumerate(spec.col_labels):
        if j % stride:
            continue
        cx = left + j * CELL + CELL / 2
        cy = top + n_rows * CELL + 12.0
        parts.append(_text(cx, cy, label, size=10, anchor="end", rotate=-45.0))

    parts.extend(_legend(left + n_cols * CELL + 16.0, top, max(n_rows * CELL, 40.0),
                         spec.vmin, spec.vmax))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _axis_range(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise EmptyMatrix("no finite values to scale an axis to")
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def render_curves(series: list[CurveSeries], title: str = "",
                  x_label: str = "", y_label: str = "") -> str:
    """Line chart with optional per-series confidence bands.

    NaN samples break the polyline into segments; series colors are drawn
    from evenly spaced points of the fixed colormap.
    """
    if not series:
        raise EmptyMatrix("no series to draw")
    all_x = np.concatenate([s.x for s in series])
    all_y = np.concatenate([s.y for s in series] +
                           [s.band_low for s in series if s.band_low is not None] +
                           [s.band_high for s in series if s.band_high is not None])
    x_lo, x_hi = _axis_range(all_x)
    y_lo, y_hi = _axis_range(all_y)

    left, top, plot_w, plot_h = 60.0, 40.0 if title else 16.0, 420.0, 260.0
    width = left + plot_w + 130.0
    height = top + plot_h + 50.0

    def sx(v: float) -> float:
        return left + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [_svg_open(width, height),
             f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
             f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(plot_w)}" '
             f'height="{_fmt(plot_h)}" fill="none" stroke="#333333" stroke-width="1"/>']
    if title:
        parts.append(_text(left, 24.0, title, size=14))

    for k in range(5):
        fx = x_lo + (x_hi - x_lo) * k / 4
        fy = y_lo + (y_hi - y_lo) * k / 4
        parts.append(f'<line x1="{_fmt(sx(fx))}" y1="{_fmt(top)}" x2="{_fmt(sx(fx))}" '
                     f'y2="{_fmt(top + plot_h)}" stroke="#dddddd" stroke-width="0.5"/>')
        parts.append(f'<line x1="{_fmt(left)}" y1="{_fmt(sy(fy))}" x2="{_fmt(left + plot_w)}" '
                     f'y2="{_fmt(sy(fy))}" stroke="#dddddd" stroke-width="0.5"/>')
        parts.append(_text(sx(fx), top + plot_h + 16.0, _tick(fx), size=10, anchor="middle"))
        parts.append(_text(left - 6.0, sy(fy) + 4.0, _tick(fy), size=10, anchor="end"))
    if x_label:
        parts.append(_text(left + plot_w / 2, height - 10.0, x_label, size=11,
                           anchor="middle"))
    if y_label:
        parts.append(_text(16.0, top + plot_h / 2, y_label, size=11, anchor="middle",
                           rotate=-90.0))

    n = len(series)
    for idx, s in enumerate(series):
        t = 0.1 + 0.8 * (idx / (n - 1) if n > 1 else 0.5)
        color = color_at(t)
        if s.band_low is not None and s.band_high is not None:
            ok = np.isfinite(s.band_low) & np.isfinite(s.band_high) & np.isfinite(s.x)
            if np.any(ok):
                fwd = [f"{_fmt(sx(x))},{_fmt(sy(y))}"
                       for x, y in zip(s.x[ok], s.band_high[ok])]
                rev = [f"{_fmt(sx(x))},{_fmt(sy(y))}"
                       for x, y in zip(s.x[ok][::-1], s.band_low[ok][::-1])]
                parts.append(f'<polygon points="{" ".join(fwd + rev)}" fill="{color}" '
                             f'opacity="0.18"/>')
        def flush(segment: list[str]) -> None:
            # a segment stranded between gaps still deserves a mark
            if len(segment) > 1:
                parts.append(f'<polyline points="{" ".join(segment)}" fill="none" '
                             f'stroke="{color}" stroke-width="1.5"/>')
            elif len(segment) == 1:
                cx, cy = segment[0].split(",")
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')

        segment: list[str] = []
        for x, y in zip(s.x, s.y):
            if math.isnan(x) or math.isnan(y):
                flush(segment)
                segment = []
                continue
            segment.append(f"{_fmt(sx(x))},{_fmt(sy(y))}")
        flush(segment)
        ly = top + 14.0 + 16.0 * idx
        lx = left + plot_w + 14.0
        parts.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4.0)}" x2="{_fmt(lx + 18.0)}" '
                     f'y2="{_fmt(ly - 4.0)}" stroke="{color}" stroke-width="2"/>')
        parts.append(_text(lx + 24.0, ly, s.label, size=10))

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
