"""Minimal deterministic SVG charts.

Hand-rolled rather than matplotlib so identical inputs produce identical
bytes (no embedded dates, ids, or font metrics). Fixed-precision coordinate
formatting keeps files small and stable.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 34, 46


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("axis limits must be finite")
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (mag, 2 * mag, 2.5 * mag, 5 * mag, 10 * mag) if s >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out or [lo, hi]


class _Frame:
    def __init__(self, width, height, xlim, ylim):
        self.width, self.height = width, height
        self.xlim, self.ylim = xlim, ylim
        self.px = width - _MARGIN_L - _MARGIN_R
        self.py = height - _MARGIN_T - _MARGIN_B

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        return _MARGIN_L + (v - lo) / (hi - lo) * self.px

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        return _MARGIN_T + (hi - v) / (hi - lo) * self.py


def _limits(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _chart_header(buf, width, height, title):
    buf.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    buf.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        buf.append(
            f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )


def _axes(buf, fr: _Frame, xlabel: str, ylabel: str):
    x0, y0 = _MARGIN_L, _MARGIN_T
    x1, y1 = fr.width - _MARGIN_R, fr.height - _MARGIN_B
    buf.append(
        f'<rect x="{x0}" y="{y0}" width="{fr.px}" height="{fr.py}" '
        'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for tx in _ticks(*fr.xlim):
        px = fr.x(tx)
        buf.append(
            f'<line x1="{_fmt(px)}" y1="{y1}" x2="{_fmt(px)}" y2="{y1 + 4}" stroke="#444444"/>'
        )
        buf.append(
            f'<text x="{_fmt(px)}" y="{y1 + 17}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tx:.4g}</text>'
        )
    for ty in _ticks(*fr.ylim):
        py = fr.y(ty)
        buf.append(
            f'<line x1="{x0 - 4}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="#444444"/>'
        )
        buf.append(
            f'<text x="{x0 - 7}" y="{_fmt(py + 3.5)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{ty:.4g}</text>'
        )
    buf.append(
        f'<text x="{(x0 + x1) / 2:.0f}" y="{fr.height - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    buf.append(
        f'<text x="14" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2:.0f})">{ylabel}</text>'
    )


def line_chart(
    x,
    series: dict,
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    width: int = 720,
    height: int = 440,
) -> str:
    """Polyline chart: one line per named series over a shared x grid."""
    if not series:
        raise ValueError("need at least one series")
    x = np.asarray(x, dtype=float)
    ys = {name: np.asarray(v, dtype=float) for name, v in series.items()}
    for name, v in ys.items():
        if v.shape != x.shape:
            raise ValueError(f"series {name!r} length does not match x")
    fr = _Frame(width, height, _limits(x), _limits(np.concatenate(list(ys.values()))))
    buf: list[str] = []
    _chart_header(buf, width, height, title)
    _axes(buf, fr, xlabel, ylabel)
    for idx, (name, v) in enumerate(ys.items()):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{_fmt(fr.x(a))},{_fmt(fr.y(b))}" for a, b in zip(x, v))
        buf.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = _MARGIN_T + 16 + 16 * idx
        lx = width - _MARGIN_R - 150
        buf.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        buf.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" font-size="11">{name}</text>'
        )
    buf.append("</svg>")
    return "\n".join(buf) + "\n"


def points_chart(
    x,
    y,
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    width: int = 720,
    height: int = 440,
) -> str:
    """Scatter of (x, y) pairs as small circles (used for cloud drops)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y lengths differ")
    fr = _Frame(width, height, _limits(x), _limits(y))
    buf: list[str] = []
    _chart_header(buf, width, height, title)
    _axes(buf, fr, xlabel, ylabel)
    for a, b in zip(x, y):
        buf.append(
            f'<circle cx="{_fmt(fr.x(a))}" cy="{_fmt(fr.y(b))}" r="1.4" '
            f'fill="{PALETTE[0]}" fill-opacity="0.55"/>'
        )
    buf.append("</svg>")
    return "\n".join(buf) + "\n"


def _diverging_color(v: float, vmax: float) -> str:
    if vmax <= 0:
        return "#ffffff"
    t = max(-1.0, min(1.0, v / vmax))
    if t >= 0:
        rgb = (int(255 - 155 * t), int(255 - 200 * t), 255)
    else:
        rgb = (255, int(255 + 200 * t), int(255 + 155 * t))
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def cell_grid_chart(
    matrix,
    extent: tuple[float, float, float, float],
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    width: int = 560,
    height: int = 560,
) -> str:
    """Piecewise-constant cell map (the relay staircase seen from above).

    ``matrix[i, j]`` colors the cell with x in the i-th and y in the j-th
    equal subdivision of extent = (xlo, xhi, ylo, yhi); cells are labeled
    with their values.
    """
    m = np.asarray(matrix, dtype=float)
    ni, nj = m.shape
    xlo, xhi, ylo, yhi = extent
    fr = _Frame(width, height, (xlo, xhi), (ylo, yhi))
    vmax = float(np.abs(m).max()) or 1.0
    buf: list[str] = []
    _chart_header(buf, width, height, title)
    for i in range(ni):
        for j in range(nj):
            x0 = fr.x(xlo + i * (xhi - xlo) / ni)
            x1 = fr.x(xlo + (i + 1) * (xhi - xlo) / ni)
            y1 = fr.y(ylo + j * (yhi - ylo) / nj)
            y0 = fr.y(ylo + (j + 1) * (yhi - ylo) / nj)
            buf.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
                f'height="{_fmt(y1 - y0)}" fill="{_diverging_color(m[i, j], vmax)}" '
                'stroke="#666666" stroke-width="0.8"/>'
            )
            buf.append(
                f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt((y0 + y1) / 2 + 3.5)}" '
                'text-anchor="middle" font-family="sans-serif" '
                f'font-size="11">{m[i, j]:.3g}</text>'
            )
    _axes(buf, fr, xlabel, ylabel)
    buf.append("</svg>")
    return "\n".join(buf) + "\n"
