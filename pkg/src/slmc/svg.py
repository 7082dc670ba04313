"""Minimal static SVG plotting: line charts, scatter plots and contour lines.

Output is plain text with fixed numeric formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math
from html import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=170, top=50, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}".replace("e+0", "e").replace("e-0", "e-")
    return f"{v:g}"


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    n = int(math.floor((hi - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


class _Axes:
    """Maps data coordinates onto the plotting rectangle."""

    def __init__(self, xlim, ylim, logy=False):
        self.logy = logy
        self.x0, self.x1 = _pad_range(*xlim)
        if logy:
            lo, hi = math.log10(ylim[0]), math.log10(ylim[1])
            self.y0, self.y1 = _pad_range(lo, hi)
        else:
            self.y0, self.y1 = _pad_range(*ylim)
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        y = np.asarray(y, dtype=float)
        if self.logy:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.log10(y)
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, title, xlabel, ylabel) -> list[str]:
        out = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" height="{self.bottom - self.top}" fill="none" stroke="#000"/>',
            f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" font-size="18">{escape(title)}</text>',
            f'<text x="{(self.left + self.right) / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="14">{escape(xlabel)}</text>',
            f'<text x="20" y="{(self.top + self.bottom) / 2:.0f}" text-anchor="middle" font-size="14" '
            f'transform="rotate(-90 20 {(self.top + self.bottom) / 2:.0f})">{escape(ylabel)}</text>',
        ]
        for t in nice_ticks(self.x0, self.x1):
            x = float(self.px(t))
            out.append(f'<line x1="{_fmt(x)}" y1="{self.bottom}" x2="{_fmt(x)}" y2="{self.bottom + 5}" stroke="#000"/>')
            out.append(f'<text x="{_fmt(x)}" y="{self.bottom + 20}" text-anchor="middle" font-size="12">{_tick_label(t)}</text>')
        if self.logy:
            yt = [10.0**e for e in range(math.ceil(self.y0), math.floor(self.y1) + 1)]
        else:
            yt = nice_ticks(self.y0, self.y1)
        for t in yt:
            y = float(self.py(t))
            out.append(f'<line x1="{self.left - 5}" y1="{_fmt(y)}" x2="{self.left}" y2="{_fmt(y)}" stroke="#000"/>')
            out.append(f'<text x="{self.left - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="12">{_tick_label(t)}</text>')
        return out

    def legend(self, labels) -> list[str]:
        out = []
        for i, lab in enumerate(labels):
            y = self.top + 10 + 22 * i
            c = PALETTE[i % len(PALETTE)]
            out.append(f'<rect x="{self.right + 15}" y="{y}" width="14" height="14" fill="{c}"/>')
            out.append(f'<text x="{self.right + 35}" y="{y + 12}" font-size="13">{escape(lab)}</text>')
        return out


def _pad_range(lo, hi):
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi <= lo:
        w = abs(lo) * 0.1 or 1.0
        return lo - w, hi + w
    return lo, hi


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>', *body, "</svg>"]) + "\n"


def line_plot(series, title="", xlabel="", ylabel="", logy=False) -> str:
    """``series`` is a list of ``(label, x, y)``. Nonpositive values are
    dropped from log-scale plots; an empty list still draws the axes."""
    xs, ys = [], []
    for _, x, y in series:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y) & ((y > 0) if logy else True)
        xs.append(x[ok])
        ys.append(y[ok])
    allx = np.concatenate(xs) if xs else np.empty(0)
    ally = np.concatenate(ys) if ys else np.empty(0)
    xlim = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    ylim = (ally.min(), ally.max()) if ally.size else ((0.1, 1.0) if logy else (0.0, 1.0))
    ax = _Axes(xlim, ylim, logy)
    body = ax.frame(title, xlabel, ylabel)
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        if x.size == 0:
            continue
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(ax.px(x), ax.py(y)))
        body.append(f'<polyline fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5" points="{pts}"/>')
    body += ax.legend([s[0] for s in series])
    return _document(body)


def marching_squares(x, y, Z, level: float) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Line segments of the ``level`` set of ``Z`` sampled on the grid
    ``Z[j, i] = f(x[i], y[j])``, using linear interpolation along cell edges.
    Saddle cells are resolved with the cell-centre average."""
    x, y, Z = np.asarray(x, float), np.asarray(y, float), np.asarray(Z, float)
    segs = []

    def interp(p, q, fp, fq):
        t = (level - fp) / (fq - fp)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    for j in range(len(y) - 1):
        for i in range(len(x) - 1):
            corners = [(x[i], y[j]), (x[i + 1], y[j]), (x[i + 1], y[j + 1]), (x[i], y[j + 1])]
            vals = [Z[j, i], Z[j, i + 1], Z[j + 1, i + 1], Z[j + 1, i]]
            if not all(math.isfinite(v) for v in vals):
                continue
            above = [v > level for v in vals]
            if all(above) or not any(above):
                continue
            # Crossing points on edges (0-1, 1-2, 2-3, 3-0).
            cross = {}
            for e in range(4):
                a, b = e, (e + 1) % 4
                if above[a] != above[b]:
                    cross[e] = interp(corners[a], corners[b], vals[a], vals[b])
            edges = sorted(cross)
            if len(edges) == 2:
                segs.append((cross[edges[0]], cross[edges[1]]))
            else:
                centre_above = sum(vals) / 4.0 > level
                # Pair each crossing with its neighbour so that the centre's
                # side stays connected.
                if centre_above == above[0]:
                    segs += [(cross[0], cross[1]), (cross[2], cross[3])]
                else:
                    segs += [(cross[3], cross[0]), (cross[1], cross[2])]
    return segs


def scatter_plot(groups, title="", xlabel="", ylabel="", contour=None, xlim=None, ylim=None, max_points: int = 4000) -> str:
    """``groups`` is a list of ``(label, points)`` with ``points`` of shape
    ``(n, 2)``. ``contour`` is an optional ``(x, y, Z, levels)`` tuple drawn
    underneath the points. Each group is thinned to ``max_points`` by
    regular striding."""
    pts = [np.asarray(p, dtype=float).reshape(-1, 2) for _, p in groups]
    pts = [p[np.all(np.isfinite(p), axis=1)] for p in pts]
    allp = np.concatenate(pts) if pts else np.empty((0, 2))
    if xlim is None:
        xlim = (allp[:, 0].min(), allp[:, 0].max()) if len(allp) else (0.0, 1.0)
    if ylim is None:
        ylim = (allp[:, 1].min(), allp[:, 1].max()) if len(allp) else (0.0, 1.0)
    ax = _Axes(xlim, ylim)
    body = ax.frame(title, xlabel, ylabel)
    body.append(f'<clipPath id="plotarea"><rect x="{ax.left}" y="{ax.top}" width="{ax.right - ax.left}" height="{ax.bottom - ax.top}"/></clipPath>')
    body.append('<g clip-path="url(#plotarea)">')
    if contour is not None:
        cx, cy, Z, levels = contour
        for lev in levels:
            for (a, b), (c, d) in marching_squares(cx, cy, Z, lev):
                body.append(
                    f'<line x1="{_fmt(float(ax.px(a)))}" y1="{_fmt(float(ax.py(b)))}" '
                    f'x2="{_fmt(float(ax.px(c)))}" y2="{_fmt(float(ax.py(d)))}" stroke="#555" stroke-width="0.8"/>'
                )
    for i, p in enumerate(pts):
        if len(p) > max_points:
            p = p[:: -(-len(p) // max_points)]
        colour = PALETTE[i % len(PALETTE)]
        for a, b in zip(ax.px(p[:, 0]), ax.py(p[:, 1])):
            body.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="1.6" fill="{colour}" fill-opacity="0.5"/>')
    body.append("</g>")
    body += ax.legend([g[0] for g in groups])
    return _document(body)
