"""Minimal deterministic SVG line plots (polylines, axes, ticks, legend)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053", "#117a65")
WIDTH, HEIGHT = 720, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 40, 55


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    s = f"{v:.3g}"
    return "0" if s in ("-0", "0") else s


def line_plot(series, title="", xlabel="x", ylabel="density", ymax=None):
    """Render ``series`` to an SVG document string.

    Each series is a dict with ``x``, ``y``, ``label`` and optional ``dashed``
    (dotted stroke). Non-finite y values are dropped. Output depends only on
    the inputs.
    """
    pts = []
    for s in series:
        x = np.asarray(s["x"], dtype=float)
        y = np.asarray(s["y"], dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        pts.append((x[keep], y[keep]))
    xs = np.concatenate([p[0] for p in pts]) if pts else np.array([0.0, 1.0])
    ys = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    y0 = 0.0
    y1 = float(ymax) if ymax is not None else (float(ys.max()) * 1.05 if ys.size else 1.0)
    if y1 <= y0:
        y1 = 1.0
    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(v):
        return MARGIN_LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_TOP + ph - (min(v, y1) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN_LEFT}" y="24" font-family="sans-serif" font-size="15">'
        f"{escape(title)}</text>",
        f'<g stroke="black" stroke-width="1">'
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + ph}" x2="{MARGIN_LEFT + pw}" '
        f'y2="{MARGIN_TOP + ph}"/>'
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{MARGIN_TOP + ph}"/>'
        f"</g>",
    ]
    for v in np.linspace(x0, x1, 5):
        px = _fmt(sx(v))
        out.append(
            f'<line x1="{px}" y1="{MARGIN_TOP + ph}" x2="{px}" y2="{MARGIN_TOP + ph + 5}" '
            f'stroke="black"/><text x="{px}" y="{MARGIN_TOP + ph + 19}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{_tick_label(v)}</text>'
        )
    for v in np.linspace(y0, y1, 5):
        py = _fmt(sy(v))
        out.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{py}" x2="{MARGIN_LEFT}" y2="{py}" stroke="black"/>'
            f'<text x="{MARGIN_LEFT - 8}" y="{py}" font-family="sans-serif" font-size="11" '
            f'text-anchor="end" dominant-baseline="middle">{_tick_label(v)}</text>'
        )
    out.append(
        f'<text x="{_fmt(MARGIN_LEFT + pw / 2)}" y="{HEIGHT - 12}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{_fmt(MARGIN_TOP + ph / 2)}" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 {_fmt(MARGIN_TOP + ph / 2)})">'
        f"{escape(ylabel)}</text>"
    )
    for i, (s, (x, y)) in enumerate(zip(series, pts)):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="2,3"' if s.get("dashed") else ""
        coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, y))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{coords}"/>'
        )
        ly = MARGIN_TOP + 12 + 18 * i
        lx = WIDTH - MARGIN_RIGHT + 12
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 26}" y2="{ly}" stroke="{color}" '
            f'stroke-width="1.6"{dash}/><text x="{lx + 32}" y="{ly}" font-family="sans-serif" '
            f'font-size="11" dominant-baseline="middle">{escape(s.get("label", ""))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def step_xy(edges, values):
    """Staircase coordinates for a piecewise-constant function."""
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    x = np.repeat(edges, 2)[1:-1]
    y = np.repeat(values, 2)
    return x, y
