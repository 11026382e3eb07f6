"""Minimal hand-written SVG line charts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass(frozen=True)
class Line:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(lines: Sequence[Line], title: str = "", width: int = 720, height: int = 360) -> str:
    """Render ``lines`` on shared axes; one ``<path>`` element per line."""
    if not lines:
        raise ValueError("nothing to plot")
    xs = [float(v) for ln in lines for v in ln.x]
    ys = [float(v) for ln in lines for v in ln.y]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left - 5}" y="{top + ph}" text-anchor="end" font-size="10">{y0:.4g}</text>',
        f'<text x="{left - 5}" y="{top + 10}" text-anchor="end" font-size="10">{y1:.4g}</text>',
    ]
    for n, ln in enumerate(lines):
        pts = [f"{_fmt(px(float(x)))},{_fmt(py(float(y)))}" for x, y in zip(ln.x, ln.y)]
        if not pts:
            continue
        d = "M" + " L".join(pts)
        color = PALETTE[n % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if ln.dashed else ""
        out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}>'
                   f"<title>{escape(ln.label)}</title></path>")
        out.append(f'<text x="{left + 10}" y="{top + 14 * (n + 1)}" font-size="11" '
                   f'fill="{color}">{escape(ln.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
