"""Minimal fixed-layout SVG line plots (no plotting dependency)."""

from __future__ import annotations

from html import escape

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot(series, markers=(), title="", xlabel="a", ylabel="", step=False) -> str:
    """``series``: list of ``(xs, ys, label)``; ``markers``: list of ``(x, y, label)``.

    With ``step=True`` each series is drawn as a right-continuous step function.
    """
    xs = [x for s in series for x in s[0]] + [m[0] for m in markers]
    ys = [y for s in series for y in s[1]] + [m[1] for m in markers]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{top + ph + 15}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{left - 5}" y="{py(t) + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    colours = ("#1f4e9c", "#b5321f", "#2a7a3b", "#6b3fa0")
    for k, (sx, sy, label) in enumerate(series):
        pts = []
        for i, (x, y) in enumerate(zip(sx, sy)):
            if step and i:
                pts.append(f"{px(x):.2f},{py(sy[i - 1]):.2f}")
            pts.append(f"{px(x):.2f},{py(y):.2f}")
        colour = colours[k % len(colours)]
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{left + pw - 5}" y="{top + 14 + 14 * k}" text-anchor="end" '
                   f'fill="{colour}">{escape(label)}</text>')
    for x, y, label in markers:
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="none" stroke="black"/>')
        out.append(f'<text x="{px(x) + 6:.2f}" y="{py(y) - 6:.2f}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
