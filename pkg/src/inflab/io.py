"""Atomic file output: CSV with round-trip doubles, and plain SVG line plots."""

import math
import os
import tempfile
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["format_cell", "atomic_write_text", "write_csv", "read_csv", "svg_line_plot"]


def format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(format_cell(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """``(header, float array)`` of a CSV written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _ticks(lo, hi, count=5):
    span = hi - lo
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def svg_line_plot(series, xlabel, ylabel, title, marks=(), size=(640, 420)):
    """Self-contained SVG of one or more ``(label, x, y)`` polylines.

    ``marks`` are ``(x, y)`` points drawn as dots.
    """
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    W, H = size
    left, right, top, bottom = 70, 20, 40, 55
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = 0.0 if ys.min() >= 0 else float(ys.min()), float(ys.max()) * 1.05

    def px(x):
        return left + (x - x0) / (x1 - x0) * (W - left - right)

    def py(y):
        return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{H - bottom}" x2="{W - right}" y2="{H - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{H - bottom}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{H - bottom}" x2="{px(t):.2f}" '
                   f'y2="{H - bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{H - bottom + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{(left + W - right) / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(top + H - bottom) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(top + H - bottom) / 2:.1f})">{escape(ylabel)}</text>')
    for k, (label, x, y) in enumerate(series):
        color = palette[k % len(palette)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = top + 16 * k + 8
        out.append(f'<line x1="{W - right - 150}" y1="{ly}" x2="{W - right - 125}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - right - 120}" y="{ly + 4}">{escape(label)}</text>')
    for a, b in marks:
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="4" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
