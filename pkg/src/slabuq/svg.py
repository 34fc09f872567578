"""Minimal standalone SVG renderers for histograms and line traces."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_W, _H, _PAD = 480, 300, 40


def _frame(body: list[str], title: str, xlabel: str, ylabel: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'font-family="sans-serif" font-size="11">')
    axes = [
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD / 2}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD / 2}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2}" y="14" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="12" y="{_H / 2}" transform="rotate(-90 12 {_H / 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    return "\n".join([head, *axes, *body, "</svg>"]) + "\n"


def _scale(v, lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return a + (np.asarray(v, dtype=float) - lo) / span * (b - a)


def histogram_svg(edges, counts, path, title: str = "", xlabel: str = "", ylabel: str = "count"):
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    top = counts.max() if counts.size and counts.max() > 0 else 1.0
    xs = _scale(edges, edges[0], edges[-1], _PAD, _W - _PAD / 2)
    body = []
    for x0, x1, c in zip(xs[:-1], xs[1:], counts):
        h = (c / top) * (_H - 1.5 * _PAD)
        body.append(f'<rect x="{x0:.2f}" y="{_H - _PAD - h:.2f}" width="{max(x1 - x0, 0.5):.2f}" '
                    f'height="{h:.2f}" fill="steelblue" stroke="white" stroke-width="0.5"/>')
    body.append(f'<text x="{_PAD}" y="{_H - _PAD + 14}">{edges[0]:.4g}</text>')
    body.append(f'<text x="{_W - _PAD}" y="{_H - _PAD + 14}">{edges[-1]:.4g}</text>')
    with open(path, "w") as fh:
        fh.write(_frame(body, title, xlabel, ylabel))


def lines_svg(x, series: dict, path, title: str = "", xlabel: str = "", ylabel: str = ""):
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(v.min()) for v in ys)
    hi = max(float(v.max()) for v in ys)
    px = _scale(x, x.min(), x.max(), _PAD, _W - _PAD / 2)
    body = []
    for name, y in zip(series, ys):
        py = _scale(y, lo, hi, _H - _PAD, _PAD / 2)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        body.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1">'
                    f'<title>{escape(str(name))}</title></polyline>')
    with open(path, "w") as fh:
        fh.write(_frame(body, title, xlabel, ylabel))
