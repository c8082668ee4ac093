"""Minimal self-contained SVG line charts with a log-scaled y axis."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

__all__ = ["error_curve_svg"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
PANEL_W, PANEL_H = 420, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 36, 44


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _panel(x0: float, title: str, series: Mapping[str, Sequence[tuple[int, float]]]) -> list[str]:
    pts = [(b, v) for s in series.values() for b, v in s if v is not None and v > 0 and math.isfinite(v)]
    out = [f'<g transform="translate({_fmt(x0)},0)">']
    out.append(f'<text x="{_fmt(PANEL_W / 2)}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    plot_w = PANEL_W - MARGIN_L - MARGIN_R
    plot_h = PANEL_H - MARGIN_T - MARGIN_B
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>')
    if not pts:
        out.append("</g>")
        return out
    b_lo = min(b for b, _ in pts)
    b_hi = max(b for b, _ in pts)
    if b_hi == b_lo:
        b_hi = b_lo + 1
    d_lo = math.floor(math.log10(min(v for _, v in pts)))
    d_hi = math.ceil(math.log10(max(v for _, v in pts)))
    if d_hi == d_lo:
        d_hi += 1

    def sx(b):
        return MARGIN_L + (b - b_lo) / (b_hi - b_lo) * plot_w

    def sy(v):
        return MARGIN_T + (d_hi - math.log10(v)) / (d_hi - d_lo) * plot_h

    for d in range(d_lo, d_hi + 1):
        y = sy(10.0**d)
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{_fmt(y)}" x2="{MARGIN_L}" y2="{_fmt(y)}" stroke="#000"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">1e{d}</text>')
    for b in sorted({b_lo, b_hi, (b_lo + b_hi) // 2}):
        x = sx(b)
        out.append(f'<text x="{_fmt(x)}" y="{PANEL_H - MARGIN_B + 16}" text-anchor="middle" font-size="11">{b}</text>')
    out.append(
        f'<text x="{_fmt(MARGIN_L + plot_w / 2)}" y="{PANEL_H - 8}" text-anchor="middle" font-size="12">batch b</text>'
    )
    for k, (name, s) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        coords = [f"{_fmt(sx(b))},{_fmt(sy(v))}" for b, v in s if v is not None and v > 0 and math.isfinite(v)]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(coords)}"/>')
        ly = MARGIN_T + 14 + 16 * k
        out.append(f'<line x1="{PANEL_W - 130}" y1="{ly}" x2="{PANEL_W - 110}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{PANEL_W - 105}" y="{ly + 4}" font-size="11">{name}</text>')
    out.append("</g>")
    return out


def error_curve_svg(l2: Mapping[str, Sequence[tuple[int, float]]], scaled: Mapping[str, Sequence[tuple[int, float]]]) -> str:
    """Two panels: median l2 error and median scaled error against ``b``, one line per method."""
    width = 2 * PANEL_W
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" '
        'font-family="sans-serif">',
        f'<rect width="{width}" height="{PANEL_H}" fill="#fff"/>',
    ]
    lines += _panel(0, "median l2 error", l2)
    lines += _panel(PANEL_W, "median scaled error", scaled)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
