"""Dependency-free SVG 1.1 figures for curves and bar charts.

Output is deterministic: coordinates are rounded to fixed precision before
formatting, colors come from a fixed palette keyed by method name so the
same method looks the same in every figure, and each file carries the config
hash and seed in its <desc> element.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

PALETTE = {
    "Gradient": "#1f77b4",
    "InputXGradient": "#ff7f0e",
    "Saliency": "#2ca02c",
    "IntegratedGradients": "#d62728",
    "SmoothGrad": "#9467bd",
    "GuidedBackprop": "#8c564b",
    "GradCAM": "#e377c2",
    "GradientSHAP": "#7f7f7f",
    "LRP_Epsilon": "#bcbd22",
    "LRP_ZPlus": "#17becf",
    "RandomBaseline": "#333333",
    "ModelEntropy": "#888888",
}
_FALLBACK_COLORS = ("#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5")


def method_color(name: str) -> str:
    if name in PALETTE:
        return PALETTE[name]
    return _FALLBACK_COLORS[sum(name.encode()) % len(_FALLBACK_COLORS)]


@dataclass
class Series:
    """One plotted line: values per stage, optional per-stage std whiskers."""

    label: str
    values: list
    std: list | None = None
    color: str | None = None
    dash: str | None = None

    def resolved_color(self) -> str:
        return self.color or method_color(self.label.split(" ")[0])


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _finite(values) -> list:
    return [v for v in values if v is not None and math.isfinite(v)]


def _nice_ticks(lo: float, hi: float, target: int = 5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mag * mult
        if raw <= step:
            break
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 0.5:
        ticks.append(round(t, 10))
        t += step
    return ticks


class _Canvas:
    def __init__(self, width: int, height: int, title: str, config_hash: str, seed):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
            f"<desc>config={config_hash} seed={seed}</desc>",
            f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
            f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" font-size="14" '
            f'fill="#111111">{_esc(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def text(self, x: float, y: float, s: str, size: int = 10, anchor: str = "middle",
             color: str = "#333333") -> None:
        self.add(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
                 f'font-size="{size}" fill="{color}">{_esc(s)}</text>')

    def line(self, x1, y1, x2, y2, color: str = "#cccccc", width: float = 1.0,
             dash: str | None = None) -> None:
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                 f'stroke="{color}" stroke-width="{width}"{d}/>')

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _write(svg: str, path: str | None) -> str:
    if path:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return svg


def _legend(canvas: _Canvas, series: list, x: float, y: float) -> None:
    for i, s in enumerate(series):
        yy = y + 16 * i
        canvas.line(x, yy - 4, x + 22, yy - 4, color=s.resolved_color(), width=2.0,
                    dash=s.dash)
        canvas.text(x + 28, yy, s.label, size=10, anchor="start")


def line_plot(series: list, stage_labels: list, title: str, ylabel: str,
              path: str | None = None, config_hash: str = "", seed=0,
              ceiling: float | None = None, ceiling_label: str = "") -> str:
    """Stage-indexed line figure; NaN values break the line into segments."""
    width, height = 680, 400
    left, right, top, bottom = 62.0, width - 170.0, 46.0, height - 58.0
    canvas = _Canvas(width, height, title, config_hash, seed)

    pool = []
    for s in series:
        pool.extend(_finite(s.values))
        if s.std:
            pool.extend(_finite([v + d for v, d in zip(s.values, s.std)]))
            pool.extend(_finite([v - d for v, d in zip(s.values, s.std)]))
    if ceiling is not None:
        pool.append(ceiling)
    lo = min(pool) if pool else 0.0
    hi = max(pool) if pool else 1.0
    pad = (hi - lo) * 0.05 or 0.5
    ticks = _nice_ticks(lo - pad, hi + pad)
    lo, hi = ticks[0], ticks[-1]

    n = max(len(stage_labels), 2)
    def sx(i: float) -> float:
        return left + (right - left) * i / (n - 1)
    def sy(v: float) -> float:
        return bottom - (bottom - top) * (v - lo) / (hi - lo)

    for t in ticks:
        canvas.line(left, sy(t), right, sy(t))
        canvas.text(left - 8, sy(t) + 3, f"{t:g}", anchor="end")
    for i, label in enumerate(stage_labels):
        canvas.text(sx(i), bottom + 16, label, size=9)
    canvas.line(left, top, left, bottom, color="#444444")
    canvas.line(left, bottom, right, bottom, color="#444444")
    canvas.add(f'<text x="16" y="{_fmt((top + bottom) / 2)}" text-anchor="middle" '
               f'font-size="11" fill="#333333" transform="rotate(-90 16 '
               f'{_fmt((top + bottom) / 2)})">{_esc(ylabel)}</text>')

    if ceiling is not None:
        canvas.line(left, sy(ceiling), right, sy(ceiling), color="#999999", width=1.2,
                    dash="7,4")
        if ceiling_label:
            canvas.text(right - 4, sy(ceiling) - 5, ceiling_label, size=9, anchor="end")

    for s in series:
        color = s.resolved_color()
        segment = []
        for i, v in enumerate(s.values):
            if v is None or not math.isfinite(v):
                segment = _flush_segment(canvas, segment, color, s.dash)
                continue
            segment.append((sx(i), sy(v)))
            if s.std is not None and math.isfinite(s.std[i]) and s.std[i] > 0:
                canvas.line(sx(i), sy(v - s.std[i]), sx(i), sy(v + s.std[i]),
                            color=color, width=0.8)
        _flush_segment(canvas, segment, color, s.dash)

    _legend(canvas, series, right + 14, top + 10)
    return _write(canvas.finish(), path)


def _flush_segment(canvas: _Canvas, segment: list, color: str, dash: str | None):
    if len(segment) == 1:
        x, y = segment[0]
        canvas.add(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.2" fill="{color}"/>')
    elif segment:
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in segment)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        canvas.add(f'<polyline points="{points}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8"{d}/>')
    return []


def bar_chart(items: list, title: str, ylabel: str, path: str | None = None,
              config_hash: str = "", seed=0, errors: list | None = None) -> str:
    """Vertical bars from (label, value) or (label, value, color) items."""
    width, height = 680, 400
    left, right, top, bottom = 62.0, width - 30.0, 46.0, height - 84.0
    canvas = _Canvas(width, height, title, config_hash, seed)

    values = [item[1] for item in items]
    pool = _finite(values) + [0.0]
    if errors:
        pool += _finite([v + e for v, e in zip(values, errors)])
    ticks = _nice_ticks(min(pool), max(pool) * 1.08 if max(pool) > 0 else 1.0)
    lo, hi = ticks[0], ticks[-1]

    def sy(v: float) -> float:
        return bottom - (bottom - top) * (v - lo) / (hi - lo)

    for t in ticks:
        canvas.line(left, sy(t), right, sy(t))
        canvas.text(left - 8, sy(t) + 3, f"{t:g}", anchor="end")
    canvas.line(left, top, left, bottom, color="#444444")
    canvas.line(left, sy(max(lo, 0.0)), right, sy(max(lo, 0.0)), color="#444444")
    canvas.add(f'<text x="16" y="{_fmt((top + bottom) / 2)}" text-anchor="middle" '
               f'font-size="11" fill="#333333" transform="rotate(-90 16 '
               f'{_fmt((top + bottom) / 2)})">{_esc(ylabel)}</text>')

    n = len(items)
    slot = (right - left) / max(n, 1)
    bar_w = slot * 0.62
    zero = sy(max(lo, 0.0))
    for i, item in enumerate(items):
        label, value = item[0], item[1]
        color = item[2] if len(item) > 2 and item[2] else method_color(label.split(" ")[0])
        cx = left + slot * (i + 0.5)
        if value is not None and math.isfinite(value):
            y = sy(value)
            y0, y1 = (y, zero) if value >= 0 else (zero, y)
            canvas.add(f'<rect x="{_fmt(cx - bar_w / 2)}" y="{_fmt(y0)}" '
                       f'width="{_fmt(bar_w)}" height="{_fmt(max(y1 - y0, 0.5))}" '
                       f'fill="{color}"/>')
            canvas.text(cx, y0 - 5 if value >= 0 else y1 + 12, f"{value:.3g}", size=9)
            if errors and math.isfinite(errors[i]) and errors[i] > 0:
                canvas.line(cx, sy(value - errors[i]), cx, sy(value + errors[i]),
                            color="#222222", width=1.0)
        text_y = bottom + 14
        for part in str(label).split("\n"):
            canvas.text(cx, text_y, part, size=9)
            text_y += 11
    return _write(canvas.finish(), path)
