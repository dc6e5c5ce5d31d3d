"""Standalone SVG charts written as plain text (no plotting dependency)."""
from __future__ import annotations

from typing import Sequence, Union
from xml.sax.saxutils import escape

from .analytics import QuarterStats, TrendSeries

WIDTH, HEIGHT = 800, 420
LEFT, RIGHT, TOP, BOTTOM = 110, 30, 50, 70


class ChartError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _denars(n: float) -> str:
    return f"{int(round(n)):,}".replace(",", ".")


def _frame(title: str, x_label: str, y_label: str, y_max: float) -> list[str]:
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<text class="axis-label" x="{LEFT + plot_w / 2:.0f}" y="{HEIGHT - 15}" '
        f'text-anchor="middle">{escape(x_label)}</text>',
        f'<text class="axis-label" x="18" y="{TOP + plot_h / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + plot_h / 2:.0f})">{escape(y_label)}</text>',
    ]
    for i in range(5):
        value = y_max * i / 4
        y = TOP + plot_h - plot_h * i / 4
        out.append(f'<line class="tick" x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text class="tick-label" x="{LEFT - 8}" y="{_fmt(y + 4)}" '
                   f'text-anchor="end">{_denars(value)}</text>')
    return out


def _trend_svg(series: TrendSeries) -> str:
    if not series.points:
        raise ChartError("cannot chart an empty series")
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    days = [d.toordinal() for d, _ in series.points]
    lo, hi = min(days), max(days)
    y_max = max(a for _, a in series.points) or 1
    span = hi - lo

    def x_of(day: int) -> float:
        return LEFT + (plot_w / 2 if span == 0 else plot_w * (day - lo) / span)

    def y_of(amount: float) -> float:
        return TOP + plot_h - plot_h * amount / y_max

    out = _frame(f"Contracts of {series.label}", "Contract date", "Amount (MKD)", y_max)
    first, last = series.points[0][0], series.points[-1][0]
    out.append(f'<text class="tick-label" x="{_fmt(x_of(lo))}" y="{TOP + plot_h + 18}" '
               f'text-anchor="middle">{first.isoformat()}</text>')
    if span:
        out.append(f'<text class="tick-label" x="{_fmt(x_of(hi))}" y="{TOP + plot_h + 18}" '
                   f'text-anchor="middle">{last.isoformat()}</text>')
    coords = " ".join(f"{_fmt(x_of(d))},{_fmt(y_of(a))}" for d, (_, a) in zip(days, series.points))
    out.append(f'<polyline class="trend" points="{coords}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    for d, (date, amount) in zip(days, series.points):
        out.append(f'<circle class="point" cx="{_fmt(x_of(d))}" cy="{_fmt(y_of(amount))}" r="3.5" '
                   f'fill="steelblue"><title>{date.isoformat()}: {_denars(amount)} MKD</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _quarterly_svg(rows: Sequence[QuarterStats]) -> str:
    if not rows:
        raise ChartError("cannot chart an empty list of quarters")
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    y_max = max(r.total for r in rows) or 1
    slot = plot_w / len(rows)
    bar_w = slot * 0.7
    out = _frame("Quarterly procurement amounts", "Quarter", "Total amount (MKD)", y_max)
    label_every = max(1, len(rows) // 12)
    for i, r in enumerate(rows):
        h = plot_h * r.total / y_max
        x = LEFT + slot * i + (slot - bar_w) / 2
        out.append(f'<rect class="bar" x="{_fmt(x)}" y="{_fmt(TOP + plot_h - h)}" width="{_fmt(bar_w)}" '
                   f'height="{_fmt(h)}" fill="darkorange"><title>{r.label}: {r.count} contracts, '
                   f'{_denars(r.total)} MKD</title></rect>')
        if i % label_every == 0:
            out.append(f'<text class="tick-label" x="{_fmt(x + bar_w / 2)}" y="{TOP + plot_h + 18}" '
                       f'text-anchor="middle">{r.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg_chart(data: Union[TrendSeries, Sequence[QuarterStats]]) -> str:
    """Line-and-marker chart for a trend series, bar chart for quarters."""
    if isinstance(data, TrendSeries):
        return _trend_svg(data)
    rows = list(data)
    if rows and not all(isinstance(r, QuarterStats) for r in rows):
        raise ChartError("expected a TrendSeries or a list of QuarterStats")
    return _quarterly_svg(rows)
