"""Text table and self-contained SVG charts built from evaluation CSVs.

Output depends only on file contents: numbers are formatted with fixed
precision and nothing time- or locale-dependent is embedded, so rerunning
over unchanged artifacts reproduces every byte.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evalharness import DISPLAY_NAMES, SUITE, read_episode_csv, read_summary_csv, sma

TABLE_FILE = "report.txt"
SMA_CHART = "sma_rewards.svg"
COLLISION_CHART = "collision_rates.svg"
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f")
TABLE_COLUMNS = ("Configuration", "Mean Reward", "Std Reward", "Mean Collision Rate", "Std Collision Rate")


def format_table(summaries) -> str:
    rows = [TABLE_COLUMNS]
    for s in summaries:
        name = DISPLAY_NAMES.get(s.label, s.label)
        rows.append(
            (name, f"{s.mean_reward:.2f}", f"{s.std_reward:.2f}", f"{s.mean_collision_rate:.2f}", f"{s.std_collision_rate:.2f}")
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for j, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, width: int, height: int, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
            f'<text x="{width / 2:.2f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{extra}/>'
        )

    def text(self, x, y, s, anchor="middle", size=12, rotate=None):
        extra = f' transform="rotate({rotate} {_num(x)} {_num(y)})"' if rotate is not None else ""
        self.parts.append(
            f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}" font-size="{size}"{extra}>{escape(s)}</text>'
        )

    def polyline(self, xs, ys, stroke):
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="1.5"/>')

    def rect(self, x, y, w, h, fill, stroke="#000000", opacity=0.35):
        self.parts.append(
            f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" '
            f'fill="{fill}" fill-opacity="{opacity}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r, fill):
        self.parts.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{r}" fill="{fill}"/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.floor(lo / step) * step
    return np.arange(start, hi + step * 0.5, step)


def _axes(c: _Canvas, box, xlim, ylim, xlabel, ylabel, xticks=None):
    left, top, right, bottom = box
    c.line(left, bottom, right, bottom)
    c.line(left, top, left, bottom)
    (x0, x1), (y0, y1) = xlim, ylim
    for t in _ticks(y0, y1):
        if y0 - 1e-9 <= t <= y1 + 1e-9:
            y = bottom - (t - y0) / (y1 - y0) * (bottom - top)
            c.line(left - 4, y, left, y)
            c.line(left, y, right, y, stroke="#dddddd", width=0.5)
            c.text(left - 6, y + 4, f"{t:g}", anchor="end", size=10)
    if xticks is None:
        for t in _ticks(x0, x1):
            if x0 - 1e-9 <= t <= x1 + 1e-9:
                x = left + (t - x0) / (x1 - x0) * (right - left)
                c.line(x, bottom, x, bottom + 4)
                c.text(x, bottom + 16, f"{t:g}", size=10)
    c.text((left + right) / 2, bottom + 34, xlabel)
    c.text(left - 44, (top + bottom) / 2, ylabel, rotate=-90)


def sma_chart(series: dict[str, np.ndarray], window: int) -> str:
    """Line chart with one trailing-SMA series per configuration, in insertion order."""
    width, height = 760, 440
    box = (70, 40, 560, 390)
    c = _Canvas(width, height, f"SMA({window}) of episode rewards")
    smoothed = {k: sma(v, window) for k, v in series.items()}
    n = max((len(v) for v in smoothed.values()), default=1)
    values = np.concatenate([v for v in smoothed.values()]) if smoothed else np.zeros(1)
    ylo, yhi = float(min(0.0, values.min())), float(values.max())
    ticks = _ticks(ylo, yhi)
    ylo, yhi = float(ticks[0]), float(max(ticks[-1], yhi))
    xlim = (1.0, float(max(n, 2)))
    _axes(c, box, xlim, (ylo, yhi), "Episode", "Reward (SMA)")
    left, top, right, bottom = box
    for i, (label, ys) in enumerate(smoothed.items()):
        color = COLORS[i % len(COLORS)]
        xs = left + (np.arange(1, len(ys) + 1) - xlim[0]) / (xlim[1] - xlim[0]) * (right - left)
        py = bottom - (ys - ylo) / (yhi - ylo) * (bottom - top)
        c.polyline(xs, py, color)
        ly = top + 10 + 18 * i
        c.line(right + 15, ly, right + 35, ly, stroke=color, width=2)
        c.text(right + 40, ly + 4, DISPLAY_NAMES.get(label, label), anchor="start", size=11)
    return c.render()


def collision_chart(rates: dict[str, np.ndarray]) -> str:
    """Box plot of batched collision rates per configuration, with the batch values overlaid."""
    k = max(len(rates), 1)
    width, height = max(360, 110 * k + 100), 440
    box = (70, 40, width - 30, 360)
    c = _Canvas(width, height, "Distribution of collision rates")
    _axes(c, box, (0.0, 1.0), (0.0, 1.0), "", "Collision rate", xticks=[])
    left, top, right, bottom = box
    slot = (right - left) / k

    def y_of(v):
        return bottom - v * (bottom - top)

    for i, (label, vals) in enumerate(rates.items()):
        color = COLORS[i % len(COLORS)]
        cx = left + slot * (i + 0.5)
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        lo, hi = float(np.min(vals)), float(np.max(vals))
        half = min(slot * 0.3, 30)
        c.line(cx, y_of(lo), cx, y_of(q1))
        c.line(cx, y_of(q3), cx, y_of(hi))
        c.line(cx - half / 2, y_of(lo), cx + half / 2, y_of(lo))
        c.line(cx - half / 2, y_of(hi), cx + half / 2, y_of(hi))
        c.rect(cx - half, y_of(q3), 2 * half, max(y_of(q1) - y_of(q3), 0.5), color)
        c.line(cx - half, y_of(med), cx + half, y_of(med), width=2)
        # spread tied values horizontally so each batch stays visible
        for v in np.unique(vals):
            count = int(np.sum(vals == v))
            offsets = (np.arange(count) - (count - 1) / 2) * 5.0
            for off in offsets:
                c.circle(cx + half + 10 + off, y_of(float(v)), 2.0, color)
        c.text(cx, bottom + 16, DISPLAY_NAMES.get(label, label), size=10)
        c.text(cx, bottom + 30, f"mean {np.mean(vals):.2f}", size=10)
    return c.render()


def batch_rates(records, batch_size: int) -> np.ndarray:
    collided = np.array([r.collided for r in records], dtype=np.float64)
    return collided.reshape(-1, batch_size).mean(axis=1)


def write_report(out, sma_window: int = 10, batch_size: int = 10) -> dict:
    """Write the table and both charts for whatever configurations have been evaluated in ``out``."""
    out = Path(out)
    summaries = read_summary_csv(out / "summary.csv")
    order = {label: i for i, label in enumerate(SUITE)}
    summaries.sort(key=lambda s: order.get(s.label, len(order)))
    rewards, rates = {}, {}
    for s in summaries:
        path = out / f"episodes_{s.label}.csv"
        if path.exists():
            records = read_episode_csv(path)
            rewards[s.label] = np.array([r.reward for r in records])
            rates[s.label] = batch_rates(records, batch_size)
    table = format_table(summaries)
    (out / TABLE_FILE).write_text(table)
    (out / SMA_CHART).write_text(sma_chart(rewards, sma_window))
    (out / COLLISION_CHART).write_text(collision_chart(rates))
    return {"rows": len(summaries), "series": len(rewards), "table": table}
