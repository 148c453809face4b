"""Standalone SVG regret plots (deterministic text output)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = {"sclub": "red", "club": "black", "linucb_one": "green", "linucb_ind": "yellow"}
LABELS = {"sclub": "SCLUB", "club": "CLUB", "linucb_one": "LinUCB-One", "linucb_ind": "LinUCB-Ind"}
N_ERRORBARS = 8

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 20, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(float(round(v / step) * step))
        v += step
    return ticks


def plot_regret(results, title: str = "Cumulative regret") -> str:
    """Render aggregate traces as one SVG document.

    ``results`` is an iterable of :class:`~bandit_clusters.harness.AggregateResult`.
    """
    results = list(results)
    if not results:
        raise ValueError("nothing to plot")
    x_max = max(float(r.rounds[-1]) for r in results)
    y_max = max(float(np.max(r.mean_trace + r.stderr_trace)) for r in results)
    y_max = y_max if y_max > 0 else 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + pw * x / x_max

    def sy(y):
        return TOP + ph * (1.0 - y / y_max)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="14" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for t in _nice_ticks(0.0, x_max):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{TOP + ph}" x2="{_fmt(sx(t))}" '
                   f'y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{t:g}</text>')
    for t in _nice_ticks(0.0, y_max):
        out.append(f'<line x1="{LEFT - 4}" y1="{_fmt(sy(t))}" x2="{LEFT}" y2="{_fmt(sy(t))}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(t) + 3)}" text-anchor="end" '
                   f'font-size="10">{t:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">round</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">cumulative regret</text>')

    for r in results:
        color = COLORS.get(r.algorithm, "gray")
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(r.rounds, r.mean_trace))
        out.append(f'<polyline class="trace" data-algorithm="{escape(r.algorithm)}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        n = len(r.rounds)
        idx = np.unique(np.linspace(0, n - 1, N_ERRORBARS).round().astype(int))
        for i in idx:
            x, y, e = sx(r.rounds[i]), r.mean_trace[i], r.stderr_trace[i]
            out.append(f'<line class="errorbar" x1="{_fmt(x)}" y1="{_fmt(sy(y - e))}" '
                       f'x2="{_fmt(x)}" y2="{_fmt(sy(y + e))}" stroke="{color}"/>')

    for k, r in enumerate(results):
        y = TOP + 12 + 16 * k
        color = COLORS.get(r.algorithm, "gray")
        label = LABELS.get(r.algorithm, r.algorithm)
        out.append(f'<line x1="{LEFT + 10}" y1="{y}" x2="{LEFT + 30}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{LEFT + 35}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
