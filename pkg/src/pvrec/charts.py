"""Self-contained SVG line charts for evaluation reports.

Assembled from fixed-format strings so identical inputs give identical
bytes; no plotting library is involved.
"""

from __future__ import annotations

from typing import Sequence, TextIO

from .evaluation import EvalReport

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf"]

_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 60, 200, 40, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_line_chart(series: Sequence[tuple[str, Sequence[tuple[float, float]]]],
                      title: str, x_label: str, y_label: str) -> str:
    """Polyline chart of (x, y) series with y fixed to [0, 1]."""
    xs = sorted({x for _, pts in series for x, _ in pts})
    if not xs:
        xs = [0.0, 1.0]
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_max = x_min + 1.0
    plot_w = _W - _LEFT - _RIGHT
    plot_h = _H - _TOP - _BOTTOM

    def px(x: float) -> float:
        return _LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return _TOP + (1.0 - y) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_LEFT}" y="20" font-size="14">{title}</text>',
    ]
    for i in range(6):
        y = i / 5.0
        parts.append(f'<line x1="{_LEFT}" y1="{_fmt(py(y))}" x2="{_LEFT + plot_w}" '
                     f'y2="{_fmt(py(y))}" stroke="#dddddd"/>')
        parts.append(f'<text x="{_LEFT - 8}" y="{_fmt(py(y) + 4)}" text-anchor="end">{_fmt(y)}</text>')
    for x in xs:
        parts.append(f'<line x1="{_fmt(px(x))}" y1="{_TOP + plot_h}" x2="{_fmt(px(x))}" '
                     f'y2="{_TOP + plot_h + 4}" stroke="#333333"/>')
        parts.append(f'<text x="{_fmt(px(x))}" y="{_TOP + plot_h + 18}" '
                     f'text-anchor="middle">{x:g}</text>')
    parts.append(f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + plot_h}" stroke="#333333"/>')
    parts.append(f'<line x1="{_LEFT}" y1="{_TOP + plot_h}" x2="{_LEFT + plot_w}" '
                 f'y2="{_TOP + plot_h}" stroke="#333333"/>')
    parts.append(f'<text x="{_LEFT + plot_w // 2}" y="{_H - 10}" text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="16" y="{_TOP + plot_h // 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_TOP + plot_h // 2})">{y_label}</text>')
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{color}"/>')
        ly = _TOP + 14 * i
        lx = _LEFT + plot_w + 14
        parts.append(f'<line x1="{lx}" y1="{ly + 5}" x2="{lx + 18}" y2="{ly + 5}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly + 9}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def recall_chart_for_t(report: EvalReport, t, title: str) -> str:
    """Recall-vs-n chart for one cut (or the 'overall' rows)."""
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for row in report.rows:
        if row.t != t:
            continue
        series.setdefault((row.algorithm, row.config), []).append((float(row.n), row.recall))
    algo_counts: dict[str, int] = {}
    for alg, _ in series:
        algo_counts[alg] = algo_counts.get(alg, 0) + 1
    named = []
    for (alg, config), pts in series.items():
        label = alg if algo_counts[alg] == 1 else f"{alg} [{config}]"
        named.append((label, sorted(pts)))
    return render_line_chart(named, title, "n", "recall")


def write_recall_chart(stream: TextIO, report: EvalReport, t, title: str) -> None:
    stream.write(recall_chart_for_t(report, t, title))
