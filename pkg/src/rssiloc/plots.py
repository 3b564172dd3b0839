"""Static SVG bar charts for experiment reports.

Charts are rendered by direct string assembly (no plotting library) so
identical report inputs always produce byte-identical SVG files.
"""

from __future__ import annotations

import json

from .errors import ParseError

_SERIES_COLORS = ("#4878a8", "#e49444", "#5ba053", "#b04a4a", "#8a6bb8")
_WIDTH, _HEIGHT = 640, 360
_MARGIN_LEFT, _MARGIN_BOTTOM, _MARGIN_TOP = 70, 60, 40


def svg_bar_chart(title: str, y_label: str, labels: list[str],
                  series: dict[str, list[float]]) -> str:
    """Grouped vertical bar chart; one bar per (label, series) pair."""
    if not labels or not series:
        raise ValueError("chart needs at least one label and one series")
    for name, values in series.items():
        if len(values) != len(labels):
            raise ValueError(f"series {name!r} has {len(values)} values for "
                             f"{len(labels)} labels")
    peak = max(max(vals) for vals in series.values())
    peak = peak if peak > 0 else 1.0
    plot_w = _WIDTH - _MARGIN_LEFT - 20
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    group_w = plot_w / len(labels)
    bar_w = group_w * 0.8 / len(series)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<text x="16" y="{_MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2:.1f})">{y_label}</text>',
    ]
    # y axis with 5 ticks
    for tick in range(6):
        value = peak * tick / 5
        y = _MARGIN_TOP + plot_h * (1 - tick / 5)
        out.append(f'<line x1="{_MARGIN_LEFT}" y1="{y:.1f}" '
                   f'x2="{_WIDTH - 20}" y2="{y:.1f}" stroke="#dddddd"/>')
        out.append(f'<text x="{_MARGIN_LEFT - 6}" y="{y + 4:.1f}" '
                   f'text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{value:.3g}</text>')

    for li, label in enumerate(labels):
        for si, (name, values) in enumerate(series.items()):
            value = values[li]
            h = plot_h * value / peak
            x = _MARGIN_LEFT + li * group_w + group_w * 0.1 + si * bar_w
            y = _MARGIN_TOP + plot_h - h
            color = _SERIES_COLORS[si % len(_SERIES_COLORS)]
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                       f'height="{h:.1f}" fill="{color}"/>')
            out.append(f'<text x="{x + bar_w / 2:.1f}" y="{y - 4:.1f}" '
                       f'text-anchor="middle" font-family="sans-serif" '
                       f'font-size="9">{value:.3g}</text>')
        x_mid = _MARGIN_LEFT + li * group_w + group_w / 2
        out.append(f'<text x="{x_mid:.1f}" y="{_HEIGHT - _MARGIN_BOTTOM + 18}" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12">{label}</text>')
    if len(series) > 1:
        for si, name in enumerate(series):
            x = _MARGIN_LEFT + si * 90
            color = _SERIES_COLORS[si % len(_SERIES_COLORS)]
            out.append(f'<rect x="{x}" y="{_HEIGHT - 22}" width="12" '
                       f'height="12" fill="{color}"/>')
            out.append(f'<text x="{x + 16}" y="{_HEIGHT - 12}" '
                       f'font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    return ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2.0


def _load_report(report_text: str) -> dict:
    try:
        doc = json.loads(report_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "cells" not in doc or "kind" not in doc:
        raise ParseError("report lacks 'kind'/'cells' fields")
    if not doc["cells"]:
        raise ParseError("report contains no cells")
    return doc


def _grouped(cells, outer_key: str, inner_key: str, value_fn):
    """-> (outer labels, {inner label: [median per outer]})."""
    outer = sorted({c[outer_key] for c in cells})
    inner = sorted({c[inner_key] for c in cells})
    table = {}
    for name in inner:
        table[name] = [
            _median([value_fn(c) for c in cells
                     if c[inner_key] == name and c[outer_key] == label])
            for label in outer
        ]
    return outer, table


def chart_documents(report_text: str, times_text: str | None = None
                    ) -> dict[str, tuple[str, str]]:
    """Build every chart for a report document.

    Returns {chart name: (svg text, underlying csv text)}. Comparison
    reports yield error-by-algorithm plus (when a wall-time sidecar is
    given) time-by-algorithm; sweep reports yield error-by-config.
    """
    doc = _load_report(report_text)
    cells = doc["cells"]
    charts: dict[str, tuple[str, str]] = {}

    def csv_text(labels, series):
        lines = ["label,series,value"]
        for name, values in series.items():
            for label, value in zip(labels, values):
                lines.append(f"{label},{name},{value!r}")
        return "\n".join(lines) + "\n"

    if doc["kind"] == "anchor_sweep":
        labels, series = _grouped(cells, "config", "algorithm",
                                  lambda c: c["unknown"]["average_error_m"])
        charts["error_by_config"] = (
            svg_bar_chart("Median localization error by anchor configuration",
                          "average error (m)", labels, series),
            csv_text(labels, series))
    elif doc["kind"] == "algorithm_comparison":
        labels, series = _grouped(cells, "algorithm", "config",
                                  lambda c: c["unknown"]["average_error_m"])
        flat = {"error": next(iter(series.values()))} if len(series) == 1 else series
        charts["error_by_algorithm"] = (
            svg_bar_chart("Median localization error by training algorithm",
                          "average error (m)", labels, flat),
            csv_text(labels, flat))
        if times_text is not None:
            times = json.loads(times_text).get("seconds", {})
            by_algo: dict[str, list[float]] = {}
            for key, seconds in times.items():
                algo = key.split(":")[1]
                by_algo.setdefault(algo, []).append(seconds)
            algos = sorted(by_algo)
            series_t = {"seconds": [_median(by_algo[a]) for a in algos]}
            charts["time_by_algorithm"] = (
                svg_bar_chart("Median training time by algorithm",
                              "wall time (s)", algos, series_t),
                csv_text(algos, series_t))
    else:
        raise ParseError(f"unknown report kind {doc['kind']!r}")
    return charts
