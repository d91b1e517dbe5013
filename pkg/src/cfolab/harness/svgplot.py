"""Deterministic SVG rendering of MSE-vs-SNR curves.

Emits hand-rolled SVG so identical inputs produce byte-identical files:
one ``<polyline>`` per method on a log10 MSE axis, axis frame and ticks
drawn with ``<line>``/``<rect>`` elements, and a text legend.
"""

import math

from ..errors import FormatError
from ..metrics import MetricsReport, read_csv

__all__ = ["render_svg", "plot_csvs"]

_WIDTH, _HEIGHT = 640, 440
_ML, _MR, _MT, _MB = 70, 160, 20, 50
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_MSE_FLOOR = 1e-20


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(report: MetricsReport) -> str:
    """Render a combined report to an SVG string (one polyline per method)."""
    report.validate()
    if not report.rows:
        raise ValueError("empty report: nothing to plot")
    series: dict[str, list] = {}
    for row in report.sorted_rows():
        series.setdefault(row.method, []).append(row)
    methods = sorted(series)

    snrs = [row.snr_db for rows in series.values() for row in rows]
    logs = [math.log10(max(row.mse, _MSE_FLOOR)) for rows in series.values() for row in rows]
    x_lo, x_hi = min(snrs), max(snrs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    y_lo = math.floor(min(logs))
    y_hi = math.ceil(max(logs))
    if y_hi == y_lo:
        y_hi += 1

    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def px(snr):
        return _ML + plot_w * (snr - x_lo) / (x_hi - x_lo)

    def py(logmse):
        return _MT + plot_h * (y_hi - logmse) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>',
    ]
    # y ticks: one per decade
    for exp in range(y_lo, y_hi + 1):
        y = py(exp)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" font-size="12" '
            f'text-anchor="end">1e{exp}</text>'
        )
    # x ticks: the distinct SNRs, thinned to at most 14 labels
    xs = sorted(set(snrs))
    step = max(1, (len(xs) + 13) // 14)
    for snr in xs[::step]:
        x = px(snr)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_MT + plot_h}" x2="{_fmt(x)}" '
            f'y2="{_MT + plot_h + 5}" stroke="black"/>'
        )
        label = f"{snr:g}"
        parts.append(
            f'<text x="{_fmt(x)}" y="{_MT + plot_h + 20}" font-size="12" '
            f'text-anchor="middle">{label}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w // 2}" y="{_HEIGHT - 12}" font-size="13" '
        f'text-anchor="middle">SNR (dB)</text>'
    )
    parts.append(
        f'<text x="18" y="{_MT + plot_h // 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {_MT + plot_h // 2})">MSE</text>'
    )
    for idx, method in enumerate(methods):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(
            f"{_fmt(px(row.snr_db))},{_fmt(py(math.log10(max(row.mse, _MSE_FLOOR))))}"
            for row in series[method]
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        ly = _MT + 16 + 18 * idx
        lx = _WIDTH - _MR + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 27}" y="{ly}" font-size="12">{method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_csvs(csv_paths, out_path) -> None:
    """Merge metrics CSVs (which must share the schema) and write an SVG."""
    if not csv_paths:
        raise ValueError("no CSV inputs")
    merged = MetricsReport(rows=[])
    for path in csv_paths:
        report = read_csv(path)
        if not report.rows:
            raise ValueError(f"{path}: empty CSV")
        merged = merged.merged_with(report)
    svg = render_svg(merged)
    with open(out_path, "w", newline="\n") as fh:
        fh.write(svg)
