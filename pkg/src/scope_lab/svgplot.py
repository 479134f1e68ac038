"""Minimal deterministic SVG line plots for metric CSVs.

No plotting dependency: the output is a fixed-size SVG with one polyline per
(loss_kind, seed) series, built with stable float formatting so identical
input files produce byte-identical SVGs.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .exceptions import ConfigError

WIDTH, HEIGHT = 800, 480
MARGIN_LEFT, MARGIN_RIGHT = 70, 160
MARGIN_TOP, MARGIN_BOTTOM = 30, 50

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def _read_series(csv_path, column: str) -> dict[tuple[str, str], list[tuple[float, float]]]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{csv_path}: empty CSV")
        for required in ("step", column):
            if required not in reader.fieldnames:
                raise ConfigError(f"{csv_path}: no column named {required!r}")
        series: dict[tuple[str, str], list[tuple[float, float]]] = {}
        for row in reader:
            cell = row[column]
            if cell is None or cell == "":
                continue
            key = (row.get("loss_kind", "") or "", row.get("seed", "") or "")
            series.setdefault(key, []).append((float(row["step"]), float(cell)))
    return series


def emit_plot(csv_path, column: str, out_path) -> Path:
    """Render `column` against step, one series per (loss_kind, seed)."""
    series = _read_series(csv_path, column)
    points = [pt for pts in series.values() for pt in pts]
    if points:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    px_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    px_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x: float) -> str:
        return _fmt(MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * px_w)

    def sy(y: float) -> str:
        return _fmt(MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * px_h)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        # axes
        f'<line x1="{MARGIN_LEFT}" y1="{HEIGHT - MARGIN_BOTTOM}" '
        f'x2="{WIDTH - MARGIN_RIGHT}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" '
        f'x2="{MARGIN_LEFT}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) // 2}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-family="monospace" font-size="14">step</text>',
        f'<text x="16" y="{(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="14" '
        f'transform="rotate(-90 16 {(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) // 2})">{column}</text>',
        # tick labels at the range ends
        f'<text x="{MARGIN_LEFT}" y="{HEIGHT - MARGIN_BOTTOM + 18}" text-anchor="middle" '
        f'font-family="monospace" font-size="11">{_fmt(x_lo)}</text>',
        f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - MARGIN_BOTTOM + 18}" '
        f'text-anchor="middle" font-family="monospace" font-size="11">{_fmt(x_hi)}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{HEIGHT - MARGIN_BOTTOM + 4}" text-anchor="end" '
        f'font-family="monospace" font-size="11">{_fmt(y_lo)}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + 4}" text-anchor="end" '
        f'font-family="monospace" font-size="11">{_fmt(y_hi)}</text>',
    ]
    for k, key in enumerate(sorted(series)):
        color = PALETTE[k % len(PALETTE)]
        pts = series[key]
        if len(pts) == 1:
            x, y = pts[0]
            parts.append(f'<circle cx="{sx(x)}" cy="{sy(y)}" r="3" fill="{color}"/>')
        else:
            coords = " ".join(f"{sx(x)},{sy(y)}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        label = " ".join(p for p in key if p) or "series"
        ly = MARGIN_TOP + 16 + 18 * k
        parts.append(
            f'<rect x="{WIDTH - MARGIN_RIGHT + 12}" y="{ly - 9}" width="12" height="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_RIGHT + 30}" y="{ly}" font-family="monospace" '
            f'font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return out_path
