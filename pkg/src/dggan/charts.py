"""
Chart data (CSV) and minimal static SVG for real-vs-synthetic comparisons.

Output is fully determined by the inputs: no timestamps, no random ids.
"""

from __future__ import annotations

import csv
import io
import re
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import FidelityReport
from .table import DataTable

HIST_BINS = 20
REAL_COLOR = "#1f77b4"
SYNTH_COLOR = "#ff7f0e"


def column_frequencies(real: DataTable, synth: DataTable, name: str, bins: int = HIST_BINS):
    """Rows of ``(label, real_freq, synth_freq)`` for one column.

    Continuous columns use ``bins`` equal-width bins over the real range;
    synthetic values outside it are clipped into the edge bins.
    """
    spec = real.spec(name)
    r, s = real.column(name), synth.column(name)
    if spec.is_categorical:
        k = len(spec.categories)
        fr = np.bincount(r, minlength=k) / max(len(r), 1)
        fs = np.bincount(s, minlength=k) / max(len(s), 1)
        return [(c, float(a), float(b)) for c, a, b in zip(spec.categories, fr, fs)]
    lo, hi = float(r.min()), float(r.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    fr = np.histogram(np.clip(r, lo, hi), edges)[0] / max(len(r), 1)
    fs = np.histogram(np.clip(s, lo, hi), edges)[0] / max(len(s), 1)
    return [
        (f"[{edges[i]:.6g}, {edges[i + 1]:.6g}{']' if i == bins - 1 else ')'}", float(a), float(b))
        for i, (a, b) in enumerate(zip(fr, fs))
    ]


def frequencies_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin", "real", "synthetic"])
    for label, a, b in rows:
        w.writerow([label, repr(a), repr(b)])
    return buf.getvalue()


def _svg(width, height, body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        + "".join(body)
        + "</svg>\n"
    )


def overlay_svg(title: str, rows, width: int = 640, height: int = 360) -> str:
    """Side-by-side bars of real and synthetic frequencies."""
    left, right, top, bottom = 50, 20, 40, 90
    pw, ph = width - left - right, height - top - bottom
    peak = max([max(a, b) for _, a, b in rows] + [1e-12])
    n = max(len(rows), 1)
    slot = pw / n
    bar = slot * 0.4
    body = [
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>\n',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>\n',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>\n',
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{peak:.3g}</text>\n',
    ]
    for i, (label, a, b) in enumerate(rows):
        x0 = left + i * slot + slot * 0.1
        for j, (v, color) in enumerate(((a, REAL_COLOR), (b, SYNTH_COLOR))):
            h = ph * v / peak
            body.append(
                f'<rect x="{x0 + j * bar:.2f}" y="{top + ph - h:.2f}" width="{bar:.2f}" '
                f'height="{h:.2f}" fill="{color}"/>\n'
            )
        cx = left + (i + 0.5) * slot
        body.append(
            f'<text x="{cx:.2f}" y="{top + ph + 12}" font-family="sans-serif" font-size="9" '
            f'text-anchor="end" transform="rotate(-45 {cx:.2f} {top + ph + 12})">'
            f"{escape(str(label))}</text>\n"
        )
    ly = height - 14
    body.append(f'<rect x="{left}" y="{ly - 9}" width="10" height="10" fill="{REAL_COLOR}"/>\n')
    body.append(f'<text x="{left + 14}" y="{ly}" font-family="sans-serif" font-size="11">real</text>\n')
    body.append(f'<rect x="{left + 60}" y="{ly - 9}" width="10" height="10" fill="{SYNTH_COLOR}"/>\n')
    body.append(
        f'<text x="{left + 74}" y="{ly}" font-family="sans-serif" font-size="11">synthetic</text>\n'
    )
    return _svg(width, height, body)


def _heat_color(v: float) -> str:
    # 0 -> red, 1 -> green
    v = min(max(v, 0.0), 1.0)
    return f"rgb({int(round(255 * (1 - v)))},{int(round(200 * v))},60)"


def heatmap_svg(report: FidelityReport, cell: int = 44) -> str:
    names = [c["name"] for c in report.columns]
    k = len(names)
    margin = 110
    size = margin + k * cell + 20
    body = []
    for i in range(k):
        y = margin + i * cell
        body.append(
            f'<text x="{margin - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{escape(names[i])}</text>\n'
        )
        x = margin + i * cell + cell / 2
        body.append(
            f'<text x="{x:.1f}" y="{margin - 6}" font-family="sans-serif" font-size="11" '
            f'transform="rotate(-45 {x:.1f} {margin - 6})">{escape(names[i])}</text>\n'
        )
        for j in range(k):
            v = float(report.pairs[i, j])
            body.append(
                f'<rect x="{margin + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_color(v)}" stroke="white"/>\n'
                f'<text x="{margin + j * cell + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="10">{v:.2f}</text>\n'
            )
    return _svg(size, size, body)


def write_charts(real: DataTable, synth: DataTable, report: FidelityReport, out_dir) -> list[Path]:
    """Write per-column CSV+SVG overlays and the pair heat map. Returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, name in enumerate(real.names):
        rows = column_frequencies(real, synth, name)
        stem = f"column_{i:02d}_" + re.sub(r"[^A-Za-z0-9_-]", "_", name)
        p_csv, p_svg = out / f"{stem}.csv", out / f"{stem}.svg"
        p_csv.write_text(frequencies_csv(rows), encoding="utf-8")
        p_svg.write_text(overlay_svg(name, rows), encoding="utf-8")
        written += [p_csv, p_svg]
    p = out / "pair_scores.csv"
    p.write_text(report.pairs_csv(), encoding="utf-8")
    h = out / "heatmap.svg"
    h.write_text(heatmap_svg(report), encoding="utf-8")
    return written + [p, h]
