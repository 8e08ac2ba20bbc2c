"""Result persistence: aligned text table, CSV, JSON and an SVG error plot."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .harness import StudyRecord, StudyRow

ALL_FORMATS = ("text", "csv", "json", "svg")

CSV_HEADER = "j,H_cells,h_cells,kH_re,kH_im,kh_re,kh_im,ktg_re,ktg_im,residual,seconds"

_SQRT2 = math.sqrt(2.0)


def _mesh_label(cells: int) -> str:
    return f"sqrt2/{cells}"


def _fmt_real(z: complex | None) -> str:
    return "---" if z is None else f"{z.real:.10f}"


def _fmt_imag(z: complex | None) -> str:
    if z is None or z.imag == 0.0:
        return ""
    return f"±{abs(z.imag):.10f}i"


def render_text_table(record: StudyRecord) -> str:
    """Aligned table with one line per row, a second line for complex k."""
    header = ["j", "H", "h", "k_jH", "k_jh", "k_j^tg"]
    body: list[list[str]] = []
    for row in record.rows:
        if row.error is not None:
            body.append([str(row.j), _mesh_label(row.H_cells), _mesh_label(row.h_cells),
                         f"FAILED: {row.error}", "", ""])
            continue
        body.append([
            str(row.j), _mesh_label(row.H_cells), _mesh_label(row.h_cells),
            _fmt_real(row.k_H), _fmt_real(row.k_h), _fmt_real(row.k_tg),
        ])
        imag = ["", "", "", _fmt_imag(row.k_H), _fmt_imag(row.k_h), _fmt_imag(row.k_tg)]
        if any(imag):
            body.append(imag)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("-" * len(lines[0]))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    for ref in record.references:
        lines.append("")
        lines.append(
            f"reference j={ref.j}: k_ref = {ref.k_ref.real:.10f}"
            f"{ref.k_ref.imag:+.10f}i ({ref.series} at h={_mesh_label(ref.h_cells)})"
        )
    for fit in record.slopes:
        lines.append(f"slope j={fit.j} {fit.series}: {fit.slope:.3f}")
    return "\n".join(lines) + "\n"


def _csv_num(x) -> str:
    return "" if x is None else repr(float(x))


def render_csv(record: StudyRecord) -> str:
    lines = [CSV_HEADER]
    for row in record.rows:
        cells = [str(row.j), str(row.H_cells), str(row.h_cells)]
        for z in (row.k_H, row.k_h, row.k_tg):
            if z is None:
                cells.extend(["", ""])
            else:
                cells.extend([repr(float(z.real)), repr(float(z.imag))])
        cells.append(_csv_num(row.residual))
        cells.append(_csv_num(row.seconds))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_json(record: StudyRecord) -> str:
    return json.dumps(record.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# SVG log-log error plot

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 160, 30, 55


def _ticks(lo: float, hi: float, max_ticks: int = 8) -> list[int]:
    """Integer powers of two covering [lo, hi] (exponents, log2 scale)."""
    e0, e1 = math.floor(lo), math.ceil(hi)
    step = max(1, math.ceil((e1 - e0) / max_ticks))
    return list(range(e0, e1 + 1, step))


def render_svg(record: StudyRecord) -> str:
    """Log-log plot of relative error against mesh size, one polyline per series."""
    series: dict[tuple[int, str], list[tuple[float, float]]] = {}
    for pt in record.error_points:
        h = _SQRT2 / pt.h_cells
        series.setdefault((pt.j, pt.series), []).append((h, pt.rel_error))
    for key in series:
        series[key].sort()

    xs = [math.log2(h) for pts in series.values() for h, _ in pts]
    ys = [math.log2(e) for pts in series.values() for _, e in pts]
    if not xs:
        xs, ys = [-8.0, 0.0], [-8.0, 0.0]
    x0, x1 = min(xs) - 0.3, max(xs) + 0.3
    y0, y1 = min(ys) - 0.5, max(ys) + 0.5

    def px(x: float) -> float:
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for e in _ticks(x0, x1):
        if not x0 <= e <= x1:
            continue
        x = px(e)
        out.append(f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" '
                   f'y2="{_H - _MB + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{_H - _MB + 20}" font-size="12" '
                   f'text-anchor="middle">2^{e}</text>')
    for e in _ticks(y0, y1):
        if not y0 <= e <= y1:
            continue
        y = py(e)
        out.append(f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{y + 4:.2f}" font-size="12" '
                   f'text-anchor="end">2^{e}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" font-size="13" '
               'text-anchor="middle">mesh size h</text>')
    out.append(f'<text x="18" y="{(_MT + _H - _MB) / 2:.1f}" font-size="13" '
               f'text-anchor="middle" transform="rotate(-90 18 {(_MT + _H - _MB) / 2:.1f})">'
               'relative error</text>')

    for i, (key, pts) in enumerate(sorted(series.items())):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(math.log2(h)):.2f},{py(math.log2(e)):.2f}" for h, e in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   'stroke-width="1.5"/>')
        for h, e in pts:
            out.append(f'<circle cx="{px(math.log2(h)):.2f}" '
                       f'cy="{py(math.log2(e)):.2f}" r="3" fill="{color}"/>')
        ly = _MT + 16 * i + 10
        out.append(f'<line x1="{_W - _MR + 10}" y1="{ly}" x2="{_W - _MR + 30}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{_W - _MR + 35}" y="{ly + 4}" font-size="12">'
                   f'j={key[0]} {key[1]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(record: StudyRecord, formats=ALL_FORMATS, out_dir: str | Path = ".") -> dict[str, Path]:
    """Write the requested report files; returns format -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    renderers = {
        "text": ("study.txt", render_text_table),
        "csv": ("study.csv", render_csv),
        "json": ("study.json", render_json),
        "svg": ("errors.svg", render_svg),
    }
    paths: dict[str, Path] = {}
    for fmt in formats:
        if fmt not in renderers:
            raise ValueError(f"unknown report format {fmt!r}")
        name, render = renderers[fmt]
        path = out / name
        try:
            path.write_text(render(record), encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"failed to write report {path}: {exc}") from exc
        paths[fmt] = path
    return paths
