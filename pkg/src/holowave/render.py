"""Self-contained SVG line plots of the CSV reports in an artifact directory."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MissingReport
from .io import format_float, read_csv

WIDTH, HEIGHT = 640, 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot(series: Sequence[tuple], title: str, xlabel: str, ylabel: str,
              log_x: bool = False, log_y: bool = False, notes: Sequence[str] = ()) -> str:
    """SVG text for ``[(label, xs, ys), ...]`` on shared axes."""
    def tx(v):
        return math.log10(v) if log_x else v

    def ty(v):
        return math.log10(v) if log_y else v

    pts = []
    for label, xs, ys in series:
        keep = [(tx(x), ty(y)) for x, y in zip(xs, ys)
                if np.isfinite(x) and np.isfinite(y) and (not log_x or x > 0)
                and (not log_y or y > 0)]
        pts.append((label, keep))
    allx = [p[0] for _, k in pts for p in k] or [0.0, 1.0]
    ally = [p[1] for _, k in pts for p in k] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + (abs(y0) if y0 else 1.0)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + pw * (v - x0) / (x1 - x0)

    def sy(v):
        return HEIGHT - MARGIN - ph * (v - y0) / (y1 - y0)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
           f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
           f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
           f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>']
    for v in _ticks(x0, x1):
        lab = _fmt(10 ** v) if log_x else _fmt(v)
        out.append(f'<text x="{sx(v):.2f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle" '
                   f'font-size="11">{lab}</text>')
    for v in _ticks(y0, y1):
        lab = _fmt(10 ** v) if log_y else _fmt(v)
        out.append(f'<text x="{MARGIN - 6}" y="{sy(v) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{lab}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="13">{xlabel}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>')
    for i, (label, keep) in enumerate(pts):
        color = COLORS[i % len(COLORS)]
        if keep:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in keep)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{path}"/>')
        out.append(f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * i}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{label}</text>')
    for i, note in enumerate(notes):
        out.append(f'<text x="{MARGIN + 8}" y="{MARGIN + 14 * (i + 1)}" font-size="12">'
                   f'{note}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _columns(path: Path) -> dict:
    header, rows = read_csv(path)
    return {name: [row[i] for row in rows] for i, name in enumerate(header)}


def _render_energy(path: Path) -> str:
    c = _columns(path)
    series = [("E(t)", c["t"], c["E"])]
    for name in c:
        if name.startswith("E_") or name.startswith("e_"):
            series.append((name, c["t"], c[name]))
    notes = []
    if "fitted_c" in c and c["fitted_c"]:
        notes.append(f"fitted Gronwall c = {format_float(c['fitted_c'][0])}")
    return line_plot(series, "energy", "t", "E", notes=notes)


def _render_decay(path: Path) -> str:
    c = _columns(path)
    xs = np.asarray(c["x"], dtype=float)
    ys = np.abs(np.asarray(c["value"], dtype=float))
    slope = float(c["slope"][0])
    anchor = int(np.argmax(ys > 0)) if np.any(ys > 0) else 0
    fit = ys[anchor] * (xs / xs[anchor]) ** slope
    return line_plot([("|u|", xs, ys), ("fit", xs, fit)], "decay near x = 0", "x", "|u|",
                     log_x=True, log_y=True, notes=[f"slope = {format_float(slope)}"])


def _render_contraction(path: Path) -> str:
    c = _columns(path)
    return line_plot([("ratio", c["iteration"], c["ratio"]),
                      ("difference", c["iteration"], c["difference"])],
                     "Picard contraction", "iteration", "value", log_y=True)


def _render_scan(path: Path) -> str:
    c = _columns(path)
    groups: dict = {}
    for name, a, r in zip(c["check"], c["a"], c["ratio"]):
        groups.setdefault(str(name), {}).setdefault(float(a), []).append(float(r))
    series = []
    for name in sorted(groups):
        avals = sorted(groups[name])
        series.append((name, avals, [max(groups[name][a]) for a in avals]))
    return line_plot(series, f"{path.stem} ratio scan", "a", "sup ratio", log_x=True)


RENDERERS = {
    "energy.csv": ("energy.svg", _render_energy),
    "decay.csv": ("decay.svg", _render_decay),
    "contraction_log.csv": ("contraction.svg", _render_contraction),
    "hardy.csv": ("hardy.svg", _render_scan),
    "elliptic.csv": ("elliptic.svg", _render_scan),
}


def report_render(artifact_dir) -> list:
    """Render every known CSV report under ``artifact_dir`` to SVG.

    Raises
    ------
    MissingReport
        When the directory holds no renderable CSV.
    """
    root = Path(artifact_dir)
    if not root.is_dir():
        raise MissingReport(f"{root} is not a directory", directory=str(root))
    written = []
    for csv_path in sorted(root.rglob("*.csv")):
        entry = RENDERERS.get(csv_path.name)
        if entry is None:
            continue
        name, fn = entry
        target = csv_path.parent / name
        target.write_text(fn(csv_path))
        written.append(target)
    if not written:
        raise MissingReport(f"no renderable CSV reports in {root}", directory=str(root))
    return written
