"""Self-contained SVG charts with deterministic text output.

All coordinates are rounded to two decimals so that identical data always
produce byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .characterization import CurveKind, simulate_curve
from .errors import InputError

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=80, right=150, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _q(x):
    return f"{x:.2f}"


def _tick(v):
    return f"{v:.3g}"


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


class _Frame:
    def __init__(self, xlim, ylim, log_y=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.log_y = log_y
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        if self.log_y:
            y = math.log10(y)
        return MARGIN["top"] + self.ph - (y - self.y0) / (self.y1 - self.y0) * self.ph


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _axes(fr, xlabel, ylabel, yticks, xticks=True):
    out = [
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{fr.pw}" height="{fr.ph}" '
        f'fill="none" stroke="black"/>'
    ]
    for xv in np.linspace(fr.x0, fr.x1, 6) if xticks else ():
        x = _q(fr.px(xv))
        yb = MARGIN["top"] + fr.ph
        out.append(f'<line x1="{x}" y1="{yb}" x2="{x}" y2="{yb + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{yb + 16}" text-anchor="middle">{_tick(xv)}</text>')
    for yv, label in yticks:
        y = _q(MARGIN["top"] + fr.ph - (yv - fr.y0) / (fr.y1 - fr.y0) * fr.ph)
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{y}" x2="{MARGIN["left"]}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y}" text-anchor="end" dy="4">{label}</text>')
    cx = MARGIN["left"] + fr.pw / 2
    out.append(f'<text x="{cx:.2f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    cy = MARGIN["top"] + fr.ph / 2
    out.append(f'<text x="18" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 18 {cy:.2f})">'
               f'{escape(ylabel)}</text>')
    return out


def _legend(labels, colors):
    out = []
    x = WIDTH - MARGIN["right"] + 12
    for k, (label, color) in enumerate(zip(labels, colors)):
        y = MARGIN["top"] + 14 * k + 8
        out.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{x + 14}" y="{y + 1}">{escape(label)}</text>')
    return out


def series_path(fr, x, y):
    pts = [f"{_q(fr.px(a))},{_q(fr.py(b))}" for a, b in zip(x, y)]
    return "M" + " L".join(pts)


def line_chart(series, title, xlabel, ylabel, log_y=False):
    """Return ``(svg_text, suppressed)``; with ``log_y`` non-positive samples
    are dropped and counted in ``suppressed``."""
    if not series or all(len(s.x) == 0 for s in series):
        raise InputError(f"nothing to plot for {title!r}")
    suppressed = 0
    kept = []
    for s in series:
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        if log_y:
            ok = y > 0
            suppressed += int(np.count_nonzero(~ok))
            x, y = x[ok], y[ok]
        kept.append(Series(s.label, x, y, s.dashed))
    ally = np.concatenate([s.y for s in kept]) if kept else np.array([])
    if ally.size == 0:
        raise InputError(f"no plottable samples for {title!r}")
    allx = np.concatenate([s.x for s in kept])
    xlim = (float(allx.min()), float(allx.max()))
    if xlim[0] == xlim[1]:
        xlim = (xlim[0] - 1, xlim[1] + 1)
    if log_y:
        lo, hi = math.floor(math.log10(ally.min())), math.ceil(math.log10(ally.max()))
        hi = hi if hi > lo else lo + 1
        ylim = (lo, hi)
        step = max(1, (hi - lo) // 8)
        yticks = [(e, f"1e{e}") for e in range(lo, hi + 1, step)]
    else:
        lo, hi = float(ally.min()), float(ally.max())
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        ylim = (lo - pad, hi + pad)
        yticks = [(v, _tick(v)) for v in np.linspace(ylim[0], ylim[1], 6)]
    fr = _Frame(xlim, ylim, log_y)
    out = _header(title) + _axes(fr, xlabel, ylabel, yticks)
    colors = []
    for k, s in enumerate(kept):
        color = PALETTE[k // 2 % len(PALETTE)] if any(t.dashed for t in kept) else PALETTE[k % len(PALETTE)]
        colors.append(color)
        if len(s.x) == 0:
            continue
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        out.append(f'<path d="{series_path(fr, s.x, s.y)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
    out += _legend([s.label for s in kept], colors)
    out.append("</svg>")
    return "\n".join(out) + "\n", suppressed


def bar_chart(groups, labels, values, title, ylabel):
    """Grouped bars: ``values[g][k]`` is bar ``k`` of group ``g``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InputError(f"nothing to plot for {title!r}")
    top = float(np.nanmax(values))
    top = top if top > 0 else 1.0
    fr = _Frame((0, len(groups)), (0, top * 1.1))
    yticks = [(v, _tick(v)) for v in np.linspace(0, top * 1.1, 6)]
    out = _header(title) + _axes(fr, "", ylabel, yticks, xticks=False)
    nb = len(labels)
    slot = fr.pw / len(groups)
    bw = slot * 0.8 / nb
    for g, name in enumerate(groups):
        for k in range(nb):
            v = values[g, k]
            if not np.isfinite(v):
                continue
            x = MARGIN["left"] + g * slot + slot * 0.1 + k * bw
            y = fr.py(v)
            out.append(f'<rect class="bar" x="{_q(x)}" y="{_q(y)}" width="{_q(bw)}" '
                       f'height="{_q(MARGIN["top"] + fr.ph - y)}" fill="{PALETTE[k % len(PALETTE)]}"/>')
        cx = MARGIN["left"] + (g + 0.5) * slot
        yb = MARGIN["top"] + fr.ph + 10
        out.append(f'<text x="{_q(cx)}" y="{yb}" text-anchor="end" font-size="9" '
                   f'transform="rotate(-45 {_q(cx)} {yb})">{escape(name)}</text>')
    out += _legend(labels, [PALETTE[k % len(PALETTE)] for k in range(nb)])
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- figure sets ----------------------------------------------------------------


def _overlay(curves, fitted_params, consts):
    series = []
    for c in curves:
        tag = f"{c.fixed_bias:g} V"
        series.append(Series(f"ref {tag}", c.sweep, c.values))
        if fitted_params is not None:
            series.append(Series(f"fit {tag}", c.sweep, simulate_curve(fitted_params, consts, c).values,
                                 dashed=True))
    return series


def extraction_figures(target, fitted_params=None, consts=None, name="device"):
    """``{filename: svg}`` overlaying reference and fitted curves.

    Returns the figures and the total count of samples dropped from log plots.
    """
    idvg = [c for c in target.curves if c.kind.is_idvg]
    idvd = target.idvd
    cv = [c for c in target.curves if c.kind == CurveKind.CV]
    figs, dropped = {}, 0
    mag = lambda s: Series(s.label, s.x, np.abs(s.y), s.dashed)  # noqa: E731
    if idvg:
        ser = _overlay(idvg, fitted_params, consts)
        figs[f"{name}_idvg_lin.svg"], _ = line_chart(ser, f"{name} IDVG", "V_G (V)", "I_D (A)")
        figs[f"{name}_idvg_log.svg"], n = line_chart([mag(s) for s in ser], f"{name} IDVG (log)",
                                                     "V_G (V)", "|I_D| (A)", log_y=True)
        dropped += n
    if idvd:
        ser = _overlay(idvd, fitted_params, consts)
        figs[f"{name}_idvd.svg"], _ = line_chart(ser, f"{name} IDVD", "V_D (V)", "I_D (A)")
    if cv:
        ser = _overlay(cv, fitted_params, consts)
        figs[f"{name}_cv.svg"], _ = line_chart(ser, f"{name} CV", "V_G (V)", "C_G (F)")
    if not figs:
        raise InputError(f"{name}: no curves to plot")
    return figs, dropped


def ppa_figures(report):
    """Three grouped bar charts: delay, power and cell area per cell."""
    if not report.entries:
        raise InputError("PPA report has no entries")
    cells = [c for c in report.cells if any(e.cell == c for e in report.entries)]
    variants = [v for v in report.variants if any(e.variant == v for e in report.entries)]
    lookup = {(e.cell, e.variant): e for e in report.entries}

    def table(attr, scale):
        return [[getattr(lookup[(c, v)], attr) * scale if (c, v) in lookup else float("nan")
                 for v in variants] for c in cells]

    return {
        "ppa_delay.svg": bar_chart(cells, variants, table("delay_s", 1e12), "Average delay", "delay (ps)"),
        "ppa_power.svg": bar_chart(cells, variants, table("power_W", 1e6), "Average power", "power (uW)"),
        "ppa_area.svg": bar_chart(cells, variants, table("cell_area_nm2", 1e-3), "Cell layout area",
                                  "area (1e3 nm^2)"),
    }
