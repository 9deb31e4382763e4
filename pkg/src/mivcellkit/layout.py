"""Rectangle footprints of the four transistor variants and cell-area metrics.

All coordinates are in nanometres with the origin at the lower-left corner
of the device bounding box. ``x`` runs along the channel length.

Cell convention: p-type devices sit on the bottom layer and are always the
traditional 2D device; n-type devices sit on the top layer and use the
variant footprint. In the traditional baseline each top-layer gate driven
from below carries an external MIV plus an M1 keep-out.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

from .cells import CELL_NAMES, get_cell
from .characterization import VARIANTS
from .errors import DomainError, InputError

LAYERS = ("active", "gate", "miv", "contact")
MIV_VARIANTS = VARIANTS[1:]


@dataclass(frozen=True)
class ProcessParams:
    t_si: float = 7.0
    h_src: float = 7.0
    t_ox: float = 1.0
    n_src: float = 1e19  # cm^-3, metadata only
    t_spacer: float = 10.0
    t_box: float = 100.0  # metadata only
    t_miv: float = 25.0
    l_src: float = 48.0
    w_src: float = 192.0
    l_g: float = 24.0
    m1_space: float = 24.0
    via: float = 24.0
    m_width: float = 24.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise DomainError(f"{f.name} must be > 0, got {getattr(self, f.name)}")
        if self.w_src % 4:
            raise DomainError(f"w_src must be divisible by 4, got {self.w_src}")


@dataclass(frozen=True)
class Rect:
    layer: str
    x: float
    y: float
    w: float
    h: float

    @property
    def x1(self):
        return self.x + self.w

    @property
    def y1(self):
        return self.y + self.h

    @property
    def area(self):
        return self.w * self.h

    def overlaps(self, other):
        return (self.x < other.x1 and other.x < self.x1
                and self.y < other.y1 and other.y < self.y1)


@dataclass(frozen=True)
class TransistorLayout:
    variant: str
    rectangles: tuple
    bbox: tuple
    channel_widths: tuple
    has_external_gate_miv: bool = False

    @property
    def width(self):
        return self.bbox[0]

    @property
    def height(self):
        return self.bbox[1]

    @property
    def area(self):
        return self.bbox[0] * self.bbox[1]

    def of_layer(self, layer):
        return [r for r in self.rectangles if r.layer == layer]


def _contact(active, size):
    s = min(size, active.w, active.h)
    return Rect("contact", active.x + (active.w - s) / 2, active.y + (active.h - s) / 2, s, s)


def _planar(p, miv_gap, miv_inside):
    """Source | spacer | gate (+ abutting MIV) | spacer | drain (+ external MIV)."""
    xg = p.l_src + p.t_spacer
    gate_len = p.l_g + (p.t_miv if miv_inside else 0.0)
    xd = xg + gate_len + p.t_spacer
    length = xd + p.l_src
    rects = [
        Rect("active", 0.0, 0.0, p.l_src, p.w_src),
        Rect("gate", xg, 0.0, p.l_g, p.w_src),
        Rect("active", xd, 0.0, p.l_src, p.w_src),
    ]
    ym = (p.w_src - p.t_miv) / 2
    if miv_inside:
        rects.append(Rect("miv", xg + p.l_g, ym, p.t_miv, p.t_miv))
    if miv_gap:
        rects.append(Rect("miv", length + p.m1_space, ym, p.t_miv, p.t_miv))
        length += p.m1_space + p.t_miv
    return rects, (length, p.w_src), (p.w_src,)


def _two_channel(p):
    half = p.w_src / 2
    col = max(p.l_g, p.t_miv)
    xg = p.l_src + p.t_spacer
    xr = xg + col + p.t_spacer
    y2 = half + p.t_miv
    height = y2 + half
    rects = [
        Rect("active", 0.0, 0.0, p.l_src, half),
        Rect("active", xr, 0.0, p.l_src, half),
        Rect("active", 0.0, y2, p.l_src, half),
        Rect("active", xr, y2, p.l_src, half),
        Rect("gate", xg + (col - p.l_g) / 2, 0.0, p.l_g, height),
        Rect("miv", xg + (col - p.t_miv) / 2, half, p.t_miv, p.t_miv),
    ]
    return rects, (xr + p.l_src, height), (half, half)


def _four_channel(p):
    arm = p.w_src / 4
    centre = p.l_g + p.t_miv + 2 * p.t_spacer
    side = max(2 * p.l_src + centre, arm)
    c0 = (side - centre) / 2
    a0 = (side - arm) / 2
    g0 = c0 + p.t_spacer
    gate = p.l_g + p.t_miv
    rects = [
        Rect("active", c0 - p.l_src, a0, p.l_src, arm),  # west source
        Rect("active", c0 + centre, a0, p.l_src, arm),  # east source
        Rect("active", a0, c0 - p.l_src, arm, p.l_src),  # south drain
        Rect("active", a0, c0 + centre, arm, p.l_src),  # north drain
        Rect("gate", g0, g0, gate, gate),
        Rect("miv", g0 + p.l_g / 2, g0 + p.l_g / 2, p.t_miv, p.t_miv),
    ]
    return rects, (side, side), (arm,) * 4


def transistor_footprint(variant, p=None, has_external_gate_miv=False):
    p = p or ProcessParams()
    if variant == "traditional":
        rects, bbox, widths = _planar(p, has_external_gate_miv, False)
    elif variant == "ch1":
        rects, bbox, widths = _planar(p, False, True)
    elif variant == "ch2":
        rects, bbox, widths = _two_channel(p)
    elif variant == "ch4":
        rects, bbox, widths = _four_channel(p)
    else:
        raise DomainError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    contacts = [_contact(r, p.via) for r in rects if r.layer == "active"]
    return TransistorLayout(
        variant=variant,
        rectangles=tuple(rects + contacts),
        bbox=bbox,
        channel_widths=widths,
        has_external_gate_miv=bool(has_external_gate_miv and variant == "traditional"),
    )


def _row(footprint, count, gap):
    return count * footprint.width + (count - 1) * gap, footprint.height


@dataclass(frozen=True)
class CellArea:
    cell: str
    variant: str
    top_width: float
    top_height: float
    bottom_width: float
    bottom_height: float

    @property
    def top_area(self):
        return self.top_width * self.top_height

    @property
    def bottom_area(self):
        return self.bottom_width * self.bottom_height

    @property
    def cell_area(self):
        return max(self.top_width, self.bottom_width) * max(self.top_height, self.bottom_height)

    @property
    def substrate_area(self):
        return self.top_area + self.bottom_area


def cell_layout_area(cell, variant, p=None):
    p = p or ProcessParams()
    try:
        spec = get_cell(cell)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    top_fp = transistor_footprint(variant, p, has_external_gate_miv=(variant == "traditional"))
    bottom_fp = transistor_footprint("traditional", p)
    tw, th = _row(top_fp, spec.n_devices, p.m1_space)
    bw, bh = _row(bottom_fp, spec.p_devices, p.m1_space)
    return CellArea(cell, variant, tw, th, bw, bh)


def reduction_pct(area, baseline):
    return 100.0 * (1.0 - area / baseline)


@dataclass
class CellAreaReport:
    entries: dict  # (cell, variant) -> CellArea
    cells: tuple
    variants: tuple

    def reduction(self, cell, variant, metric="cell_area"):
        base = getattr(self.entries[(cell, "traditional")], metric)
        return reduction_pct(getattr(self.entries[(cell, variant)], metric), base)

    def average_reduction(self, variant, metric="cell_area"):
        vals = [self.reduction(c, variant, metric) for c in self.cells]
        return sum(vals) / len(vals)

    def best_substrate_reduction(self):
        """(percent, cell, variant) of the largest substrate-area saving."""
        best = max(
            ((self.reduction(c, v, "substrate_area"), c, v) for c in self.cells for v in self.variants if v != "traditional"),
            default=(0.0, None, None),
        )
        return best

    def rows(self):
        for c in self.cells:
            for v in self.variants:
                e = self.entries[(c, v)]
                yield {
                    "cell": c,
                    "variant": v,
                    "top_nm2": e.top_area,
                    "bottom_nm2": e.bottom_area,
                    "cell_area_nm2": e.cell_area,
                    "substrate_nm2": e.substrate_area,
                    "reduction_pct": self.reduction(c, v),
                }

    def to_csv(self):
        buf = io.StringIO()
        cols = ["cell", "variant", "top_nm2", "bottom_nm2", "cell_area_nm2", "substrate_nm2", "reduction_pct"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow([_fmt(row[k]) for k in cols])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def library_area_summary(p=None, cells=CELL_NAMES, variants=VARIANTS):
    p = p or ProcessParams()
    variants = tuple(variants)
    if "traditional" not in variants:
        variants = ("traditional",) + variants
    entries = {(c, v): cell_layout_area(c, v, p) for c in cells for v in variants}
    return CellAreaReport(entries, tuple(cells), variants)
