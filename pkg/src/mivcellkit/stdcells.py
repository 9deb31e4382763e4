"""Cell netlists with parasitics, stimulus generation and the PPA harness.

Layer convention: p-type devices sit on the bottom layer and always use the
traditional model; n-type devices sit on the top layer and use the variant
model. A net that touches both layers (every input and every stage output)
is split into a bottom node ``X`` and a top node ``X__top`` joined by one
MIV resistor. Inputs are driven and the load hangs on the bottom side.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cells import CELL_NAMES, CELLS, TRUTH, Parallel, Series, dual, get_cell
from .characterization import VARIANTS
from .circuit import Capacitor, Netlist, Resistor, Transistor, VoltageSource, dc_operating_point, measure, transient
from .errors import ConvergenceError, DomainError, InputError, MeasurementError, MivCellKitError
from .layout import ProcessParams, library_area_summary

log = logging.getLogger(__name__)

VDD = 1.0
TOP = "__top"
REPORT_FORMAT = "miv-cellkit ppa v1"

# Reference averages per MIV variant (percent change vs the traditional
# two-layer baseline); shown next to our numbers, not used as targets.
REFERENCE = {
    "ch1": {"area_reduction_pct": 9.0, "delay_delta_pct": -3.0, "power_delta_pct": -0.5},
    "ch2": {"area_reduction_pct": 18.0, "delay_delta_pct": -2.0, "power_delta_pct": -1.0},
    "ch4": {"area_reduction_pct": 12.0, "delay_delta_pct": 2.0, "power_delta_pct": -2.0},
}
REFERENCE_SUBSTRATE_PCT = 31.0


@dataclass(frozen=True)
class ParasiticPolicy:
    r_miv: float = 7.0
    r_interconnect: float = 3.0
    r_vdd: float = 5.0
    r_gnd: float = 5.0
    c_load: float = 1e-15

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise DomainError(f"{k} must be > 0, got {v}")


@dataclass(frozen=True)
class SimSettings:
    dt: float = 1e-12
    segment: float = 4e-9  # one stimulus segment per input pin
    t_rise: float = 0.5e-9
    t_fall: float = 2.5e-9
    edge: float = 10e-12

    def __post_init__(self):
        if not (self.dt > 0 and self.edge > 0 and 0 < self.t_rise < self.t_fall < self.segment - self.edge):
            raise DomainError("inconsistent simulation settings")


def _model_ref(variant, polarity):
    return f"{variant}_{polarity}.model"


def _cross_layer_nets(spec):
    return list(spec.inputs) + [s.out for s in spec.stages]


class _Builder:
    def __init__(self, net, policy, n_model, p_model, n_ref, p_ref):
        self.net = net
        self.policy = policy
        self.models = {"n": (n_model, n_ref), "p": (p_model, p_ref)}
        self.count = 0

    def _name(self, prefix):
        self.count += 1
        return f"{prefix}{self.count}"

    def network(self, expr, upper, lower, polarity, gate_of):
        """Place devices for ``expr`` between ``upper`` and ``lower`` nodes.

        The source terminal is always on the rail side.
        """
        if isinstance(expr, str):
            (params, consts), ref = self.models[polarity]
            d, s = (upper, lower) if polarity == "n" else (lower, upper)
            self.net.add(Transistor(self._name(f"M{polarity}"), d, gate_of(expr), s, params, consts, ref))
        elif isinstance(expr, Series):
            nodes = [upper]
            for _ in expr.parts[:-1]:
                a, b = self._name("x") + "a", None
                b = a[:-1] + "b"
                self.net.add(Resistor(f"Rint_{a[:-1]}", a, b, self.policy.r_interconnect))
                nodes += [a, b]
            nodes.append(lower)
            for k, part in enumerate(expr.parts):
                self.network(part, nodes[2 * k], nodes[2 * k + 1], polarity, gate_of)
        elif isinstance(expr, Parallel):
            for part in expr.parts:
                self.network(part, upper, lower, polarity, gate_of)
        else:
            raise DomainError(f"bad network expression {expr!r}")


def build_cell_netlist(spec, variant, params_n, params_p, policy=None, inputs=None, variant_label=None):
    """Transistor netlist of ``spec`` with parasitics.

    ``params_n``/``params_p`` are ``(ModelParams, ModelConstants)`` pairs.
    ``inputs`` maps each input pin to a ``VoltageSource`` argument dict or a
    constant voltage; unspecified pins are held at 0 V.
    """
    if isinstance(spec, str):
        spec = get_cell(spec)
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if params_n is None or params_p is None:
        raise InputError(f"missing parameter set for {spec.name}/{variant}")
    policy = policy or ParasiticPolicy()
    net = Netlist(title=f"{spec.name} {variant_label or variant}")
    b = _Builder(net, policy, params_n, params_p, _model_ref(variant, "n"), _model_ref("traditional", "p"))

    net.add(VoltageSource("VDD", "vdd_src", "0", dc=VDD))
    net.add(Resistor("Rvdd", "vdd_src", "vdd", policy.r_vdd))
    net.add(Resistor("Rgnd", "gnd_int", "0", policy.r_gnd))
    for pin_net in _cross_layer_nets(spec):
        net.add(Resistor(f"Rmiv_{pin_net}", pin_net, pin_net + TOP, policy.r_miv))

    inputs = inputs or {}
    for pin in spec.inputs:
        drive = inputs.get(pin, 0.0)
        if isinstance(drive, dict):
            net.add(VoltageSource(f"V{pin}", pin, "0", **drive))
        else:
            net.add(VoltageSource(f"V{pin}", pin, "0", dc=float(drive)))

    for stage in spec.stages:
        b.network(stage.pull_down, stage.out + TOP, "gnd_int", "n", lambda g: g + TOP)
        b.network(dual(stage.pull_down), "vdd", stage.out, "p", lambda g: g)
    net.add(Capacitor("Cload", spec.output, "0", policy.c_load))
    net.validate()
    return net


def count_cross_layer_nets(spec):
    """Independent count of nets joining top-layer and bottom-layer devices."""
    count = 0
    for name in set(_cross_layer_nets(spec)):
        n_gate = any(name in _leaf_names(s.pull_down) for s in spec.stages)
        drives = any(s.out == name for s in spec.stages)
        count += bool(n_gate or drives)
    return count


def _leaf_names(expr):
    if isinstance(expr, str):
        return {expr}
    return set().union(*(_leaf_names(p) for p in expr.parts))


# -- stimulus ----------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    pin: str
    held: tuple  # ((pin, bool), ...) for the other inputs
    waveform: tuple  # PWL points of the active pin


def _sensitizing(spec, pin):
    others = [p for p in spec.inputs if p != pin]
    for values in spec.input_corners():
        if values[pin]:
            continue
        hi = dict(values, **{pin: True})
        if TRUTH[spec.name](values) != TRUTH[spec.name](hi):
            return tuple((p, values[p]) for p in others)
    raise DomainError(f"{spec.name}: pin {pin} never controls the output")


def stimulus_plan(spec, settings=None):
    """One segment per input pin: a rising then a falling edge on that pin
    while the other pins hold the first assignment (in binary counting
    order) under which the pin controls the output."""
    if isinstance(spec, str):
        spec = get_cell(spec)
    s = settings or SimSettings()
    wave = (
        (0.0, 0.0),
        (s.t_rise, 0.0),
        (s.t_rise + s.edge, VDD),
        (s.t_fall, VDD),
        (s.t_fall + s.edge, 0.0),
    )
    return [Segment(pin, _sensitizing(spec, pin), wave) for pin in spec.inputs]


def segment_inputs(segment):
    drive = {p: (VDD if v else 0.0) for p, v in segment.held}
    drive[segment.pin] = {"dc": 0.0, "pwl": segment.waveform}
    return drive


# -- logic check ---------------------------------------------------------------


def truth_table_check(spec, variant, params_n, params_p, policy=None):
    """DC output at every input corner; returns a list of
    ``(assignment, expected, v_out, ok)`` with ok meaning within 10% of the rail."""
    if isinstance(spec, str):
        spec = get_cell(spec)
    rows = []
    for corner in spec.input_corners():
        drive = {p: VDD if v else 0.0 for p, v in corner.items()}
        net = build_cell_netlist(spec, variant, params_n, params_p, policy, inputs=drive)
        v = dc_operating_point(net)[spec.output]
        want = TRUTH[spec.name](corner)
        ok = v > 0.9 * VDD if want else v < 0.1 * VDD
        rows.append((corner, want, v, ok))
    return rows


# -- PPA -----------------------------------------------------------------------


@dataclass
class PpaEntry:
    cell: str
    variant: str
    delay_s: float
    power_W: float
    t_plh_s: float
    t_phl_s: float
    cell_area_nm2: float
    substrate_area_nm2: float
    charge_residual: float
    arc_delays_s: list = field(default_factory=list)


def simulate_cell(spec, variant, models, policy=None, settings=None):
    """Simulate every stimulus segment of one cell; returns a PpaEntry
    without area fields filled in."""
    if isinstance(spec, str):
        spec = get_cell(spec)
    settings = settings or SimSettings()
    pn = models.get((variant, "n"))
    pp = models.get(("traditional", "p"))
    arcs, rise, fall, powers, resid = [], [], [], [], 0.0
    for seg in stimulus_plan(spec, settings):
        net = build_cell_netlist(spec, variant, pn, pp, policy, inputs=segment_inputs(seg))
        res = transient(net, settings.segment, settings.dt)
        m = measure(res, seg.pin, spec.output, VDD, supply="VDD")
        if len(m.arcs) != 2:
            raise MeasurementError(f"{spec.name}/{variant}: pin {seg.pin} produced {len(m.arcs)} output arcs, expected 2")
        arcs.extend(m.arcs)
        rise.append(m.t_plh)
        fall.append(m.t_phl)
        powers.append(m.power)
        resid = max(resid, res.charge_residual)
    return PpaEntry(
        cell=spec.name,
        variant=variant,
        delay_s=float(np.mean(arcs)),
        power_W=float(np.mean(powers)),
        t_plh_s=float(np.nanmean(rise)),
        t_phl_s=float(np.nanmean(fall)),
        cell_area_nm2=0.0,
        substrate_area_nm2=0.0,
        charge_residual=resid,
        arc_delays_s=[float(a) for a in arcs],
    )


def _job(args):
    cell, variant, models, policy, settings = args
    try:
        return simulate_cell(cell, variant, models, policy, settings), None
    except (ConvergenceError, MeasurementError) as exc:
        return None, {"cell": cell, "variant": variant, "code": exc.code, "message": str(exc)}


@dataclass
class PpaReport:
    entries: list  # PpaEntry, sorted by (cell, variant order)
    diagnostics: list
    cells: tuple
    variants: tuple
    area_summary: object = field(default=None, repr=False)

    def entry(self, cell, variant):
        for e in self.entries:
            if e.cell == cell and e.variant == variant:
                return e
        raise KeyError((cell, variant))

    def _paired(self, variant, attr):
        out = []
        for e in self.entries:
            if e.variant != variant:
                continue
            try:
                base = self.entry(e.cell, "traditional")
            except KeyError:
                continue
            out.append(100.0 * (getattr(e, attr) / getattr(base, attr) - 1.0))
        return out

    def summary(self):
        """Per-variant averages and mean per-cell percent deltas vs traditional."""
        out = {}
        for v in self.variants:
            rows = [e for e in self.entries if e.variant == v]
            if not rows:
                continue
            d = {
                "cells": len(rows),
                "delay_s": float(np.mean([e.delay_s for e in rows])),
                "power_W": float(np.mean([e.power_W for e in rows])),
                "cell_area_nm2": float(np.mean([e.cell_area_nm2 for e in rows])),
                "substrate_area_nm2": float(np.mean([e.substrate_area_nm2 for e in rows])),
            }
            for key, attr in (("delay_delta_pct", "delay_s"), ("power_delta_pct", "power_W")):
                vals = self._paired(v, attr)
                d[key] = float(np.mean(vals)) if vals else None
            if self.area_summary is not None and ("traditional" in self.area_summary.variants):
                d["area_reduction_pct"] = self.area_summary.average_reduction(v)
                d["substrate_reduction_pct"] = self.area_summary.average_reduction(v, "substrate_area")
            if v in REFERENCE:
                d["reference"] = REFERENCE[v]
            out[v] = d
        return out

    def to_dict(self):
        best = self.area_summary.best_substrate_reduction() if self.area_summary else (None, None, None)
        return {
            "format": REPORT_FORMAT,
            "cells": list(self.cells),
            "variants": list(self.variants),
            "entries": [asdict(e) for e in self.entries],
            "diagnostics": list(self.diagnostics),
            "summary": self.summary(),
            "best_substrate_reduction": {
                "pct": best[0], "cell": best[1], "variant": best[2],
                "reference_pct": REFERENCE_SUBSTRATE_PCT,
            },
        }

    def to_json(self):
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        lines = ["cell,variant,delay_s,power_W,cell_area_nm2,substrate_area_nm2"]
        for e in self.entries:
            lines.append(f"{e.cell},{e.variant},{e.delay_s:.6e},{e.power_W:.6e},"
                         f"{e.cell_area_nm2:.6g},{e.substrate_area_nm2:.6g}")
        return "\n".join(lines) + "\n"


def _clean(obj):
    """Round floats so JSON output is stable and NaN-free."""
    if isinstance(obj, float):
        return None if math.isnan(obj) else float(f"{obj:.10g}")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _restore(v):
    return float("nan") if v is None else v


def run_ppa(models, cells=CELL_NAMES, variants=VARIANTS, policy=None, settings=None, jobs=1, process=None):
    """Simulate every (cell, variant) pair and join the layout areas.

    ``models`` maps ``(variant, polarity)`` to ``(ModelParams, ModelConstants)``;
    the traditional p-type entry is required for every variant.
    """
    cells = tuple(cells)
    variants = tuple(variants)
    for c in cells:
        if c not in CELLS:
            raise InputError(f"unknown cell {c!r}")
    for v in variants:
        if v not in VARIANTS:
            raise InputError(f"unknown variant {v!r}")
    needed = {("traditional", "p")} | {(v, "n") for v in variants}
    missing = sorted(needed - set(models))
    if missing:
        raise InputError(f"missing model(s): {', '.join(f'{v}_{p}' for v, p in missing)}")
    policy = policy or ParasiticPolicy()
    settings = settings or SimSettings()
    tasks = [(c, v, models, policy, settings) for c in cells for v in variants]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]

    areas = library_area_summary(process or ProcessParams(), cells=cells)
    entries, diags = [], []
    for entry, diag in results:
        if diag is not None:
            log.warning("%s/%s failed: %s", diag["cell"], diag["variant"], diag["message"])
            diags.append(diag)
            continue
        a = areas.entries[(entry.cell, entry.variant)]
        entry.cell_area_nm2 = a.cell_area
        entry.substrate_area_nm2 = a.substrate_area
        # store at report precision so a reloaded report summarises identically
        entries.append(PpaEntry(**{k: _restore(_clean(v)) for k, v in asdict(entry).items()}))
    return PpaReport(entries, diags, cells, variants, areas)


def report_from_json(text):
    data = json.loads(text)
    if data.get("format") != REPORT_FORMAT:
        raise InputError(f"not a PPA report (format {data.get('format')!r})")
    entries = [PpaEntry(**e) for e in data["entries"]]
    for e in entries:
        for k in ("t_plh_s", "t_phl_s"):
            if getattr(e, k) is None:
                setattr(e, k, float("nan"))
    cells, variants = tuple(data["cells"]), tuple(data["variants"])
    areas = library_area_summary(cells=cells)
    return PpaReport(entries, data["diagnostics"], cells, variants, areas)


__all__ = [
    "MivCellKitError",
    "ParasiticPolicy",
    "PpaEntry",
    "PpaReport",
    "SimSettings",
    "build_cell_netlist",
    "count_cross_layer_nets",
    "run_ppa",
    "simulate_cell",
    "stimulus_plan",
    "truth_table_check",
]
