"""Propagation delay and average power from transient waveforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MeasurementError


@dataclass(frozen=True)
class Measurement:
    t_plh: float  # mean output low-to-high delay, s (nan if no such arc)
    t_phl: float
    delay: float  # mean over all arcs
    power: float  # W
    arcs: tuple = ()  # per-arc delays in stimulus order


def crossings(t, v, level):
    """Times and directions (+1 rising, -1 falling) where ``v`` crosses ``level``."""
    v = np.asarray(v, dtype=float)
    above = v >= level
    k = np.nonzero(above[1:] != above[:-1])[0]
    frac = (level - v[k]) / (v[k + 1] - v[k])
    times = t[k] + frac * (t[k + 1] - t[k])
    return times, np.where(above[k + 1], 1, -1)


def measure(result, in_node, out_node, vdd, supply="VDD", t_window=None):
    """Delays of every input edge that propagates to the output.

    Each input crossing is paired with the first output crossing after it
    and before the next input crossing.
    """
    t = result.time
    vin, vout = result.voltage(in_node), result.voltage(out_node)
    half = 0.5 * vdd
    t_in, _ = crossings(t, vin, half)
    t_out, d_out = crossings(t, vout, half)
    if t_in.size == 0:
        raise MeasurementError(f"no crossing on input {in_node}")
    if t_out.size == 0:
        raise MeasurementError(f"no crossing on output {out_node}")
    bounds = np.append(t_in[1:], np.inf)
    rise, fall, arcs = [], [], []
    for t0, t1 in zip(t_in, bounds):
        hit = np.nonzero((t_out >= t0) & (t_out < t1))[0]
        if hit.size == 0:
            continue
        d = float(t_out[hit[0]] - t0)
        arcs.append(d)
        (rise if d_out[hit[0]] > 0 else fall).append(d)
    if not arcs:
        raise MeasurementError(f"no output crossing follows an input crossing on {in_node}")
    return Measurement(
        t_plh=float(np.mean(rise)) if rise else float("nan"),
        t_phl=float(np.mean(fall)) if fall else float("nan"),
        delay=float(np.mean(arcs)),
        power=average_power(result, vdd, supply, t_window),
        arcs=tuple(arcs),
    )


def average_power(result, vdd, supply="VDD", t_window=None):
    """(1/T) * integral of vdd * i_supply over the window (trapezoid rule)."""
    t = result.time
    i = result.supply_current(supply)
    if t_window is not None:
        sel = (t >= t_window[0]) & (t <= t_window[1])
        t, i = t[sel], i[sel]
    span = t[-1] - t[0]
    if span <= 0:
        raise MeasurementError("power window is empty")
    return float(vdd * np.trapezoid(i, t) / span)
