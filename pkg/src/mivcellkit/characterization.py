"""Device characteristic curves: data model, CSV I/O, synthetic references
and the region error metric used to score a fit.

Voltages are stored signed. A p-type set sweeps negative voltages, so its
IDVG grid runs from -1.0 V up to 0 V at ``vds = -0.05`` or ``-1.0`` V.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import device_model as dm
from .errors import ParseError, PreconditionError

HEADER = "# miv-cellkit curves v1"
VARIANTS = ("traditional", "ch1", "ch2", "ch4")
VDD = 1.0
LOW_VDS = 0.05
IDVD_VGS = (0.4, 0.6, 0.8, 1.0)
SUBTHRESHOLD_CURRENT = 1e-6  # A, split between log and linear error branches
GRID_STEP = 0.025


class CurveKind(str, enum.Enum):
    IDVG_LOW = "IDVG_LOW"
    IDVG_HIGH = "IDVG_HIGH"
    IDVD = "IDVD"
    CV = "CV"

    @property
    def is_idvg(self):
        return self in (CurveKind.IDVG_LOW, CurveKind.IDVG_HIGH)


def _grid(start, stop):
    count = int(round((stop - start) / GRID_STEP)) + 1
    return np.round(start + GRID_STEP * np.arange(count), 12) + 0.0


def canonical_grid(kind, polarity="n"):
    """Sweep grid (25 mV steps) used for synthetic data, signed by polarity."""
    kind = CurveKind(kind)
    lo, hi = (-0.5, 1.0) if kind is CurveKind.CV else (0.0, VDD)
    if polarity == "p":
        lo, hi = -hi, -lo
    return _grid(lo, hi)


@dataclass(frozen=True, eq=False)
class DeviceCurve:
    kind: CurveKind
    fixed_bias: float
    sweep: np.ndarray
    values: np.ndarray
    polarity: str = "n"

    def __post_init__(self):
        object.__setattr__(self, "kind", CurveKind(self.kind))
        sweep = np.asarray(self.sweep, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "sweep", sweep)
        object.__setattr__(self, "values", values)
        if self.polarity not in dm.POLARITIES:
            raise PreconditionError(f"unknown polarity {self.polarity!r}")
        if sweep.ndim != 1 or sweep.shape != values.shape:
            raise PreconditionError("sweep and values must be 1-D arrays of equal length")
        if sweep.size < 10:
            raise PreconditionError(f"{self.kind.value} curve has {sweep.size} samples, need >= 10")
        if not (np.all(np.isfinite(sweep)) and np.all(np.isfinite(values))):
            raise PreconditionError(f"{self.kind.value} curve contains non-finite samples")
        if np.any(np.diff(sweep) <= 0):
            raise PreconditionError(f"{self.kind.value} sweep is not strictly increasing")

    def __eq__(self, other):
        if not isinstance(other, DeviceCurve):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.fixed_bias == other.fixed_bias
            and self.polarity == other.polarity
            and np.array_equal(self.sweep, other.sweep)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def with_values(self, values):
        return DeviceCurve(self.kind, self.fixed_bias, self.sweep, values, self.polarity)


def _expected_biases(kind, polarity):
    s = 1.0 if polarity == "n" else -1.0
    if kind is CurveKind.IDVG_LOW:
        return [s * LOW_VDS]
    if kind is CurveKind.IDVG_HIGH:
        return [s * VDD]
    if kind is CurveKind.IDVD:
        return [s * v for v in IDVD_VGS]
    return None


@dataclass(frozen=True)
class CharacterizationSet:
    """One IDVG_LOW, one IDVG_HIGH, four IDVD and one CV curve for a device."""

    polarity: str
    curves: tuple
    variant: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        if self.variant is not None and self.variant not in VARIANTS:
            raise PreconditionError(f"unknown variant {self.variant!r}")
        check_complete(self.curves, self.polarity)

    def of_kind(self, kind):
        kind = CurveKind(kind)
        return [c for c in self.curves if c.kind is kind]

    @property
    def idvg_low(self):
        return self.of_kind(CurveKind.IDVG_LOW)[0]

    @property
    def idvg_high(self):
        return self.of_kind(CurveKind.IDVG_HIGH)[0]

    @property
    def idvd(self):
        return sorted(self.of_kind(CurveKind.IDVD), key=lambda c: abs(c.fixed_bias))

    @property
    def cv(self):
        return self.of_kind(CurveKind.CV)[0]

    def canonical_curves(self):
        return [self.idvg_low, self.idvg_high, *self.idvd, self.cv]


def check_complete(curves, polarity):
    """Raise :class:`PreconditionError` unless ``curves`` form a full set."""
    if polarity not in dm.POLARITIES:
        raise PreconditionError(f"unknown polarity {polarity!r}")
    for c in curves:
        if c.polarity != polarity:
            raise PreconditionError("all curves in a set must share one polarity")
    for kind in CurveKind:
        got = sorted(c.fixed_bias for c in curves if c.kind is kind)
        want = _expected_biases(kind, polarity)
        if want is None:
            if len(got) != 1:
                raise PreconditionError(f"expected exactly one CV curve, found {len(got)}")
            continue
        if len(got) != len(want) or not np.allclose(sorted(got), sorted(want), atol=1e-12):
            raise PreconditionError(
                f"{kind.value}: expected fixed biases {sorted(want)}, found {got}"
            )


# -- CSV I/O ----------------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def dumps_curves(cset):
    out = io.StringIO()
    out.write(HEADER + "\n")
    for c in cset.canonical_curves():
        out.write(f"CURVE,{c.kind.value},{c.polarity},{_fmt(c.fixed_bias)}\n")
        for x, y in zip(c.sweep, c.values):
            out.write(f"{_fmt(x)},{_fmt(y)}\n")
    return out.getvalue()


def _number(text, lineno, source):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"bad number {text!r}", lineno, source) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite number {text!r}", lineno, source)
    return value


def loads_curves(text, variant=None, source=None):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != HEADER:
        raise ParseError(f"missing header line {HEADER!r}", 1, source)

    curves = []
    current = None  # (kind, polarity, bias, start line, xs, ys)

    def close(lineno):
        if current is None:
            return
        kind, pol, bias, start, xs, ys = current
        if len(xs) < 10:
            raise ParseError(f"{kind.value} curve has {len(xs)} samples, need >= 10", start, source)
        curves.append(DeviceCurve(kind, bias, np.array(xs), np.array(ys), pol))

    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r").strip()
        if not line:
            continue
        parts = line.split(",")
        if parts[0] == "CURVE":
            close(lineno)
            if len(parts) != 4:
                raise ParseError("expected CURVE,<kind>,<polarity>,<fixed_bias_V>", lineno, source)
            try:
                kind = CurveKind(parts[1])
            except ValueError:
                raise ParseError(f"unknown curve kind {parts[1]!r}", lineno, source) from None
            if parts[2] not in dm.POLARITIES:
                raise ParseError(f"unknown polarity {parts[2]!r}", lineno, source)
            current = (kind, parts[2], _number(parts[3], lineno, source), lineno, [], [])
            continue
        if current is None:
            raise ParseError("sample line before any CURVE line", lineno, source)
        if len(parts) != 2:
            raise ParseError("expected <sweep_V>,<value>", lineno, source)
        x = _number(parts[0], lineno, source)
        y = _number(parts[1], lineno, source)
        xs = current[4]
        if xs and x <= xs[-1]:
            raise ParseError(f"sweep value {x!r} does not increase", lineno, source)
        xs.append(x)
        current[5].append(y)
    close(len(lines))

    if not curves:
        raise ParseError("no curves found", None, source)
    polarity = curves[0].polarity
    try:
        return CharacterizationSet(polarity, curves, variant)
    except PreconditionError as exc:
        raise ParseError(str(exc), len(lines), source) from None


def _guess_variant(path):
    head = Path(path).stem.split("_")[0]
    return head if head in VARIANTS else None


def read_curves(path, variant=None):
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    if variant is None:
        variant = _guess_variant(path)
    return loads_curves(text, variant=variant, source=str(path))


def write_curves(cset, path):
    Path(path).write_bytes(dumps_curves(cset).encode("utf-8"))


# -- model evaluation and synthetic data ------------------------------------------


def simulate_curve(params, consts, like):
    """Evaluate the compact model on the grid and bias of curve ``like``."""
    if like.kind is CurveKind.CV:
        y = dm.gate_capacitance(params, consts, like.sweep)
    elif like.kind is CurveKind.IDVD:
        y = dm.drain_current(params, consts, like.fixed_bias, like.sweep)
    else:
        y = dm.drain_current(params, consts, like.sweep, like.fixed_bias)
    return like.with_values(np.asarray(y, dtype=float))


def template_curves(polarity="n"):
    """Zero-valued curves on the canonical grids, in canonical order."""
    s = 1.0 if polarity == "n" else -1.0
    specs = [(CurveKind.IDVG_LOW, s * LOW_VDS), (CurveKind.IDVG_HIGH, s * VDD)]
    specs += [(CurveKind.IDVD, s * v) for v in IDVD_VGS]
    specs.append((CurveKind.CV, 0.0))
    out = []
    for kind, bias in specs:
        grid = canonical_grid(kind, polarity)
        out.append(DeviceCurve(kind, bias, grid, np.zeros_like(grid), polarity))
    return out


def generate_synthetic(true_params, consts, noise_rel=0.0, seed=0, variant=None):
    """Sample a reference device from the compact model.

    Each sample is multiplied by ``1 + noise_rel * N(0, 1)``; the noise stream
    is drawn in canonical curve order from a generator seeded with ``seed``.
    """
    if not 0.0 <= noise_rel <= 0.1:
        raise PreconditionError(f"noise_rel must lie in [0, 0.1], got {noise_rel!r}")
    rng = np.random.default_rng(seed)
    curves = []
    for like in template_curves(true_params.polarity):
        clean = simulate_curve(true_params, consts, like)
        noise = rng.standard_normal(clean.values.size)
        values = clean.values if noise_rel == 0 else clean.values * (1.0 + noise_rel * noise)
        curves.append(clean.with_values(values))
    return CharacterizationSet(true_params.polarity, curves, variant)


# -- error metric --------------------------------------------------------------------


def _normalized_mae(model, ref):
    floor = 1e-3 * np.max(np.abs(ref))
    if floor == 0:
        return 0.0 if np.array_equal(model, ref) else float("inf")
    return float(np.mean(np.abs(model - ref) / np.maximum(np.abs(ref), floor)))


def region_error(model_curve, ref_curve):
    """Fit error of ``model_curve`` against ``ref_curve`` in percent.

    Normalised mean absolute error, each sample scaled by ``max(|y_ref|,
    1e-3 * max|y_ref|)``. IDVG curves are split at |I_ref| = 1 uA: below it
    log10|I| is compared, above it the current itself, and the two branch
    errors are averaged with equal weight.
    """
    if not np.array_equal(model_curve.sweep, ref_curve.sweep):
        raise PreconditionError("region_error needs identical sweep grids")
    ym = model_curve.values
    yr = ref_curve.values
    if not ref_curve.kind.is_idvg:
        return 100.0 * _normalized_mae(ym, yr)

    sub = np.abs(yr) < SUBTHRESHOLD_CURRENT
    parts = []
    if np.any(sub):
        lm = np.log10(np.maximum(np.abs(ym[sub]), 1e-300))
        lr = np.log10(np.maximum(np.abs(yr[sub]), 1e-300))
        parts.append(_normalized_mae(lm, lr))
    if np.any(~sub):
        parts.append(_normalized_mae(ym[~sub], yr[~sub]))
    return 100.0 * float(np.mean(parts))


@dataclass
class RegionErrors:
    idvg: float
    idvd: float
    cv: float
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {"IDVG": self.idvg, "IDVD": self.idvd, "CV": self.cv}


def region_errors(params, consts, target):
    """Table-style errors: IDVG (mean of LOW/HIGH), IDVD (mean of 4), CV."""
    detail = {}
    for c in target.canonical_curves():
        key = c.kind.value if c.kind is not CurveKind.IDVD else f"IDVD@{c.fixed_bias:g}"
        detail[key] = region_error(simulate_curve(params, consts, c), c)
    idvg = 0.5 * (detail["IDVG_LOW"] + detail["IDVG_HIGH"])
    idvd = float(np.mean([v for k, v in detail.items() if k.startswith("IDVD@")]))
    return RegionErrors(idvg, idvd, detail["CV"], detail)
