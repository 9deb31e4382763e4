"""Reduced-order FDSOI compact model.

Drain current and gate capacitance are smooth closed-form functions of the
terminal voltages. Parameter names follow the level-70 (BSIMSOI4) card so
that a fitted parameter vector reads like a SPICE model card, but every
parameter has exactly one role in the equations below (n-type core,
``vds >= 0``)::

    n        = max(1, 1 + cdsc + cdscd*vds)
    vth      = vth0 - dvt0*exp(-dvt1*L/20nm)*0.8V - |etab|*vds
    vgsteff  = n*phi_t*ln(1 + exp((vgs - vth)/(n*phi_t)))
    mu_eff   = u0 / (1 + ua*e + ub*e**2 + ud*e**ucs),   e = vgsteff/1V
    F(u)     = ln(1 + exp(u/2))**2
    i_f      = F((vgs - vth)/(n*phi_t))
    i_r      = F((vgs - vth - n*vds)/(n*phi_t))
    I0       = 2*n*mu_eff*Cox*(W/L)*phi_t**2*(i_f - i_r)
    vdseff   = vgsteff*(1 - i_r/i_f)/(2*n)
    I        = I0 / (1 + vdseff*mu_eff/(2*vsat*L))
    I       *= 1 + pvag*vgsteff*smax(vds - vgsteff, 0)

    C_G(vg)  = W*L*Cox*sig((vg - vth0 - delvt)/(moin*phi_t))
               + W*(cgso + cgdo) + cf
               + W*(cgsl + cgdl)*(1 - sig(vg/ckappa))

``smax`` is a softplus with 10 mV sharpness. For ``vds < 0`` source and
drain swap roles; p-type devices are the voltage mirror of the core,
``I_p(vgs, vds) = -I_core(-vgs, -vds)`` and ``C_p(vg) = C_core(-vg)``.

Conventions that differ from BSIM: ``cdsc``/``cdscd`` are dimensionless
slope-factor contributions and ``etab`` is a plain DIBL coefficient (V/V),
since no body terminal is ever swept.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .errors import DomainError, ParameterError, ParseError

PHI_T = 0.025852  # thermal voltage at 25 C, V
EPS_OX = 3.453e-11  # F/m
L_T = 20e-9  # characteristic length for the dvt0/dvt1 roll-off, m
V_BI = 0.8  # built-in potential, V
SMOOTH = 0.01  # sharpness of the smooth max, V
_STEP = 1e-30  # complex-step size

POLARITIES = ("n", "p")


@dataclass(frozen=True)
class ModelConstants:
    """Geometry and model selectors held fixed during extraction."""

    tsi: float = 7e-9
    tox: float = 1e-9
    tbox: float = 100e-9
    l: float = 48e-9
    w: float = 192e-9
    tnom: float = 25.0
    level: int = 70
    mobmod: int = 4
    capmod: int = 3
    igcmod: int = 0
    soimod: int = 2

    def __post_init__(self):
        for name in ("tsi", "tox", "tbox", "l", "w"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name.upper()} must be positive, got {value!r}")
        if self.igcmod != 0:
            raise ParameterError("IGCMOD must be 0: gate tunnelling current is not modelled")

    @property
    def cox(self):
        return EPS_OX / self.tox


@dataclass(frozen=True)
class ModelParams:
    vth0: float
    delvt: float
    u0: float
    ua: float
    ub: float
    ud: float
    ucs: float
    cdsc: float
    cdscd: float
    dvt0: float
    dvt1: float
    etab: float
    vsat: float
    pvag: float
    ckappa: float
    cf: float
    cgso: float
    cgdo: float
    cgsl: float
    cgdl: float
    moin: float
    polarity: str = "n"

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ParameterError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name.upper()} is not finite: {value!r}")
        for name in ("u0", "vsat", "ckappa", "moin"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name.upper()} must be > 0, got {getattr(self, name)!r}")
        for name in ("ucs", "cf", "cgso", "cgdo", "cgsl", "cgdl"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name.upper()} must be >= 0, got {getattr(self, name)!r}")
        # n >= 1 on vds in [0, 1] V; n is affine in vds so the endpoints suffice
        if self.cdsc < 0 or self.cdsc + self.cdscd < 0:
            raise ParameterError("slope factor 1 + CDSC + CDSCD*vds drops below 1 on [0, 1] V")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}


PARAM_NAMES = tuple(f.name for f in fields(ModelParams) if f.name != "polarity")
CONST_NAMES = tuple(f.name for f in fields(ModelConstants))


@dataclass(frozen=True)
class BiasPoint:
    vgs: float
    vds: float
    vsb: float = 0.0

    def __post_init__(self):
        if self.vsb != 0.0:
            raise DomainError("back-gate bias is not modelled; vsb must be 0")


# -- numerics ---------------------------------------------------------------
# Written to accept complex arguments so that derivatives can be taken by
# the complex-step method; branch selection always uses the real part.


# Masks are applied by multiplication: np.where on complex arrays is slow.


def _softplus(z):
    pos = np.real(z) > 0
    return z * pos + np.log1p(np.exp(z * (1.0 - 2.0 * pos)))


def _sigmoid(z):
    pos = np.real(z) >= 0
    e = np.exp(z * (1.0 - 2.0 * pos))
    return (pos + e * ~pos) / (1.0 + e)


def _floor(z, lo):
    low = np.real(z) < lo
    return z * ~low + lo * low


def _forward_current(p, c, vgs, vds):
    n = 1.0 + p.cdsc + p.cdscd * vds
    n = _floor(n, 1.0)
    vth = p.vth0 - p.dvt0 * np.exp(-p.dvt1 * c.l / L_T) * V_BI - np.abs(p.etab) * vds
    nphi = n * PHI_T
    uf = (vgs - vth) / nphi
    ur = uf - vds / PHI_T

    vgsteff = nphi * _softplus(uf)
    e = _floor(vgsteff, 1e-300)
    mu = p.u0 / (1.0 + p.ua * e + p.ub * e * e + p.ud * np.exp(p.ucs * np.log(e)))

    sf = _softplus(0.5 * uf)
    sf = _floor(sf, 1e-150)
    sr = _softplus(0.5 * ur)
    ratio = sr / sf
    frac = 1.0 - ratio * ratio  # (i_f - i_r) / i_f
    cox = EPS_OX / c.tox
    i0 = 2.0 * n * mu * cox * (c.w / c.l) * PHI_T**2 * (sf * sf) * frac

    vdseff = vgsteff * frac / (2.0 * n)
    ids = i0 / (1.0 + vdseff * mu / (2.0 * p.vsat * c.l))
    return ids * (1.0 + p.pvag * vgsteff * SMOOTH * _softplus((vds - vgsteff) / SMOOTH))


def _core_current(p, c, vgs, vds):
    rev = np.real(vds) < 0
    flip = 1.0 - 2.0 * rev
    i = _forward_current(p, c, vgs - vds * rev, vds * flip)
    return i * flip


def _core_capacitance(p, c, vg):
    cox = EPS_OX / c.tox
    intrinsic = c.w * c.l * cox * _sigmoid((vg - p.vth0 - p.delvt) / (p.moin * PHI_T))
    fixed = c.w * (p.cgso + p.cgdo) + p.cf
    low = c.w * (p.cgsl + p.cgdl) * (1.0 - _sigmoid(vg / p.ckappa))
    return intrinsic + fixed + low


def _core_charge(p, c, vg):
    cox = EPS_OX / c.tox
    scale = p.moin * PHI_T
    centre = p.vth0 + p.delvt
    intrinsic = c.w * c.l * cox * scale * (
        _softplus((vg - centre) / scale) - _softplus(-centre / scale)
    )
    fixed = (c.w * (p.cgso + p.cgdo) + p.cf) * vg
    low = c.w * (p.cgsl + p.cgdl) * (
        vg - p.ckappa * (_softplus(vg / p.ckappa) - math.log(2.0))
    )
    return intrinsic + fixed + low


def _sign(params):
    return 1.0 if params.polarity == "n" else -1.0


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError("bias voltages must be finite")


def _result(value):
    return float(value) if np.ndim(value) == 0 else value


# -- public operations --------------------------------------------------------


def drain_current(params, consts, vgs, vds):
    """Current into the drain terminal, A. Accepts scalars or arrays."""
    vgs = np.asarray(vgs, dtype=float)
    vds = np.asarray(vds, dtype=float)
    _check_finite(vgs, vds)
    s = _sign(params)
    return _result(s * _core_current(params, consts, s * vgs, s * vds))


def source_current(params, consts, vgs, vds):
    """Current into the source terminal. Without gate current it is ``-I_D``."""
    return _result(-np.asarray(drain_current(params, consts, vgs, vds)))


def conductances(params, consts, vgs, vds):
    """Return ``(gm, gds)``, the partial derivatives of the drain current.

    Derivatives are exact to rounding error (complex-step differentiation of
    the closed-form current), not finite differences.
    """
    vgs = np.asarray(vgs, dtype=float)
    vds = np.asarray(vds, dtype=float)
    _check_finite(vgs, vds)
    s = _sign(params)
    h = 1j * _STEP
    # d/dv [s * core(s * v)] = core'(s * v): perturb the core argument directly
    gm = np.imag(_core_current(params, consts, s * vgs + h, s * vds)) / _STEP
    gds = np.imag(_core_current(params, consts, s * vgs, s * vds + h)) / _STEP
    return _result(gm), _result(gds)


def gate_capacitance(params, consts, vg):
    """Total gate capacitance versus gate voltage, F."""
    vg = np.asarray(vg, dtype=float)
    _check_finite(vg)
    s = _sign(params)
    return _result(_core_capacitance(params, consts, s * vg))


def gate_charge(params, consts, vg):
    """Gate charge ``Q(vg) = integral of C_G from 0 to vg`` (closed form), C."""
    vg = np.asarray(vg, dtype=float)
    _check_finite(vg)
    s = _sign(params)
    return _result(s * _core_charge(params, consts, s * vg))


def slope_factor(params, vds):
    return max(1.0, 1.0 + params.cdsc + params.cdscd * abs(vds))


class DeviceBank:
    """Vectorised evaluation of many transistors with differing parameters.

    The circuit solver evaluates every device of a netlist in one call.
    """

    def __init__(self, models):
        """``models`` is a sequence of ``(ModelParams, ModelConstants)``."""
        self.size = len(models)
        self.sign = np.array([_sign(p) for p, _ in models])
        self._p = SimpleNamespace(
            **{name: np.array([getattr(p, name) for p, _ in models]) for name in PARAM_NAMES}
        )
        self._c = SimpleNamespace(
            **{name: np.array([getattr(c, name) for _, c in models], dtype=float) for name in ("l", "w", "tox")}
        )
        self._p2 = SimpleNamespace(**{k: np.tile(v, 2) for k, v in vars(self._p).items()})
        self._c2 = SimpleNamespace(**{k: np.tile(v, 2) for k, v in vars(self._c).items()})

    def currents(self, vgs, vds):
        """Return ``(I_D, gm, gds)`` arrays for the given terminal voltages."""
        s = self.sign
        h = 1j * _STEP
        vg2 = np.concatenate([s * vgs + h, s * vgs]).astype(complex)
        vd2 = np.concatenate([s * vds, s * vds + h]).astype(complex)
        out = _core_current(self._p2, self._c2, vg2, vd2)
        k = self.size
        ids = s * np.real(out[:k])
        gm = np.imag(out[:k]) / _STEP
        gds = np.imag(out[k:]) / _STEP
        return ids, gm, gds

    def charges(self, vgs):
        """Return ``(Q_G, C_G)`` for the lumped gate-to-source charge."""
        s = self.sign
        q = s * _core_charge(self._p, self._c, s * vgs)
        cap = _core_capacitance(self._p, self._c, s * vgs)
        return q, cap


# -- model card I/O ---------------------------------------------------------------

_INT_CONSTS = {"level", "mobmod", "capmod", "igcmod", "soimod"}


def loads_model(text, source=None):
    """Parse a flat ``NAME value`` model card into ``(ModelParams, ModelConstants)``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "*#":
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'NAME value', got {raw!r}", lineno, source)
        key, value = parts[0].lower(), parts[1]
        if key in values:
            raise ParseError(f"duplicate key {parts[0]!r}", lineno, source)
        if key == "polarity":
            if value.lower() not in POLARITIES:
                raise ParseError(f"POLARITY must be n or p, got {value!r}", lineno, source)
            values[key] = value.lower()
        elif key in PARAM_NAMES or key in CONST_NAMES:
            try:
                values[key] = int(value) if key in _INT_CONSTS else float(value)
            except ValueError:
                raise ParseError(f"bad number {value!r} for {parts[0]}", lineno, source) from None
        else:
            raise ParseError(f"unknown key {parts[0]!r}", lineno, source)
    missing = [name.upper() for name in PARAM_NAMES if name not in values]
    if missing:
        raise ParseError(f"missing parameters: {', '.join(missing)}", None, source)
    consts = ModelConstants(**{k: values[k] for k in CONST_NAMES if k in values})
    params = ModelParams(
        **{k: values[k] for k in PARAM_NAMES}, polarity=values.get("polarity", "n")
    )
    return params, consts


def dumps_model(params, consts=None):
    consts = consts if consts is not None else ModelConstants()
    lines = [f"POLARITY {params.polarity}"]
    for name in CONST_NAMES:
        value = getattr(consts, name)
        lines.append(f"{name.upper()} {value if name in _INT_CONSTS else repr(float(value))}")
    for name in PARAM_NAMES:
        lines.append(f"{name.upper()} {float(getattr(params, name))!r}")
    return "\n".join(lines) + "\n"


def read_model(path):
    path = Path(path)
    return loads_model(path.read_text(encoding="utf-8"), source=str(path))


def write_model(path, params, consts=None):
    Path(path).write_text(dumps_model(params, consts), encoding="utf-8", newline="\n")
