"""Circuit netlists: elements, validation and a SPICE-like text format.

Text format, one element per line, ``*`` starts a comment::

    Rload out 0 1000
    Cload out 0 1e-15
    M1 out in 0 model=ch1_n.model polarity=n
    Vdd vdd 0 DC 1.0
    Vin in 0 PWL(0 0 1e-11 1)
    .tran 1e-12 4e-9

Model paths are resolved relative to the netlist file.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..device_model import ModelConstants, ModelParams, read_model
from ..errors import DomainError, InputError, ParseError, PreconditionError

GROUND_NAMES = ("0", "gnd", "GND")


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    value: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    value: float


@dataclass(frozen=True)
class Transistor:
    name: str
    d: str
    g: str
    s: str
    params: ModelParams
    consts: ModelConstants
    model_ref: str | None = None


@dataclass(frozen=True)
class VoltageSource:
    name: str
    pos: str
    neg: str
    dc: float = 0.0
    pwl: tuple | None = None  # ((t0, v0), (t1, v1), ...)

    def __post_init__(self):
        if self.pwl is not None:
            times = [t for t, _ in self.pwl]
            if not self.pwl or any(b <= a for a, b in zip(times, times[1:])):
                raise DomainError(f"{self.name}: PWL times must be strictly increasing")

    def value(self, t):
        """Source voltage at time ``t`` (held constant outside the PWL span)."""
        if self.pwl is None:
            return self.dc
        ts, vs = zip(*self.pwl)
        return float(np.interp(t, ts, vs))

    def breakpoints(self):
        return () if self.pwl is None else tuple(t for t, _ in self.pwl)


@dataclass
class Netlist:
    elements: list = field(default_factory=list)
    tran: tuple | None = None  # (dt, t_stop)
    title: str = ""

    def add(self, element):
        if any(e.name == element.name for e in self.elements):
            raise DomainError(f"duplicate element name {element.name!r}")
        if isinstance(element, (Resistor, Capacitor)) and not element.value > 0:
            raise DomainError(f"{element.name}: value must be > 0, got {element.value}")
        self.elements.append(element)
        return element

    def of_type(self, kind):
        return [e for e in self.elements if isinstance(e, kind)]

    @property
    def resistors(self):
        return self.of_type(Resistor)

    @property
    def capacitors(self):
        return self.of_type(Capacitor)

    @property
    def transistors(self):
        return self.of_type(Transistor)

    @property
    def sources(self):
        return self.of_type(VoltageSource)

    @property
    def nodes(self):
        """Non-ground node names in first-appearance order."""
        seen = {}
        for e in self.elements:
            for n in terminals(e):
                if not is_ground(n):
                    seen.setdefault(n, None)
        return list(seen)

    def element(self, name):
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def validate(self):
        if not self.sources:
            raise PreconditionError("netlist has no voltage source")
        parent = {}

        def find(a):
            a = "0" if is_ground(a) else a
            parent.setdefault(a, a)
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.elements:
            ts = terminals(e)
            for n in ts[1:]:
                parent[find(ts[0])] = find(n)
        floating = sorted(n for n in self.nodes if find(n) != find("0"))
        if floating:
            raise PreconditionError(f"nodes not connected to ground: {', '.join(floating)}")


def is_ground(node):
    return node in GROUND_NAMES


def terminals(e):
    if isinstance(e, Transistor):
        return (e.d, e.g, e.s)
    if isinstance(e, VoltageSource):
        return (e.pos, e.neg)
    return (e.n1, e.n2)


# -- text format ------------------------------------------------------------

_PWL = re.compile(r"PWL\s*\((.*)\)\s*$", re.IGNORECASE)


def _number(tok, lineno, source):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"bad number {tok!r}", lineno, source) from None


def _keywords(tokens, lineno, source):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno, source)
        k, v = tok.split("=", 1)
        out[k.lower()] = v
    return out


def loads_netlist(text, base_dir=".", source=None):
    net = Netlist()
    models = {}
    base_dir = Path(base_dir)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        tok = line.split()
        head = tok[0]
        try:
            if head.lower() == ".tran":
                if len(tok) != 3:
                    raise ParseError("expected '.tran dt tstop'", lineno, source)
                net.tran = (_number(tok[1], lineno, source), _number(tok[2], lineno, source))
            elif head.lower() == ".title":
                net.title = line[len(head):].strip()
            elif head[0] in "Rr" or head[0] in "Cc":
                if len(tok) != 4:
                    raise ParseError(f"expected '{head} n1 n2 value'", lineno, source)
                cls = Resistor if head[0] in "Rr" else Capacitor
                net.add(cls(head, tok[1], tok[2], _number(tok[3], lineno, source)))
            elif head[0] in "Mm":
                if len(tok) < 5:
                    raise ParseError("expected 'M d g s model=<file> [polarity=n|p]'", lineno, source)
                kw = _keywords(tok[4:], lineno, source)
                if "model" not in kw:
                    raise ParseError("transistor needs model=<file>", lineno, source)
                ref = kw["model"]
                if ref not in models:
                    path = base_dir / ref
                    if not path.exists():
                        raise InputError(f"model file not found: {path}")
                    models[ref] = read_model(path)
                params, consts = models[ref]
                pol = kw.get("polarity", params.polarity).lower()
                if pol != params.polarity:
                    raise ParseError(
                        f"polarity={pol} disagrees with model {ref} ({params.polarity})", lineno, source
                    )
                net.add(Transistor(head, tok[1], tok[2], tok[3], params, consts, ref))
            elif head[0] in "Vv":
                if len(tok) < 4:
                    raise ParseError("expected 'V n+ n- DC v' or 'V n+ n- PWL(...)'", lineno, source)
                rest = line.split(None, 3)[3]
                m = _PWL.match(rest)
                if m:
                    nums = [_number(t, lineno, source) for t in m.group(1).replace(",", " ").split()]
                    if len(nums) < 2 or len(nums) % 2:
                        raise ParseError("PWL needs an even number of values", lineno, source)
                    pts = tuple(zip(nums[0::2], nums[1::2]))
                    net.add(VoltageSource(head, tok[1], tok[2], dc=pts[0][1], pwl=pts))
                elif tok[3].upper() == "DC" and len(tok) == 5:
                    net.add(VoltageSource(head, tok[1], tok[2], dc=_number(tok[4], lineno, source)))
                else:
                    raise ParseError(f"cannot parse source value {rest!r}", lineno, source)
            else:
                raise ParseError(f"unknown element {head!r}", lineno, source)
        except DomainError as exc:
            raise ParseError(str(exc), lineno, source) from None
    return net


def read_netlist(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"netlist not found: {path}")
    return loads_netlist(path.read_text(), base_dir=path.parent, source=str(path))


def dumps_netlist(net):
    lines = []
    if net.title:
        lines.append(f".title {net.title}")
    for e in net.elements:
        if isinstance(e, (Resistor, Capacitor)):
            lines.append(f"{e.name} {e.n1} {e.n2} {e.value!r}")
        elif isinstance(e, Transistor):
            if e.model_ref is None:
                raise DomainError(f"{e.name}: transistor has no model file reference")
            lines.append(f"{e.name} {e.d} {e.g} {e.s} model={e.model_ref} polarity={e.params.polarity}")
        elif isinstance(e, VoltageSource):
            if e.pwl is None:
                lines.append(f"{e.name} {e.pos} {e.neg} DC {e.dc!r}")
            else:
                pts = " ".join(f"{t!r} {v!r}" for t, v in e.pwl)
                lines.append(f"{e.name} {e.pos} {e.neg} PWL({pts})")
    if net.tran is not None:
        lines.append(f".tran {net.tran[0]!r} {net.tran[1]!r}")
    return "\n".join(lines) + "\n"


def dumps_waveforms(result, nodes=None):
    """CSV with a ``time_s`` column followed by one column per node."""
    nodes = list(nodes) if nodes is not None else list(result.node_names)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s"] + nodes)
    cols = [result.voltage(n) for n in nodes]
    for k, t in enumerate(result.time):
        w.writerow([f"{t:.6e}"] + [f"{c[k]:.9g}" for c in cols])
    return buf.getvalue()
