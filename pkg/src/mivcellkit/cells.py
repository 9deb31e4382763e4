"""Static CMOS topologies of the 14-cell library.

A cell is a chain of complementary stages. Each stage drives one net with
``NOT(pull_down)``, where the pull-down network is a series/parallel
expression over nets: a net name, ``Series(...)`` (logical AND) or
``Parallel(...)`` (logical OR). The pull-up network is its dual.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product


@dataclass(frozen=True)
class Series:
    parts: tuple

    def __init__(self, *parts):
        object.__setattr__(self, "parts", tuple(parts))


@dataclass(frozen=True)
class Parallel:
    parts: tuple

    def __init__(self, *parts):
        object.__setattr__(self, "parts", tuple(parts))


def dual(expr):
    if isinstance(expr, str):
        return expr
    flipped = Parallel if isinstance(expr, Series) else Series
    return flipped(*(dual(p) for p in expr.parts))


def leaves(expr):
    if isinstance(expr, str):
        return [expr]
    return [leaf for p in expr.parts for leaf in leaves(p)]


def evaluate(expr, values):
    if isinstance(expr, str):
        return values[expr]
    if isinstance(expr, Series):
        return all(evaluate(p, values) for p in expr.parts)
    return any(evaluate(p, values) for p in expr.parts)


@dataclass(frozen=True)
class Stage:
    out: str
    pull_down: object


@dataclass(frozen=True)
class CellSpec:
    name: str
    inputs: tuple
    output: str
    stages: tuple

    @property
    def n_devices(self):
        """Pull-down (n-type) device count; the pull-up count is identical."""
        return sum(len(leaves(s.pull_down)) for s in self.stages)

    @property
    def p_devices(self):
        return sum(len(leaves(dual(s.pull_down))) for s in self.stages)

    def simulate_logic(self, assignment):
        """Boolean output of the transistor topology for one input assignment."""
        values = dict(assignment)
        for stage in self.stages:
            values[stage.out] = not evaluate(stage.pull_down, values)
        return values[self.output]

    def input_corners(self):
        for bits in product((False, True), repeat=len(self.inputs)):
            yield dict(zip(self.inputs, bits))


def _inv(out, src):
    return Stage(out, src)


_CELLS = [
    CellSpec("AND2X1", ("A", "B"), "Y", (Stage("n1", Series("A", "B")), _inv("Y", "n1"))),
    CellSpec("AND3X1", ("A", "B", "C"), "Y", (Stage("n1", Series("A", "B", "C")), _inv("Y", "n1"))),
    # AOI21 / OAI21 forms
    CellSpec("AOI2X1", ("A", "B", "C"), "Y", (Stage("Y", Parallel(Series("A", "B"), "C")),)),
    CellSpec("INV1X1", ("A",), "Y", (_inv("Y", "A"),)),
    CellSpec(
        "MUX2X1",
        ("A", "B", "S"),
        "Y",
        (
            _inv("An", "A"),
            _inv("Bn", "B"),
            _inv("Sn", "S"),
            Stage("Y", Parallel(Series("S", "An"), Series("Sn", "Bn"))),
        ),
    ),
    CellSpec("NAND2X1", ("A", "B"), "Y", (Stage("Y", Series("A", "B")),)),
    CellSpec("NAND3X1", ("A", "B", "C"), "Y", (Stage("Y", Series("A", "B", "C")),)),
    CellSpec("NOR2X1", ("A", "B"), "Y", (Stage("Y", Parallel("A", "B")),)),
    CellSpec("NOR3X1", ("A", "B", "C"), "Y", (Stage("Y", Parallel("A", "B", "C")),)),
    CellSpec("OAI2X1", ("A", "B", "C"), "Y", (Stage("Y", Series(Parallel("A", "B"), "C")),)),
    CellSpec("OR2X1", ("A", "B"), "Y", (Stage("n1", Parallel("A", "B")), _inv("Y", "n1"))),
    CellSpec("OR3X1", ("A", "B", "C"), "Y", (Stage("n1", Parallel("A", "B", "C")), _inv("Y", "n1"))),
    CellSpec(
        "XNOR2X1",
        ("A", "B"),
        "Y",
        (_inv("An", "A"), _inv("Bn", "B"), Stage("Y", Parallel(Series("A", "Bn"), Series("An", "B"))))),
    CellSpec(
        "XOR2X1",
        ("A", "B"),
        "Y",
        (_inv("An", "A"), _inv("Bn", "B"), Stage("Y", Parallel(Series("A", "B"), Series("An", "Bn"))))),
]

CELLS = {c.name: c for c in _CELLS}
CELL_NAMES = tuple(CELLS)

# Reference Boolean functions, written independently of the topologies above.
TRUTH = {
    "AND2X1": lambda v: v["A"] and v["B"],
    "AND3X1": lambda v: v["A"] and v["B"] and v["C"],
    "AOI2X1": lambda v: not ((v["A"] and v["B"]) or v["C"]),
    "INV1X1": lambda v: not v["A"],
    "MUX2X1": lambda v: v["A"] if v["S"] else v["B"],
    "NAND2X1": lambda v: not (v["A"] and v["B"]),
    "NAND3X1": lambda v: not (v["A"] and v["B"] and v["C"]),
    "NOR2X1": lambda v: not (v["A"] or v["B"]),
    "NOR3X1": lambda v: not (v["A"] or v["B"] or v["C"]),
    "OAI2X1": lambda v: not ((v["A"] or v["B"]) and v["C"]),
    "OR2X1": lambda v: v["A"] or v["B"],
    "OR3X1": lambda v: v["A"] or v["B"] or v["C"],
    "XNOR2X1": lambda v: v["A"] == v["B"],
    "XOR2X1": lambda v: v["A"] != v["B"],
}


def get_cell(name):
    try:
        return CELLS[name]
    except KeyError:
        raise KeyError(f"unknown cell {name!r}; library has {', '.join(CELL_NAMES)}") from None
