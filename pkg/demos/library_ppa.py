"""
Library power, delay and area
=============================

Simulate a handful of cells in every variant and print the per-variant
deltas against the traditional layout. Pass ``--all`` for the whole
library (several minutes on one core).
"""

import sys
from pathlib import Path

from mivcellkit.fixtures import load_fixture_models
from mivcellkit.plotting import ppa_figures
from mivcellkit.stdcells import run_ppa

cells = None if "--all" in sys.argv else ("INV1X1", "NAND2X1", "NOR2X1")
report = run_ppa(load_fixture_models(), **({} if cells is None else {"cells": cells}))

for variant, row in report.summary().items():
    ref = row.get("reference", {})
    print(f"{variant:<12} delay {row['delay_delta_pct']:+6.2f}% (ref {ref.get('delay_delta_pct', 0):+g}%)  "
          f"power {row['power_delta_pct']:+6.2f}% (ref {ref.get('power_delta_pct', 0):+g}%)  "
          f"area -{row['area_reduction_pct']:.2f}%")

out = Path("demo_output")
out.mkdir(exist_ok=True)
for name, svg in ppa_figures(report).items():
    (out / name).write_text(svg)
print("charts written to", out.resolve())
