"""
Simulating one standard cell
============================

Build the NAND2 netlist with its MIV and interconnect parasitics, drive one
input while holding the other high, and measure delay and power.
"""

from mivcellkit import stdcells as sc
from mivcellkit.circuit import dumps_netlist, measure, transient
from mivcellkit.fixtures import load_fixture_models

models = load_fixture_models()
pn, pp = models[("ch1", "n")], models[("traditional", "p")]

# DC check of every input corner
for corner, want, v, ok in sc.truth_table_check("NAND2X1", "ch1", pn, pp):
    print(corner, "->", f"{v:.3f} V", "ok" if ok else "WRONG")

seg = sc.stimulus_plan("NAND2X1")[0]
net = sc.build_cell_netlist("NAND2X1", "ch1", pn, pp, inputs=sc.segment_inputs(seg))
print(dumps_netlist(net))

settings = sc.SimSettings()
res = transient(net, settings.segment, settings.dt)
m = measure(res, seg.pin, "Y", sc.VDD)
print(f"pin {seg.pin}: tPHL {m.t_phl * 1e12:.2f} ps, tPLH {m.t_plh * 1e12:.2f} ps, "
      f"power {m.power * 1e6:.3f} uW, charge residual {res.charge_residual:.1e}")
