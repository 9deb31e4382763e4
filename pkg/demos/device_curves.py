"""
Device curves of the four transistor variants
=============================================

Evaluate the shipped n-type model cards on the standard bias sweeps and
compare on-current, off-current and gate capacitance.
"""

import numpy as np

from mivcellkit import device_model as dm
from mivcellkit.fixtures import load_fixture_models

models = load_fixture_models()

# on/off currents at |Vds| = 1 V
print(f"{'variant':<12}{'Ion (uA)':>10}{'Ioff (pA)':>11}{'Cg(1V) (aF)':>13}")
for variant in ("traditional", "ch1", "ch2", "ch4"):
    p, c = models[(variant, "n")]
    ion = dm.drain_current(p, c, 1.0, 1.0)
    ioff = dm.drain_current(p, c, 0.0, 1.0)
    cg = dm.gate_capacitance(p, c, 1.0)
    print(f"{variant:<12}{ion * 1e6:>10.1f}{ioff * 1e12:>11.2f}{cg * 1e18:>13.1f}")

# subthreshold swing from the log slope of the high-drain transfer curve
p, c = models[("ch4", "n")]
vg = np.linspace(0.0, 0.2, 41)
ids = dm.drain_current(p, c, vg, 1.0)
swing = 1e3 / np.mean(np.diff(np.log10(ids)) / np.diff(vg))
print(f"ch4 n subthreshold swing ~ {swing:.0f} mV/dec, slope factor {dm.slope_factor(p, 1.0):.3f}")

# p-type devices mirror the n-type voltages
pp, pc = models[("traditional", "p")]
print("traditional p  Id(-1 V, -1 V) =", f"{dm.drain_current(pp, pc, -1.0, -1.0) * 1e6:.1f} uA")
