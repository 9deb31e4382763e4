"""
Footprints and cell areas
=========================

Build the transistor footprints, then place every library cell in a single
row per layer and compare the MIV variants with the two-layer baseline.
"""

from mivcellkit.layout import MIV_VARIANTS, library_area_summary, transistor_footprint

for variant in ("traditional", "ch1", "ch2", "ch4"):
    fp = transistor_footprint(variant, has_external_gate_miv=(variant == "traditional"))
    w, h = fp.bbox
    print(f"{variant:<12} {w:5.0f} x {h:3.0f} nm  channels {fp.channel_widths}")

report = library_area_summary()
for v in MIV_VARIANTS:
    print(f"{v}: average cell-area reduction {report.average_reduction(v):5.2f}%, "
          f"substrate {report.average_reduction(v, 'substrate_area'):5.2f}%")

pct, cell, variant = report.best_substrate_reduction()
print(f"largest substrate saving: {pct:.2f}% ({cell}, {variant})")
