"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
The full-library simulation and extraction runs take several minutes.
"""

import math
import warnings

import numpy as np
import pytest

from mivcellkit import device_model as dm
from mivcellkit import extraction as ex
from mivcellkit import stdcells as sc
from mivcellkit.cells import CELL_NAMES
from mivcellkit.characterization import generate_synthetic
from mivcellkit.circuit import dc_operating_point, transient
from mivcellkit.circuit.mna import _Circuit
from mivcellkit.circuit.netlist import Netlist, Resistor, VoltageSource
from mivcellkit.cli import main
from mivcellkit.layout import MIV_VARIANTS, VARIANTS, library_area_summary

from test_circuit import inverter, rc_exact, rc_net

DEVICES = [(v, p) for v in VARIANTS for p in ("n", "p")]


@pytest.fixture(scope="session")
def full_ppa(models):
    return sc.run_ppa(models)


def _extract(models, bounds, key, noise, seed):
    p, c = models[key]
    target = generate_synthetic(p, c, noise, seed=seed, variant=key[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ex.BoundWarning)
        return ex.extract(target, bounds, c, seed=seed)


def test_criterion_1_extraction_error(models, bounds, verdict):
    worst = {0.0: 0.0, 0.01: 0.0}
    slowest = 0.0
    for k, key in enumerate(DEVICES):
        for noise in worst:
            rep = _extract(models, bounds, key, noise, seed=100 + k)
            worst[noise] = max(worst[noise], *rep.errors.values())
            slowest = max(slowest, rep.wall_time)
    ok = worst[0.01] < 10.0 and worst[0.0] < 2.0 and slowest < 300.0
    verdict(1, "extraction region errors", ok,
            f"worst {worst[0.01]:.3f}% at 1% noise, {worst[0.0]:.3f}% noiseless; slowest {slowest:.0f} s")
    assert ok


def test_criterion_2_optimizer_benchmark(verdict):
    def rosen(x):
        return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

    results = [ex.optimize(rosen, [-2, -1], [2, 3], x0, budget=2000, restarts=3, seed=s)
               for s, x0 in enumerate([(-1.2, 1.0), (1.5, -0.5), (-1.9, 2.9)])]
    worst = max(r.fun for r in results)
    ok = worst < 1e-3 and all(r.nit <= 3 * 2000 for r in results)
    verdict(2, "bounded Nelder-Mead on Rosenbrock", ok, f"worst objective {worst:.2e}")
    assert ok


def _rc_error():
    tau, edge = 1e-9, 1e-11
    res = transient(rc_net(edge=edge), t_stop=2 * tau, dt=tau / 100)
    k = int(np.argmin(np.abs(res.time - tau)))
    return abs(res.voltage("out")[k] / rc_exact(res.time[k], tau, edge) - 1)


def _order():
    tau, edge, t_end = 1e-9, 1e-10, 2e-9
    errs = []
    for dt in (2e-11, 1e-11, 5e-12):
        res = transient(rc_net(edge=edge), t_stop=t_end, dt=dt, damp_breakpoints=False)
        errs.append(abs(res.voltage("out")[-1] - rc_exact(t_end, tau, edge)))
    return [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]


def _random_network_error(seed):
    rng = np.random.default_rng(seed)
    n = 10
    g = np.zeros((n + 1, n + 1))
    net = Netlist()
    net.add(VoltageSource("V1", "n0", "0", dc=float(rng.uniform(0.5, 2))))
    name = lambda i: "0" if i == n else f"n{i}"  # noqa: E731
    edges = [(k, k + 1) for k in range(n)] + [tuple(rng.choice(n + 1, 2, replace=False)) for _ in range(20)]
    for k, (a, b) in enumerate(edges):
        r = float(rng.uniform(1, 1e5))
        net.add(Resistor(f"R{k}", name(a), name(b), r))
        g[np.ix_([a, b], [a, b])] += np.array([[1, -1], [-1, 1]]) / r
    free = np.arange(1, n)
    vs = net.element("V1").dc
    v = np.linalg.solve(g[np.ix_(free, free)], -g[free, 0] * vs)
    op = dc_operating_point(net)
    return max(abs(op[f"n{i}"] - vi) for i, vi in zip(free, v))


def _jacobian_error(models):
    rng = np.random.default_rng(1)
    worst = 0.0
    for vin in (0.2, 0.5, 0.8):
        ckt = _Circuit(inverter(models, vin))
        x = rng.uniform(0, 1, ckt.size)
        x[ckt.gnd] = 0.0
        vsrc = ckt.source_values(0.0)
        _, jac, *_ = ckt.residual(x, vsrc)
        h = 1e-7
        for k in range(ckt.n):
            e = np.zeros(ckt.size)
            e[k] = h
            fd = (ckt.residual(x + e, vsrc)[0] - ckt.residual(x - e, vsrc)[0]) / (2 * h)
            scale = np.maximum(np.abs(fd), 1e-9)
            worst = max(worst, float(np.max(np.abs(jac[:, k] - fd) / scale)))
    return worst


def test_criterion_3_simulator(models, verdict):
    rc = _rc_error()
    orders = _order()
    lin = max(_random_network_error(s) for s in range(20))
    jac = _jacobian_error(models)
    ok = rc < 5e-3 and all(1.8 <= o <= 2.2 for o in orders) and lin < 1e-9 and jac < 1e-4
    verdict(3, "simulator correctness", ok,
            f"RC {100 * rc:.3f}%, order {orders[0]:.2f}/{orders[1]:.2f}, linear {lin:.1e} V, jacobian {jac:.1e}")
    assert ok


def test_criterion_4_truth_tables(models, verdict):
    failures = []
    for v in VARIANTS:
        pn, pp = models[(v, "n")], models[("traditional", "p")]
        for name in CELL_NAMES:
            failures += [(name, v, c) for c, _, _, ok in sc.truth_table_check(name, v, pn, pp) if not ok]
    ok = not failures
    verdict(4, "DC truth tables, 14 cells x 4 variants", ok, f"{len(failures)} failing corners")
    assert ok, failures[:5]


def test_criterion_5_area_direction(verdict):
    rep = library_area_summary()
    per_cell = [rep.reduction(c, v) for c in CELL_NAMES for v in MIV_VARIANTS]
    avgs = {v: rep.average_reduction(v) for v in MIV_VARIANTS}
    best = rep.best_substrate_reduction()
    ok = all(a > 0 for a in avgs.values()) and all(1.0 <= r <= 35.0 for r in per_cell)
    ref = {v: sc.REFERENCE[v]["area_reduction_pct"] for v in MIV_VARIANTS}
    text = ", ".join(f"{v} {avgs[v]:.2f}% (ref {ref[v]:g}%)" for v in MIV_VARIANTS)
    verdict(5, "cell-area reduction", ok,
            f"{text}; per-cell {min(per_cell):.2f}..{max(per_cell):.2f}%; best substrate {best[0]:.2f}% "
            f"{best[1]}/{best[2]} (ref up to {sc.REFERENCE_SUBSTRATE_PCT:g}%)")
    assert ok


def test_criterion_6_ppa_plausibility(full_ppa, verdict):
    rep = full_ppa
    bad = [(e.cell, e.variant) for e in rep.entries if not (1e-12 <= e.delay_s <= 1e-8 and e.power_W > 0)]
    ok = len(rep.entries) == 56 and not rep.diagnostics and not bad
    summ = rep.summary()
    text = "; ".join(
        f"{v} delay {summ[v]['delay_delta_pct']:+.2f}% (ref {sc.REFERENCE[v]['delay_delta_pct']:+g}%) "
        f"power {summ[v]['power_delta_pct']:+.2f}% (ref {sc.REFERENCE[v]['power_delta_pct']:+g}%)"
        for v in MIV_VARIANTS)
    verdict(6, "PPA plausibility over 56 pairs", ok, text)
    assert ok, (bad, rep.diagnostics)


def _pipeline(root, seed):
    curves, fit, out = root / "curves", root / "fit", root / "out"
    argv = [
        ["--seed", seed, "gen-synthetic", "--out", curves],
        ["--seed", seed, "extract", "--curves", curves / "ch2_n.csv", "--out", fit, "--budget", 400],
        ["area", "--out", out / "area.csv"],
        ["ppa", "--cells", "INV1X1,NAND2X1", "--variants", "traditional,ch2", "--out", out / "ppa.json",
         "--csv", out / "ppa.csv"],
        ["plot", "--report", out / "ppa.json", "--curves", curves / "ch2_n.csv", "--fitted", fit,
         "--out", out / "figs"],
    ]
    for a in argv:
        assert main([str(x) for x in a]) == 0, a
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_7_determinism(tmp_path, verdict):
    a = _pipeline(tmp_path / "a", 7)
    b = _pipeline(tmp_path / "b", 7)
    differ = sorted(str(k) for k in a if a[k] != b.get(k))
    kinds = {k.suffix for k in a}
    ok = a.keys() == b.keys() and not differ and {".json", ".csv", ".svg"} <= kinds
    verdict(7, "byte-identical pipeline reruns", ok, f"{len(a)} files compared, {len(differ)} differ")
    assert ok, differ


def test_criterion_8_conservation(models, full_ppa, verdict):
    rng = np.random.default_rng(8)
    vgs, vds = rng.uniform(-1, 1, (2, 10_000))
    worst_i = max(float(np.max(np.abs(dm.drain_current(p, c, vgs, vds) + dm.source_current(p, c, vgs, vds))))
                  for p, c in models.values())
    worst_q = max(e.charge_residual for e in full_ppa.entries)
    ok = worst_i == 0.0 and worst_q < 1e-3 and len(full_ppa.entries) == 56
    verdict(8, "current and charge conservation", ok,
            f"max |I_S + I_D| {worst_i:.1e} A; max charge residual {100 * worst_q:.4f}%")
    assert ok
