"""Modified nodal analysis with Newton iteration.

Unknowns are the non-ground node voltages followed by one branch current
per voltage source. Ground occupies one extra row/column during assembly
that is pinned to zero before solving, which keeps the stamping code free
of special cases.

Charge-storing elements (linear capacitors and the lumped gate charge of
each transistor) are integrated in charge form:

    i_{n+1} = a * (q_{n+1} - q_n) - b * i_n

with ``a = 1/h, b = 0`` for backward Euler and ``a = 2/h, b = 1`` for the
trapezoidal rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..device_model import DeviceBank
from ..errors import ConvergenceError, DomainError
from .netlist import is_ground

log = logging.getLogger(__name__)

V_TOL = 1e-6
I_TOL = 1e-9
MAX_ITER = 100
V_STEP_LIMIT = 0.3  # per-iteration node voltage change cap, V
GMIN_LADDER = tuple(10.0**-k for k in range(3, 13))
SOURCE_STEPS = 10


class _Circuit:
    """Index arrays and device banks for one netlist."""

    def __init__(self, netlist):
        netlist.validate()
        self.netlist = netlist
        self.node_names = netlist.nodes
        self.n = len(self.node_names)
        index = {name: k for k, name in enumerate(self.node_names)}
        gnd = self.n
        self.gnd = gnd

        def idx(node):
            return gnd if is_ground(node) else index[node]

        self.index = idx
        self.sources = netlist.sources
        self.m = len(self.sources)
        self.size = self.n + 1 + self.m
        size = self.size

        res = netlist.resistors
        self.r_a = np.array([idx(r.n1) for r in res], dtype=int)
        self.r_b = np.array([idx(r.n2) for r in res], dtype=int)
        self.r_g = np.array([1.0 / r.value for r in res])

        tr = netlist.transistors
        self.t_d = np.array([idx(t.d) for t in tr], dtype=int)
        self.t_g = np.array([idx(t.g) for t in tr], dtype=int)
        self.t_s = np.array([idx(t.s) for t in tr], dtype=int)
        self.bank = DeviceBank([(t.params, t.consts) for t in tr]) if tr else None

        caps = netlist.capacitors
        self.c_a = np.array([idx(c.n1) for c in caps], dtype=int)
        self.c_b = np.array([idx(c.n2) for c in caps], dtype=int)
        self.c_val = np.array([c.value for c in caps])
        # all charge elements: linear caps first, then transistor gate charges
        self.q_a = np.concatenate([self.c_a, self.t_g])
        self.q_b = np.concatenate([self.c_b, self.t_s])

        self.s_pos = np.array([idx(s.pos) for s in self.sources], dtype=int)
        self.s_neg = np.array([idx(s.neg) for s in self.sources], dtype=int)
        self.s_row = self.n + 1 + np.arange(self.m)

        def pair(a, b):
            # flat Jacobian positions of a two-terminal conductance stamp
            return np.concatenate([a * size + a, a * size + b, b * size + a, b * size + b])

        self.r_flat = pair(self.r_a, self.r_b)
        self.r_jac = np.bincount(self.r_flat, np.tile(self.r_g, 4) * np.repeat([1, -1, -1, 1], len(res)),
                                 minlength=size * size) if len(res) else np.zeros(size * size)
        self.q_flat = pair(self.q_a, self.q_b)
        d, g, s = self.t_d, self.t_g, self.t_s
        self.t_flat = np.concatenate([d * size + d, d * size + g, d * size + s,
                                      s * size + d, s * size + g, s * size + s])
        src = np.zeros((size, size))
        for k in range(self.m):
            p, q, row = self.s_pos[k], self.s_neg[k], self.s_row[k]
            src[p, row] += 1.0
            src[q, row] -= 1.0
            src[row, p] += 1.0
            src[row, q] -= 1.0
        self.src_jac = src.ravel()
        ga, gb = self.q_a == gnd, self.q_b == gnd
        self.ground_sign = (gb & ~ga).astype(float) - (ga & ~gb).astype(float)
        self.breakpoints = sorted({t for s in self.sources for t in s.breakpoints()})

    def source_values(self, t, scale=1.0):
        return np.array([s.value(t) for s in self.sources]) * scale

    def voltages(self, x):
        v = x[: self.n + 1].copy()
        v[self.gnd] = 0.0
        return v

    def charges(self, v):
        """Charge of every charge element and its derivative w.r.t. v_a - v_b."""
        dv_c = v[self.c_a] - v[self.c_b]
        if self.bank is None:
            return self.c_val * dv_c, self.c_val
        qg, cg = self.bank.charges(v[self.t_g] - v[self.t_s])
        return np.concatenate([self.c_val * dv_c, qg]), np.concatenate([self.c_val, cg])

    def conductive(self, x, vsrc, gmin=0.0, jac=True):
        """Residual and Jacobian of every element except the charge storage."""
        size, n = self.size, self.n
        v = self.voltages(x)
        f = np.zeros(size)
        ir = self.r_g * (v[self.r_a] - v[self.r_b])
        f += np.bincount(self.r_a, ir, minlength=size) - np.bincount(self.r_b, ir, minlength=size)
        j = self.r_jac + self.src_jac if jac else None
        if self.bank is not None:
            ids, gm, gds = self.bank.currents(v[self.t_g] - v[self.t_s], v[self.t_d] - v[self.t_s])
            f += np.bincount(self.t_d, ids, minlength=size) - np.bincount(self.t_s, ids, minlength=size)
            if jac:
                w = np.concatenate([gds, gm, -gm - gds, -gds, -gm, gm + gds])
                j = j + np.bincount(self.t_flat, w, minlength=size * size)
        jb = x[n + 1:]
        f += np.bincount(self.s_pos, jb, minlength=size) - np.bincount(self.s_neg, jb, minlength=size)
        f[self.s_row] = v[self.s_pos] - v[self.s_neg] - vsrc
        if gmin:
            f[:n] += gmin * v[:n]
            if jac:
                j = j.copy()
                j[np.arange(n) * (size + 1)] += gmin
        return f, j

    def residual(self, x, vsrc, gmin=0.0, alpha=0.0, q_prev=None, i_prev=None, beta=0.0):
        """Full residual and Jacobian, plus the element charges, charge
        currents and net conductive inflow into the non-ground nodes."""
        size = self.size
        f, j = self.conductive(x, vsrc, gmin)
        inflow = -float(np.sum(f[: self.n]))
        q = i_c = None
        if alpha:
            v = self.voltages(x)
            q, c = self.charges(v)
            i_c = alpha * (q - q_prev) - beta * i_prev
            f += np.bincount(self.q_a, i_c, minlength=size) - np.bincount(self.q_b, i_c, minlength=size)
            cw = alpha * c
            j = j + np.bincount(self.q_flat, np.concatenate([cw, -cw, -cw, cw]), minlength=size * size)
        return f, j.reshape(size, size), q, i_c, inflow

    def newton(self, x0, vsrc, gmin=0.0, alpha=0.0, q_prev=None, i_prev=None, beta=0.0, max_iter=MAX_ITER):
        """Return ``(x, residual, extras)``; ``x`` is None on failure.

        The accepted point is the iterate whose residual passed the current
        tolerance and whose Newton update passed the voltage tolerance, so
        the charges returned in ``extras`` belong to it exactly.
        """
        n, gnd = self.n, self.gnd
        x = x0.copy()
        worst = np.inf
        for _ in range(max_iter):
            f, jac, q, i_c, inflow = self.residual(x, vsrc, gmin, alpha, q_prev, i_prev, beta)
            f[gnd] = 0.0
            jac[gnd, :] = 0.0
            jac[:, gnd] = 0.0
            jac[gnd, gnd] = 1.0
            worst = float(np.max(np.abs(f[:n]))) if n else 0.0
            try:
                dx = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                return None, worst, None
            if not np.all(np.isfinite(dx)):
                return None, worst, None
            dv = dx[:n]
            big = np.max(np.abs(dv)) if n else 0.0
            if big < V_TOL and worst < I_TOL:
                return x, worst, (q, i_c, inflow)
            if big > V_STEP_LIMIT:
                dx[:n] = np.clip(dv, -V_STEP_LIMIT, V_STEP_LIMIT)
            x = x + dx
        return None, worst, None

    def kcl_residual(self, x, t):
        f, _ = self.conductive(x, self.source_values(t), jac=False)
        return float(np.max(np.abs(f[: self.n]))) if self.n else 0.0


def _dc_solve(ckt, t=0.0, x0=None):
    vsrc = ckt.source_values(t)
    x0 = np.zeros(ckt.size) if x0 is None else x0
    x, res, _ = ckt.newton(x0, vsrc)
    if x is not None:
        return x
    log.debug("plain Newton failed (residual %.3g); gmin stepping", res)
    x = x0
    for gmin in GMIN_LADDER:
        x_try, res, _ = ckt.newton(x, vsrc, gmin=gmin)
        if x_try is None:
            break
        x = x_try
    else:
        x_try, res, _ = ckt.newton(x, vsrc)
        if x_try is not None:
            return x_try
    log.debug("gmin stepping failed (residual %.3g); source stepping", res)
    x = np.zeros(ckt.size)
    for k in range(1, SOURCE_STEPS + 1):
        x, res, _ = ckt.newton(x, vsrc * k / SOURCE_STEPS)
        if x is None:
            raise ConvergenceError("DC operating point did not converge", residual=res)
    return x


def dc_operating_point(netlist, t=0.0):
    """Node voltages ``{name: V}`` at time ``t`` of the source waveforms."""
    ckt = _Circuit(netlist)
    x = _dc_solve(ckt, t)
    return {name: float(x[k]) for k, name in enumerate(ckt.node_names)}


@dataclass
class TransientResult:
    time: np.ndarray
    node_names: list
    voltages: np.ndarray  # (len(time), n_nodes)
    source_currents: dict  # name -> current delivered out of the + terminal, A
    charge_residual: float = 0.0
    stored_charge: np.ndarray = field(default=None, repr=False)
    inflow_charge: np.ndarray = field(default=None, repr=False)

    def voltage(self, node):
        if is_ground(node):
            return np.zeros_like(self.time)
        try:
            return self.voltages[:, self.node_names.index(node)]
        except ValueError:
            raise KeyError(f"no node {node!r}") from None

    def supply_current(self, source):
        return self.source_currents[source]


class _Stepper:
    def __init__(self, ckt, x, q, i_c, stored, inflow_now):
        self.ckt = ckt
        self.x, self.q, self.i_c = x, q, i_c
        self.stored = stored
        self.inflow_now = inflow_now  # net conductive current into non-ground nodes
        self.inflow = 0.0

    def _inflow(self, x, t):
        f, _ = self.ckt.conductive(x, self.ckt.source_values(t), jac=False)
        return -float(np.sum(f[: self.ckt.n]))

    def step(self, t_new, h, trap, depth=0):
        ckt = self.ckt
        alpha, beta = (2.0 / h, 1.0) if trap else (1.0 / h, 0.0)
        x, res, extras = ckt.newton(self.x, ckt.source_values(t_new), alpha=alpha, q_prev=self.q,
                                    i_prev=self.i_c, beta=beta)
        if x is None:
            if depth >= 2:
                raise ConvergenceError(f"transient step at t={t_new:.4g}s failed after dt halving",
                                       residual=res)
            self.step(t_new - h / 2, h / 2, trap, depth + 1)
            self.step(t_new, h / 2, trap, depth + 1)
            return
        q, i_c, inflow = extras
        self.inflow += (0.5 * (inflow + self.inflow_now) if trap else inflow) * h
        self.x, self.q, self.i_c, self.inflow_now = x, q, i_c, inflow


def _grounded_charge(ckt, q):
    """Charge held on non-ground terminals of elements tied to ground."""
    return float(q @ ckt.ground_sign)


def transient(netlist, t_stop=None, dt=None, damp_breakpoints=True):
    """Fixed-step transient from the DC point at t = 0.

    The first step is backward Euler; so is the first step after every PWL
    corner when ``damp_breakpoints`` is set, which stops the trapezoidal
    rule from ringing on nodes whose time constant is far below ``dt``.
    """
    if t_stop is None or dt is None:
        if netlist.tran is None:
            raise DomainError("no .tran settings and no t_stop/dt given")
        dt = dt if dt is not None else netlist.tran[0]
        t_stop = t_stop if t_stop is not None else netlist.tran[1]
    if not (dt > 0 and t_stop > 0):
        raise DomainError("dt and t_stop must be > 0")
    ckt = _Circuit(netlist)
    steps = int(round(t_stop / dt))
    time = np.arange(steps + 1) * dt
    x = _dc_solve(ckt, 0.0)
    q, _ = ckt.charges(ckt.voltages(x))
    st = _Stepper(ckt, x, q, np.zeros_like(q), 0.0, 0.0)
    st.inflow_now = st._inflow(x, 0.0)
    q0 = _grounded_charge(ckt, q)

    xs = np.empty((steps + 1, ckt.size))
    xs[0] = x
    stored = np.empty(steps + 1)
    inflow = np.empty(steps + 1)
    stored[0] = inflow[0] = 0.0
    bps = np.array(ckt.breakpoints) if damp_breakpoints else np.array([])
    for k in range(1, steps + 1):
        t0 = time[k - 1]
        trap = k > 1
        if trap and bps.size:
            trap = not np.any((bps > t0 - dt * (1 + 1e-9)) & (bps <= t0 + dt * 1e-9) & (bps > 0))
        st.step(time[k], dt, trap)
        xs[k] = st.x
        stored[k] = _grounded_charge(ckt, st.q) - q0
        inflow[k] = st.inflow

    n = ckt.n
    currents = {s.name: -xs[:, n + 1 + k] for k, s in enumerate(ckt.sources)}
    throughput = sum(np.sum(np.abs(c[1:]) + np.abs(c[:-1])) * dt / 2 for c in currents.values())
    scale = max(throughput, float(np.max(np.abs(stored))))
    resid = float(np.max(np.abs(stored - inflow)) / scale) if scale > 0 else 0.0
    return TransientResult(
        time=time,
        node_names=list(ckt.node_names),
        voltages=xs[:, :n].copy(),
        source_currents=currents,
        charge_residual=resid,
        stored_charge=stored,
        inflow_charge=inflow,
    )
