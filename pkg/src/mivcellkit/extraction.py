"""Three-stage parameter extraction: low-drain IDVG, high-drain IDVG/IDVD,
then gate capacitance, each a bounded Nelder-Mead fit over its own set of
free parameters.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import OptimizeResult, minimize
from scipy.special import expit, logit

from . import device_model as dm
from .characterization import CurveKind, region_error, region_errors, simulate_curve
from .errors import ExtractionError, ParseError, PreconditionError

log = logging.getLogger(__name__)

REPORT_FORMAT = "miv-cellkit report v1"


class BoundWarning(UserWarning):
    """A fitted parameter ended up pinned against one of its bounds."""


# -- bounds -------------------------------------------------------------------------


@dataclass
class ParamBounds:
    """``{name: (lower, upper, initial)}`` for every model parameter."""

    entries: dict

    def __post_init__(self):
        for name, (lo, hi, init) in self.entries.items():
            if name not in dm.PARAM_NAMES:
                raise PreconditionError(f"unknown parameter {name!r} in bounds")
            if not lo < hi:
                raise PreconditionError(f"{name.upper()}: lower bound {lo} not below upper {hi}")
            if not lo <= init <= hi:
                raise PreconditionError(f"{name.upper()}: initial {init} outside [{lo}, {hi}]")

    def __getitem__(self, name):
        return self.entries[name]

    def initial_params(self, polarity="n"):
        missing = [n.upper() for n in dm.PARAM_NAMES if n not in self.entries]
        if missing:
            raise PreconditionError(f"bounds lack initial values for {', '.join(missing)}")
        return dm.ModelParams(
            **{n: self.entries[n][2] for n in dm.PARAM_NAMES}, polarity=polarity
        )

    def replace(self, name, lower=None, upper=None, initial=None):
        lo, hi, init = self.entries[name]
        entries = dict(self.entries)
        entries[name] = (
            lo if lower is None else lower,
            hi if upper is None else upper,
            init if initial is None else initial,
        )
        return ParamBounds(entries)


def loads_bounds(text, source=None):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "*#":
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError("expected 'NAME lower upper initial'", lineno, source)
        name = parts[0].lower()
        if name not in dm.PARAM_NAMES:
            raise ParseError(f"unknown parameter {parts[0]!r}", lineno, source)
        try:
            entries[name] = tuple(float(v) for v in parts[1:])
        except ValueError:
            raise ParseError(f"bad number in {raw!r}", lineno, source) from None
    try:
        return ParamBounds(entries)
    except PreconditionError as exc:
        raise ParseError(str(exc), None, source) from None


def read_bounds(path):
    path = Path(path)
    return loads_bounds(path.read_text(encoding="utf-8"), source=str(path))


# -- stages ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtractionStage:
    name: str
    free_params: tuple
    target_kinds: tuple
    carry_forward: tuple = ()
    # regions fitted by earlier stages, kept in the objective so that
    # later stages cannot trade them away
    guard_kinds: tuple = ()
    # previously fitted parameters re-opened within +-fine_tune_window
    fine_tune: tuple = ()
    fine_tune_window: float = 0.10


STAGES = (
    ExtractionStage(
        "low_drain",
        free_params=("cdsc", "u0", "ua", "ub", "ud", "ucs", "dvt0", "dvt1"),
        target_kinds=(CurveKind.IDVG_LOW,),
        carry_forward=("u0", "ua", "dvt0", "dvt1"),
    ),
    ExtractionStage(
        "high_drain",
        free_params=("cdsc", "cdscd", "u0", "ua", "vth0", "pvag", "dvt0", "dvt1", "etab", "vsat"),
        target_kinds=(CurveKind.IDVG_HIGH, CurveKind.IDVD),
        guard_kinds=(CurveKind.IDVG_LOW,),
    ),
    ExtractionStage(
        "capacitance",
        free_params=("ckappa", "delvt", "cf", "cgso", "cgdo", "moin", "cgsl", "cgdl"),
        target_kinds=(CurveKind.CV,),
        guard_kinds=(CurveKind.IDVG_LOW, CurveKind.IDVG_HIGH, CurveKind.IDVD),
        fine_tune=("vth0", "u0", "ua", "vsat"),
    ),
)


class _Objective:
    """Sum of region errors over the stage's kinds; IDVD curves averaged."""

    def __init__(self, kinds, target, consts):
        self.consts = consts
        self.groups = []
        for kind in dict.fromkeys(kinds):
            curves = target.of_kind(kind)
            if not curves:
                raise PreconditionError(f"target has no {CurveKind(kind).value} curve")
            self.groups.append(curves)

    def __call__(self, params):
        total = 0.0
        for curves in self.groups:
            errs = [region_error(simulate_curve(params, self.consts, c), c) for c in curves]
            total += sum(errs) / len(errs)
        return total


def stage_objective(stage, params, target, consts):
    return _Objective(stage.target_kinds + stage.guard_kinds, target, consts)(params)


# -- optimizer -------------------------------------------------------------------------


def optimize(objective, lower, upper, x0, budget=2000, seed=0, restarts=3, rel_tol=1e-6,
             simplex_step=0.5):
    """Bounded Nelder-Mead: the box is mapped to R^n by a logit transform.

    Runs from ``x0`` and from ``restarts - 1`` seeded jitters of it, each for at
    most ``budget`` iterations, and keeps the best. Returns an
    :class:`~scipy.optimize.OptimizeResult`; ``x`` is exactly ``x0`` when no
    start improved on it.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if budget < 1:
        raise PreconditionError("budget must allow at least one evaluation")
    span = upper - lower

    def to_x(u):
        return lower + span * expit(u)

    def f_u(u):
        value = objective(to_x(u))
        return value if math.isfinite(value) else math.inf

    f0 = objective(x0)
    if not math.isfinite(f0):
        raise ExtractionError(f"objective is not finite at the initial point ({f0!r})")

    rng = np.random.default_rng(seed)
    u0 = logit(np.clip((x0 - lower) / span, 1e-12, 1.0 - 1e-12))
    starts = [u0] + [u0 + rng.normal(0.0, simplex_step, u0.size) for _ in range(restarts - 1)]

    best_u, best_f = u0, f0
    nit = nfev = 0
    dim = u0.size
    for start in starts:
        f_start = f_u(start)
        simplex = np.vstack([start, start + simplex_step * np.eye(dim)])
        res = minimize(
            f_u,
            start,
            method="Nelder-Mead",
            options={
                "maxiter": budget,
                "maxfev": 10 * budget * (dim + 1),
                "initial_simplex": simplex,
                "xatol": 1e-4,
                "fatol": rel_tol * max(abs(f_start), 1e-12) if math.isfinite(f_start) else 1e-12,
                "adaptive": dim > 2,
            },
        )
        nit += res.nit
        nfev += res.nfev + 1
        if res.fun < best_f:
            best_u, best_f = res.x, res.fun
    x = x0.copy() if best_u is u0 else to_x(best_u)
    return OptimizeResult(x=x, fun=best_f, fun0=f0, nit=nit, nfev=nfev, success=True)


# -- stages and full extraction ----------------------------------------------------------


def _stage_box(stage, params, bounds):
    names, lower, upper = [], [], []
    for name in stage.free_params:
        lo, hi, _ = bounds[name]
        names.append(name)
        lower.append(lo)
        upper.append(hi)
    for name in stage.fine_tune:
        if name in stage.free_params:
            continue
        lo, hi, _ = bounds[name]
        value = getattr(params, name)
        half = stage.fine_tune_window * abs(value)
        lo, hi = max(lo, value - half), min(hi, value + half)
        if hi - lo > 1e-15 * max(1.0, abs(value)):
            names.append(name)
            lower.append(lo)
            upper.append(hi)
    return names, np.array(lower), np.array(upper)


def _fit_stage(stage, params, bounds, target, consts, seed=0, budget=2000):
    names, lower, upper = _stage_box(stage, params, bounds)
    objective = _Objective(stage.target_kinds + stage.guard_kinds, target, consts)
    x_init = np.array([getattr(params, n) for n in names])
    # a start outside the box is clipped into it
    x_start = np.clip(x_init, lower, upper)

    def f(x):
        try:
            trial = params.replace(**dict(zip(names, map(float, x))))
        except dm.ParameterError:
            return math.inf
        value = objective(trial)
        return value if math.isfinite(value) else math.inf

    try:
        res = optimize(f, lower, upper, x_start, budget=budget, seed=seed)
    except ExtractionError as exc:
        raise ExtractionError(f"stage {stage.name}: {exc}") from None
    if not math.isfinite(res.fun):
        raise ExtractionError(f"stage {stage.name}: optimizer diverged (objective {res.fun!r})")

    fitted = params.replace(**dict(zip(names, map(float, res.x))))
    if not np.array_equal(x_start, x_init) and f(res.x) > objective(params):
        # never hand back something worse than what came in
        fitted = params

    for name, value, lo, hi in zip(names, res.x, lower, upper):
        tol = 1e-3 * (hi - lo)
        if value - lo < tol or hi - value < tol:
            warnings.warn(
                f"stage {stage.name}: {name.upper()} = {value:.6g} is pinned at its bound "
                f"[{lo:.6g}, {hi:.6g}]",
                BoundWarning,
                stacklevel=3,
            )
    log.info("stage %s: objective %.4g -> %.4g (%d iterations)", stage.name, res.fun0, res.fun, res.nit)
    return fitted, res


def run_stage(stage, params, bounds, target, consts=None, seed=0, budget=2000):
    """Fit ``stage.free_params`` (and its fine-tune set) to ``target``.

    Only those entries of ``params`` change, and the stage objective never
    increases relative to the input.
    """
    consts = consts if consts is not None else dm.ModelConstants()
    fitted, _ = _fit_stage(stage, params, bounds, target, consts, seed=seed, budget=budget)
    return fitted


@dataclass
class ExtractionReport:
    fitted: dm.ModelParams
    consts: dm.ModelConstants
    errors: dict
    curve_errors: dict
    iterations: dict
    stage_objectives: dict
    wall_time: float = 0.0
    variant: str | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def passed(self, limit=10.0):
        return all(v < limit for v in self.errors.values())

    def to_json(self):
        """Report as JSON text. Wall time is left out so reruns are byte-identical."""
        doc = {
            "format": REPORT_FORMAT,
            "variant": self.variant,
            "polarity": self.fitted.polarity,
            "seed": self.seed,
            "fitted": {k.upper(): v for k, v in self.fitted.as_dict().items()},
            "constants": {k.upper(): getattr(self.consts, k) for k in dm.CONST_NAMES},
            "errors_pct": self.errors,
            "curve_errors_pct": self.curve_errors,
            "iterations": self.iterations,
            "stage_objectives": self.stage_objectives,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != REPORT_FORMAT:
        raise ParseError(f"not a {REPORT_FORMAT} document")
    consts = dm.ModelConstants(**{k.lower(): v for k, v in doc["constants"].items()})
    fitted = dm.ModelParams(
        **{k.lower(): v for k, v in doc["fitted"].items()}, polarity=doc["polarity"]
    )
    return ExtractionReport(
        fitted=fitted,
        consts=consts,
        errors=doc["errors_pct"],
        curve_errors=doc["curve_errors_pct"],
        iterations=doc["iterations"],
        stage_objectives=doc["stage_objectives"],
        variant=doc.get("variant"),
        seed=doc.get("seed", 0),
    )


def extract(target, bounds, consts=None, seed=0, budget=2000, stages=STAGES):
    """Run the stages in order, each starting from the previous stage's fit."""
    if target is None or not getattr(target, "curves", None):
        raise PreconditionError("extraction needs a complete characterization set")
    consts = consts if consts is not None else dm.ModelConstants()
    started = time.perf_counter()
    params = bounds.initial_params(target.polarity)
    iterations, objectives = {}, {}
    for k, stage in enumerate(stages):
        before = stage_objective(stage, params, target, consts)
        params, res = _fit_stage(stage, params, bounds, target, consts, seed=seed + k, budget=budget)
        iterations[stage.name] = int(res.nit)
        objectives[stage.name] = {"before": before, "after": stage_objective(stage, params, target, consts)}
    errs = region_errors(params, consts, target)
    return ExtractionReport(
        fitted=params,
        consts=consts,
        errors=errs.as_dict(),
        curve_errors=errs.detail,
        iterations=iterations,
        stage_objectives=objectives,
        wall_time=time.perf_counter() - started,
        variant=target.variant,
        seed=seed,
    )
