import warnings

import numpy as np
import pytest

from mivcellkit import extraction as ex
from mivcellkit.characterization import generate_synthetic
from mivcellkit.errors import ExtractionError, ParseError, PreconditionError


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_rosenbrock_reaches_minimum():
    res = ex.optimize(rosenbrock, [-2, -1], [2, 3], [-1.2, 1.0], budget=2000, seed=0)
    assert res.fun < 1e-3
    assert res.x == pytest.approx([1, 1], abs=0.05)


def test_optimizer_stays_in_box():
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(np.sum((x - 5.0) ** 2))  # minimum outside the box

    res = ex.optimize(f, [0, 0], [1, 2], [0.5, 0.5], budget=300)
    pts = np.array(seen)
    assert np.all(pts >= [0, 0]) and np.all(pts <= [1, 2])
    assert res.x == pytest.approx([1, 2], abs=1e-3)


def test_optimizer_returns_start_when_nothing_improves():
    x0 = np.array([0.3, 0.7])
    res = ex.optimize(lambda x: 0.0, [0, 0], [1, 1], x0, budget=50)
    assert np.array_equal(res.x, x0) and res.fun == 0.0


def test_optimizer_is_seeded():
    a = ex.optimize(rosenbrock, [-2, -1], [2, 3], [-1.2, 1.0], budget=200, seed=4)
    b = ex.optimize(rosenbrock, [-2, -1], [2, 3], [-1.2, 1.0], budget=200, seed=4)
    assert np.array_equal(a.x, b.x)


def test_optimizer_rejects_bad_start():
    with pytest.raises(ExtractionError):
        ex.optimize(lambda x: float("nan"), [0], [1], [0.5])
    with pytest.raises(PreconditionError):
        ex.optimize(rosenbrock, [0, 0], [1, 1], [0.5, 0.5], budget=0)


def test_bounds_file(bounds):
    lo, hi, init = bounds["vsat"]
    assert (lo, hi, init) == (3e4, 3e5, 1e5)
    p = bounds.initial_params("p")
    assert p.polarity == "p" and p.vth0 == 0.35


@pytest.mark.parametrize("text", [
    "VTH0 0.1 0.6\n",  # missing column
    "VTH0 0.6 0.1 0.3\n",  # lower > upper
    "VTH0 0.1 0.6 0.9\n",  # initial outside
    "FOO 0 1 0.5\n",
])
def test_bounds_parse_errors(bounds, text):
    with pytest.raises(ParseError):
        ex.loads_bounds(text)


def test_stage_layout():
    names = [s.name for s in ex.STAGES]
    assert names == ["low_drain", "high_drain", "capacitance"]
    cap = ex.STAGES[2]
    assert set(cap.free_params) >= {"ckappa", "delvt", "cf", "cgso", "cgdo", "moin", "cgsl", "cgdl"}
    fitted = set().union(*(s.free_params for s in ex.STAGES))
    assert fitted == set(ex.dm.PARAM_NAMES)


def test_stage_changes_only_its_parameters(models, bounds):
    p_true, c = models[("traditional", "n")]
    target = generate_synthetic(p_true, c, 0.0)
    start = bounds.initial_params("n")
    stage = ex.STAGES[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ex.BoundWarning)
        fitted = ex.run_stage(stage, start, bounds, target, c, budget=150)
    for name in ex.dm.PARAM_NAMES:
        if name not in stage.free_params:
            assert getattr(fitted, name) == getattr(start, name)
    before = ex.stage_objective(stage, start, target, c)
    after = ex.stage_objective(stage, fitted, target, c)
    assert after < 0.5 * before


def test_pinned_parameter_warns(models, bounds):
    p_true, c = models[("traditional", "n")]
    target = generate_synthetic(p_true, c, 0.0)
    tight = bounds.replace("u0", lower=0.005, upper=0.006, initial=0.0055)
    with pytest.warns(ex.BoundWarning, match="U0"):
        ex.run_stage(ex.STAGES[0], tight.initial_params("n"), tight, target, c, budget=200)


def test_report_json_round_trip(models, bounds):
    p_true, c = models[("ch4", "p")]
    target = generate_synthetic(p_true, c, 0.0, variant="ch4")
    stages = tuple(ex.ExtractionStage(s.name, s.free_params, s.target_kinds, s.carry_forward, s.guard_kinds)
                   for s in ex.STAGES)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ex.BoundWarning)
        rep = ex.extract(target, bounds, c, seed=2, budget=40, stages=stages)
    text = rep.to_json()
    assert "wall" not in text
    back = ex.report_from_json(text)
    assert back.fitted == rep.fitted and back.errors == rep.errors and back.variant == "ch4"
    assert back.to_json() == text


def test_extract_requires_data(bounds):
    with pytest.raises(PreconditionError):
        ex.extract(None, bounds)
