import numpy as np
import pytest

from mivcellkit import characterization as ch
from mivcellkit.characterization import CurveKind
from mivcellkit.errors import ParseError, PreconditionError


@pytest.fixture
def nset(nmos, consts):
    return ch.generate_synthetic(nmos, consts, 0.0, variant="ch1")


def test_canonical_grids():
    g = ch.canonical_grid("IDVG_LOW")
    assert g[0] == 0.0 and g[-1] == 1.0 and g.size == 41
    cv = ch.canonical_grid("CV", "p")
    assert cv[0] == -1.0 and cv[-1] == 0.5 and np.all(np.diff(cv) > 0)


def test_synthetic_set_is_complete(nset, nmos, consts):
    kinds = [c.kind for c in nset.canonical_curves()]
    assert kinds == [CurveKind.IDVG_LOW, CurveKind.IDVG_HIGH] + [CurveKind.IDVD] * 4 + [CurveKind.CV]
    assert [c.fixed_bias for c in nset.idvd] == [0.4, 0.6, 0.8, 1.0]
    c = nset.idvg_high
    assert c.values[-1] == pytest.approx(ch.dm.drain_current(nmos, consts, 1.0, 1.0))


def test_pmos_set_has_signed_biases(pmos, consts):
    pset = ch.generate_synthetic(pmos, consts, 0.0)
    assert pset.idvg_low.fixed_bias == -0.05
    assert [c.fixed_bias for c in pset.idvd] == [-0.4, -0.6, -0.8, -1.0]
    assert np.all(pset.idvg_high.values <= 0)


def test_synthetic_is_deterministic(nmos, consts):
    a = ch.generate_synthetic(nmos, consts, 0.01, seed=5)
    b = ch.generate_synthetic(nmos, consts, 0.01, seed=5)
    c = ch.generate_synthetic(nmos, consts, 0.01, seed=6)
    assert ch.dumps_curves(a) == ch.dumps_curves(b)
    assert ch.dumps_curves(a) != ch.dumps_curves(c)


def test_noise_statistics(nmos, consts):
    clean = ch.generate_synthetic(nmos, consts, 0.0).idvg_high.values
    rel = np.concatenate([
        ch.generate_synthetic(nmos, consts, 0.02, seed=s).idvg_high.values / clean - 1.0
        for s in range(100)
    ])
    # 4100 draws of 0.02 * N(0, 1)
    assert abs(rel.mean()) < 4 * 0.02 / np.sqrt(rel.size)
    assert rel.std() == pytest.approx(0.02, rel=0.05)


def test_noise_level_validated(nmos, consts):
    with pytest.raises(PreconditionError):
        ch.generate_synthetic(nmos, consts, 0.2)


def test_csv_round_trip(tmp_path, nmos, consts):
    cset = ch.generate_synthetic(nmos, consts, 0.01, seed=3, variant="ch2")
    path = tmp_path / "ch2_n.csv"
    ch.write_curves(cset, path)
    back = ch.read_curves(path)
    assert back.variant == "ch2"
    assert back.canonical_curves() == cset.canonical_curves()
    assert ch.dumps_curves(back) == path.read_text()


def _lines(cset):
    return ch.dumps_curves(cset).splitlines()


def test_parse_error_carries_line_number(nset):
    lines = _lines(nset)
    lines[5] = "0.1,abc"
    with pytest.raises(ParseError) as err:
        ch.loads_curves("\n".join(lines))
    assert err.value.line == 6


@pytest.mark.parametrize("edit", [
    lambda ls: ls[1:],  # no header
    lambda ls: [ls[0], "0.0,1.0"] + ls[1:],  # sample before CURVE
    lambda ls: [ln.replace("IDVG_LOW", "IDVG_MID") for ln in ls],
    lambda ls: ls[:3] + [ls[2]] + ls[4:],  # repeated sweep value
    lambda ls: [ln for ln in ls if not ln.startswith("CURVE,CV")][:-61],  # CV curve missing
])
def test_malformed_curves_rejected(nset, edit):
    with pytest.raises(ParseError):
        ch.loads_curves("\n".join(edit(_lines(nset))))


def test_incomplete_set_rejected(nset):
    with pytest.raises(PreconditionError):
        ch.CharacterizationSet("n", nset.curves[:-1])
    with pytest.raises(PreconditionError):
        ch.DeviceCurve("IDVD", 0.4, np.arange(5.0), np.zeros(5))


def test_region_error_zero_for_identical_curves(nset, nmos, consts):
    errs = ch.region_errors(nmos, consts, nset)
    assert errs.as_dict() == {"IDVG": 0.0, "IDVD": 0.0, "CV": 0.0}


def test_region_error_scales_with_relative_offset(nset):
    ref = nset.cv
    shifted = ref.with_values(ref.values * 1.05)
    assert ch.region_error(shifted, ref) == pytest.approx(5.0, rel=1e-9)


def test_idvg_error_uses_log_branch_below_threshold(nset):
    ref = nset.idvg_high
    off = ref.values < ch.SUBTHRESHOLD_CURRENT
    assert off.any() and (~off).any()
    # a 10x error confined to the off-region is visible despite tiny currents
    bumped = ref.with_values(np.where(off, ref.values * 10, ref.values))
    assert ch.region_error(bumped, ref) > 1.0
