import csv
import json
import re
import shutil
import subprocess
import sys

import numpy as np
import pytest

from mivcellkit import __version__
from mivcellkit import plotting as pl
from mivcellkit.cells import CELL_NAMES
from mivcellkit.characterization import generate_synthetic, read_curves
from mivcellkit.cli import EXIT_CODES, main
from mivcellkit.errors import InputError
from mivcellkit.fixtures import model_path
from mivcellkit.layout import VARIANTS
from mivcellkit.stdcells import PpaEntry, PpaReport


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_version():
    out = subprocess.run([sys.executable, "-m", "mivcellkit", "--version"], capture_output=True, text=True,
                         check=True).stdout
    lines = out.strip().splitlines()
    assert len(lines) == 3 and lines[0] == f"mivcellkit {__version__}"
    assert "numpy" in lines[1] and "scipy" in lines[1] and "ppa" in lines[2]


def test_missing_input_is_reported(tmp_path, capsys):
    code, _, err = run(["simulate", tmp_path / "nope.sp", "--out", tmp_path / "w.csv"], capsys)
    assert code == EXIT_CODES["E_INPUT"] == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "E_INPUT"
    assert not (tmp_path / "w.csv").exists()


def test_unknown_cell(capsys):
    code, _, err = run(["area", "--cells", "FOO1X1"], capsys)
    assert code == 2 and "FOO1X1" in err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.sp"
    bad.write_text("R1 a 0 abc\n")
    code, _, err = run(["simulate", bad, "--out", tmp_path / "w.csv"], capsys)
    assert code == EXIT_CODES["E_PARSE"]
    assert json.loads(err)["error"] == "E_PARSE"


def test_area_csv(tmp_path, capsys):
    out = tmp_path / "area.csv"
    code, _, _ = run(["area", "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == len(CELL_NAMES) * len(VARIANTS)
    code, text, _ = run(["area", "--cells", "INV1X1"], capsys)
    assert code == 0 and len(text.strip().splitlines()) == 1 + len(VARIANTS)


def test_gen_synthetic_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["--seed", 3, "gen-synthetic", "--out", tmp_path / d], capsys)[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(files) == 8 and "ch2_n.csv" in files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert read_curves(tmp_path / "a" / "ch4_p.csv").variant == "ch4"
    # flags after the subcommand work too
    assert run(["gen-synthetic", "--out", tmp_path / "c", "--seed", 3], capsys)[0] == 0
    assert (tmp_path / "c" / "ch1_n.csv").read_bytes() == (tmp_path / "a" / "ch1_n.csv").read_bytes()


def test_simulate(tmp_path, capsys):
    shutil.copy(model_path("ch4", "n"), tmp_path)
    shutil.copy(model_path("traditional", "p"), tmp_path)
    (tmp_path / "inv.sp").write_text(
        "VDD vdd 0 DC 1\nVin in 0 PWL(0 0 1e-10 0 1.1e-10 1)\n"
        "Mp out in vdd model=traditional_p.model\nMn out in 0 model=ch4_n.model\n"
        "Cl out 0 1e-15\n.tran 1e-12 3e-10\n")
    out = tmp_path / "w.csv"
    code, _, _ = run(["simulate", tmp_path / "inv.sp", "--out", out, "--nodes", "in,out"], capsys)
    assert code == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (301, 3)
    assert data[0, 2] == pytest.approx(1.0, abs=1e-3) and data[-1, 2] < 0.05


def test_ppa_subset(tmp_path, capsys):
    out, table = tmp_path / "ppa.json", tmp_path / "ppa.csv"
    code, _, _ = run(["ppa", "--cells", "INV1X1", "--variants", "ch2", "--out", out, "--csv", table], capsys)
    assert code == 0
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 1 and rows[0]["variant"] == "ch2"
    doc = json.loads(out.read_text())
    assert doc["summary"]["ch2"]["delay_delta_pct"] is None


def fake_report():
    rng = np.random.default_rng(0)
    entries = [PpaEntry(c, v, float(rng.uniform(3e-12, 8e-12)), float(rng.uniform(2e-7, 6e-7)), 0.0, 0.0,
                        1e5, 2e5, 0.0) for c in CELL_NAMES for v in VARIANTS]
    return PpaReport(entries, [], CELL_NAMES, VARIANTS)


def test_ppa_figures_have_every_bar():
    figs = pl.ppa_figures(fake_report())
    assert sorted(figs) == ["ppa_area.svg", "ppa_delay.svg", "ppa_power.svg"]
    for svg in figs.values():
        assert svg.startswith("<svg") or svg.startswith("<?xml")
        assert len(re.findall(r'<rect class="bar"', svg)) == len(CELL_NAMES) * len(VARIANTS)
    assert pl.ppa_figures(fake_report()) == figs


def test_identical_curves_overlay_exactly(models):
    p, c = models[("ch1", "n")]
    target = generate_synthetic(p, c, 0.0)
    figs, dropped = pl.extraction_figures(target, p, c, name="x")
    assert sorted(figs) == ["x_cv.svg", "x_idvd.svg", "x_idvg_lin.svg", "x_idvg_log.svg"]
    assert dropped == 0
    for svg in figs.values():
        paths = re.findall(r'<path d="([^"]+)"([^>]*)>', svg)
        solid = [d for d, rest in paths if "dasharray" not in rest]
        dashed = [d for d, rest in paths if "dasharray" in rest]
        # every fitted (dashed) curve traces its reference exactly
        assert dashed and set(dashed) <= set(solid)


def test_log_axis_counts_suppressed_samples():
    s = pl.Series("a", np.arange(5.0), np.array([1e-9, 0.0, 1e-6, -1e-7, 1e-4]))
    svg, n = pl.line_chart([s], "t", "x", "y", log_y=True)
    assert n == 2 and "1e-9" in svg
    with pytest.raises(InputError):
        pl.line_chart([pl.Series("z", [0, 1], [0.0, -1.0])], "t", "x", "y", log_y=True)


def test_plot_command(tmp_path, capsys):
    (tmp_path / "r.json").write_text(fake_report().to_json())
    assert run(["gen-synthetic", "--out", tmp_path / "curves", "--noise", 0], capsys)[0] == 0
    code, _, _ = run(["plot", "--report", tmp_path / "r.json", "--curves", tmp_path / "curves" / "ch2_p.csv",
                      "--out", tmp_path / "figs"], capsys)
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "figs").iterdir())
    assert names == ["ch2_p_cv.svg", "ch2_p_idvd.svg", "ch2_p_idvg_lin.svg", "ch2_p_idvg_log.svg",
                     "ppa_area.svg", "ppa_delay.svg", "ppa_power.svg"]
    assert run(["plot", "--out", tmp_path / "x"], capsys)[0] == 2


def test_extract_report_path_and_exit_code(tmp_path, capsys):
    assert run(["gen-synthetic", "--out", tmp_path, "--noise", 0], capsys)[0] == 0
    report = tmp_path / "fit" / "dev.json"
    # a tiny budget cannot reach the error bar: outputs are still written, exit is E_EXTRACTION
    code, out, err = run(["extract", "--curves", tmp_path / "ch1_n.csv", "--out", report, "--budget", 2], capsys)
    assert code == EXIT_CODES["E_EXTRACTION"]
    assert json.loads(err.strip().splitlines()[-1])["error"] == "E_EXTRACTION"
    assert report.exists() and (tmp_path / "fit" / "dev.model").exists()
    assert set(json.loads(out)["ch1_n"]) == {"IDVG", "IDVD", "CV"}
    code, _, _ = run(["extract", "--curves", tmp_path / "ch1_n.csv", tmp_path / "ch1_p.csv", "--out", report],
                     capsys)
    assert code == EXIT_CODES["E_INPUT"]


def test_parallel_extract_matches_sequential(tmp_path, capsys):
    assert run(["gen-synthetic", "--out", tmp_path], capsys)[0] == 0
    curves = [tmp_path / "ch1_n.csv", tmp_path / "ch4_p.csv"]
    for jobs, out in ((1, "seq"), (2, "par")):
        run(["--jobs", jobs, "extract", "--curves", *curves, "--out", tmp_path / out, "--budget", 3], capsys)
    for name in ("ch1_n.report.json", "ch4_p.model"):
        assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()
