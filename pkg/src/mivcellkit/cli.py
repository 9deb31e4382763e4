"""Command-line entry point: ``mivcellkit <subcommand> ...``.

Failures print one JSON object ``{"error": CODE, "message": ...}`` on
stderr and exit with the code's status. Every output file is written to a
temporary sibling and renamed into place only after all results exist.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cells import CELL_NAMES
from .characterization import HEADER as CURVES_HEADER
from .characterization import VARIANTS, dumps_curves, generate_synthetic, read_curves
from .circuit import dumps_waveforms, read_netlist, transient
from .device_model import POLARITIES, dumps_model, read_model
from .errors import ExtractionError, InputError, MivCellKitError
from .extraction import REPORT_FORMAT as EXTRACTION_FORMAT
from .extraction import BoundWarning, extract, read_bounds, report_from_json
from .fixtures import default_bounds_path, load_fixture_models, model_path
from .layout import library_area_summary
from .plotting import extraction_figures, ppa_figures
from .stdcells import REFERENCE, REFERENCE_SUBSTRATE_PCT, REPORT_FORMAT as PPA_FORMAT
from .stdcells import SimSettings
from .stdcells import report_from_json as ppa_from_json
from .stdcells import run_ppa

log = logging.getLogger("mivcellkit")

EXIT_CODES = {
    "E_INTERNAL": 1,
    "E_INPUT": 2,
    "E_PARSE": 3,
    "E_DOMAIN": 4,
    "E_PARAM": 5,
    "E_PRECONDITION": 6,
    "E_EXTRACTION": 7,
    "E_CONVERGENCE": 8,
    "E_MEASURE": 9,
}

ERROR_LIMIT_PCT = 10.0  # extract fails when any region error reaches this


def write_outputs(files):
    """Write ``{path: text}`` atomically: temp files first, then renames."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            Path(tmp).unlink(missing_ok=True)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)
    return [str(p) for _, p in staged]


def _require(path, what):
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} not found: {p}")
    return p


def _split(text, allowed, what):
    if text is None:
        return tuple(allowed)
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in items if x not in allowed]
    if bad:
        raise InputError(f"unknown {what}: {', '.join(bad)}; expected {', '.join(allowed)}")
    return items


def _load_models(models_dir):
    if models_dir is None:
        return load_fixture_models()
    root = _require(models_dir, "models directory")
    out = {}
    for v in VARIANTS:
        for p in POLARITIES:
            path = model_path(v, p, root)
            if path.exists():
                out[(v, p)] = read_model(path)
    if not out:
        raise InputError(f"no <variant>_<polarity>.model files in {root}")
    return out


# -- subcommands -------------------------------------------------------------------


def cmd_gen_synthetic(args):
    models = _load_models(args.models)
    files = {}
    for k, ((variant, pol), (params, consts)) in enumerate(sorted(models.items())):
        cset = generate_synthetic(params, consts, args.noise, seed=args.seed + k, variant=variant)
        files[Path(args.out) / f"{variant}_{pol}.csv"] = dumps_curves(cset)
    for path in write_outputs(files):
        log.info("wrote %s", path)
    return 0


def _extract_one(task):
    path, bounds, seed, budget = task
    cset = read_curves(path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundWarning)
        report = extract(cset, bounds, seed=seed, budget=budget)
    return report, [str(w.message) for w in caught]


def _extract_targets(curves, out):
    """Report and model paths per curve file; ``--out`` names the report
    itself when it ends in .json and there is a single curve file."""
    out = Path(out)
    if out.suffix == ".json":
        if len(curves) != 1:
            raise InputError("--out may name a .json report only for a single curve file")
        stem = out.name[: -len(".report.json")] if out.name.endswith(".report.json") else out.stem
        return [(out, out.with_name(f"{stem}.model"))]
    return [(out / f"{p.stem}.report.json", out / f"{p.stem}.model") for p in curves]


def cmd_extract(args):
    bounds = read_bounds(_require(args.bounds, "bounds file") if args.bounds else default_bounds_path())
    paths = [_require(p, "curve file") for p in args.curves]
    targets = _extract_targets(paths, args.out)
    tasks = [(p, bounds, args.seed, args.budget) for p in paths]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, tasks))
    else:
        results = [_extract_one(t) for t in tasks]
    files, summary = {}, {}
    for path, (report_path, model_file), (report, msgs) in zip(paths, targets, results):
        for m in msgs:
            log.warning("%s: %s", path.name, m)
        files[report_path] = report.to_json()
        files[model_file] = dumps_model(report.fitted, report.consts)
        summary[path.stem] = {k: round(v, 3) for k, v in report.errors.items()}
        log.info("%s errors %% %s (%.1f s)", path.stem, summary[path.stem], report.wall_time)
    write_outputs(files)
    print(json.dumps(summary, sort_keys=True))
    failed = sorted(k for k, errs in summary.items() if max(errs.values()) >= ERROR_LIMIT_PCT)
    if failed:
        raise ExtractionError(f"region error >= {ERROR_LIMIT_PCT:g}% for {', '.join(failed)}")
    return 0


def cmd_area(args):
    cells = _split(args.cells, CELL_NAMES, "cell")
    summary = library_area_summary(cells=cells)
    if args.out:
        write_outputs({args.out: summary.to_csv()})
    else:
        sys.stdout.write(summary.to_csv())
    for v in summary.variants[1:]:
        ref = REFERENCE.get(v, {}).get("area_reduction_pct")
        log.info("%s average cell-area reduction %.2f%% (reference %s%%)", v, summary.average_reduction(v), ref)
    best = summary.best_substrate_reduction()
    log.info("best substrate reduction %.2f%% (%s, %s; reference up to %s%%)", best[0], best[1], best[2],
             REFERENCE_SUBSTRATE_PCT)
    return 0


def cmd_simulate(args):
    net = read_netlist(_require(args.netlist, "netlist"))
    result = transient(net, args.tstop, args.dt)
    nodes = args.nodes.split(",") if args.nodes else None
    write_outputs({args.out: dumps_waveforms(result, nodes)})
    log.info("charge conservation residual %.3g", result.charge_residual)
    return 0


def cmd_ppa(args):
    models = _load_models(args.models)
    cells = _split(args.cells, CELL_NAMES, "cell")
    variants = _split(args.variants, VARIANTS, "variant")
    settings = SimSettings(dt=args.dt)
    report = run_ppa(models, cells, variants, settings=settings, jobs=args.jobs)
    files = {args.out: report.to_json()}
    if args.csv:
        files[args.csv] = report.to_csv()
    write_outputs(files)
    for v, row in report.summary().items():
        log.info("%s: %s", v, row)
    return 1 if report.diagnostics and not report.entries else 0


def cmd_plot(args):
    files, dropped = {}, 0
    out = Path(args.out)
    if args.report:
        report = ppa_from_json(_require(args.report, "PPA report").read_text())
        for name, svg in ppa_figures(report).items():
            files[out / name] = svg
    for path in args.curves or ():
        path = _require(path, "curve file")
        cset = read_curves(path)
        fitted = consts = None
        sibling = Path(args.fitted) / f"{path.stem}.report.json" if args.fitted else None
        if sibling is not None:
            rep = report_from_json(_require(sibling, "extraction report").read_text())
            fitted, consts = rep.fitted, rep.consts
        figs, n = extraction_figures(cset, fitted, consts, name=path.stem)
        dropped += n
        files.update({out / k: v for k, v in figs.items()})
    if not files:
        raise InputError("nothing to plot: give --report and/or --curves")
    if dropped:
        log.warning("log-axis plots suppressed %d non-positive samples", dropped)
    write_outputs(files)
    return 0


def _version_text():
    return "\n".join([
        f"mivcellkit {__version__}",
        f"python {platform.python_version()}, numpy {np.__version__}, scipy {scipy.__version__}",
        f"formats: curves '{CURVES_HEADER[2:]}', extraction '{EXTRACTION_FORMAT}', ppa '{PPA_FORMAT}'",
    ])


class _Version(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, default=argparse.SUPPRESS, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        print(_version_text())
        parser.exit()


def _global_flags(parser, suppress):
    # Accepted before or after the subcommand; the subparser copies use
    # SUPPRESS so they only override when actually given.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for simulations")
    parser.add_argument("--verbose", "-v", action="count", default=d(0))


def build_parser():
    p = argparse.ArgumentParser(prog="mivcellkit", description="MIV-transistor cell-library toolkit")
    _global_flags(p, suppress=False)
    p.add_argument("--version", action=_Version, help="print toolchain and file-format versions")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    g = sub.add_parser("gen-synthetic", help="sample reference curves from the fixture models")
    g.add_argument("--out", required=True)
    g.add_argument("--models", help="directory of <variant>_<polarity>.model (default: shipped fixtures)")
    g.add_argument("--noise", type=float, default=0.01, help="relative Gaussian noise")
    g.set_defaults(func=cmd_gen_synthetic)

    e = sub.add_parser("extract", help="fit model parameters to curve files")
    e.add_argument("--curves", nargs="+", required=True)
    e.add_argument("--bounds")
    e.add_argument("--out", required=True, help="report .json (one curve file) or output directory")
    e.add_argument("--budget", type=int, default=2000)
    e.set_defaults(func=cmd_extract)

    a = sub.add_parser("area", help="cell layout and substrate areas")
    a.add_argument("--out")
    a.add_argument("--cells")
    a.set_defaults(func=cmd_area)

    s = sub.add_parser("simulate", help="transient simulation of a netlist")
    s.add_argument("netlist")
    s.add_argument("--out", required=True)
    s.add_argument("--dt", type=float)
    s.add_argument("--tstop", type=float)
    s.add_argument("--nodes")
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("ppa", help="power, delay and area of the cell library")
    q.add_argument("--models")
    q.add_argument("--out", required=True)
    q.add_argument("--csv")
    q.add_argument("--cells")
    q.add_argument("--variants")
    q.add_argument("--dt", type=float, default=1e-12)
    q.set_defaults(func=cmd_ppa)

    f = sub.add_parser("plot", help="SVG charts of curves and PPA reports")
    f.add_argument("--report")
    f.add_argument("--curves", nargs="*")
    f.add_argument("--fitted", help="directory holding <stem>.report.json extraction reports")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MivCellKitError as exc:
        code = exc.code
        message = str(exc)
    except OSError as exc:
        code, message = "E_INPUT", f"{exc.strerror}: {exc.filename}"
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        code, message = "E_INTERNAL", f"{type(exc).__name__}: {exc}"
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return EXIT_CODES.get(code, 1)


if __name__ == "__main__":
    sys.exit(main())
