"""Command-line interface.

Wavelengths are given in um on the command line and printed in nm in the
human-readable summaries.  Every run writes its data files plus
``manifest.json`` (resolved configuration, crystal-data digest, output
hashes) into ``--out``; ``qpmdesign rerun <manifest>`` replays it.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
from pathlib import Path

import numpy as np

from . import design_search as ds
from .crystal_db import CrystalDataError, PolarizationConfig, default_crystals, load_crystal_set
from .joint_spectrum import (
    GridSpec,
    PumpPulse,
    build_jsa,
    marginals,
    schmidt_decompose,
)
from .qpm import BULK, SpdcProcess, bulk_phasematch_locus, default_order, solve_poling_period

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- presets

PRESETS = {
    "1": ("degenerate KTP spectra at D ~ 1 and D ~ 0 with pump/phase-matching panels", [
        "jsa --crystal KTP --pols o:oe --pump 0.791 --L 30 --tau 2.5 --components --out fig1/d1",
        "jsa --crystal KTP --pols o:oe --pump 0.612 --L 30 --tau 0.5 --components --out fig1/d0",
    ]),
    "2": ("purity over pulse duration and crystal length, KTP 791 nm", [
        "optimize --crystal KTP --pols o:oe --pump 0.791 --out fig2",
    ]),
    "3": ("JSA versus JSI, KTP 791 nm, 30 mm, 2.5 ps", [
        "jsa --crystal KTP --pols o:oe --pump 0.791 --L 30 --tau 2.5 --out fig3",
    ]),
    "4": ("bandpass filter scan, KTP 791 nm, 30 mm, 2.5 ps", [
        "filter --crystal KTP --pols o:oe --pump 0.791 --L 30 --tau 2.5 "
        "--fwhm 1 1.5 2 2.5 3 3.5 4 5 6 8 10 15 20 --out fig4",
    ]),
    "13": ("degenerate type-II purity and HOM scan, KTP", [
        "gvm --crystal KTP --scan 0.6 1.0 0.01 --out fig13",
    ]),
    "14": ("degenerate type-II purity and HOM scans, CTA KTA RTA RTP", [
        f"gvm --crystal {c} --scan 0.6 1.2 0.01 --out fig14/{c}" for c in ("CTA", "KTA", "RTA", "RTP")
    ]),
    "15": ("CDDC configurations, CTA", ["cddc --crystal CTA --out fig15"]),
    "16": ("CDDC configurations, KTP KTA RTA RTP", [
        f"cddc --crystal {c} --out fig16/{c}" for c in ("KTP", "KTA", "RTA", "RTP")
    ]),
    "atlas-type0": ("pure-state atlases, e -> e + e, all crystals", [
        f"atlas --crystal {c} --pols e:ee --out atlas-type0/{c}" for c in ("KTP", "CTA", "KTA", "RTA", "RTP")
    ]),
    "atlas-type2": ("pure-state atlases, o -> o + e, all crystals", [
        f"atlas --crystal {c} --pols o:oe --out atlas-type2/{c}" for c in ("KTP", "CTA", "KTA", "RTA", "RTP")
    ]),
    "bulk-cta": ("bulk phase-matching locus, CTA type-II", [
        "bulk --crystal CTA --pols o:oe --out bulk-cta",
    ]),
    "bulk-others": ("bulk phase-matching loci, KTP KTA RTA RTP type-II", [
        f"bulk --crystal {c} --pols o:oe --out bulk/{c}" for c in ("KTP", "KTA", "RTA", "RTP")
    ]),
}


# ---------------------------------------------------------------- helpers


class Context:
    def __init__(self, args):
        self.args = args
        self.cset = load_crystal_set(args.data) if args.data else default_crystals()
        if not args.crystal:
            raise UsageError("--crystal is required")
        try:
            self.crystal = self.cset[args.crystal]
        except KeyError as exc:
            raise ValueError(exc.args[0]) from None
        self.pols = PolarizationConfig.parse(args.pols)
        self.T = self.crystal.default_temperature if args.temp is None else args.temp
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.config: dict = {"crystal": self.crystal.name, "pols": str(self.pols), "temperature_C": self.T}

    def table(self, stem, header, rows):
        fmt = self.args.format or "csv"
        if fmt == "json":
            path = self.out / f"{stem}.json"
            data = [dict(zip(header, (_jsonable(v) for v in r))) for r in rows]
            path.write_text(json.dumps(data, indent=2) + "\n")
        else:
            path = ds.write_csv(self.out / f"{stem}.csv", header, rows)
        self.outputs.append(path)
        return path

    def json(self, stem, obj):
        path = self.out / f"{stem}.json"
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.outputs.append(path)
        return path

    def finish(self, argv):
        manifest = ds.build_manifest(self.args.command, self.config, self.outputs, self.cset, base_dir=self.out)
        manifest["argv"] = argv
        ds.write_manifest(self.out / "manifest.json", manifest)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) else (str(v) if math.isinf(v) else v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (set, frozenset)):
        return sorted(v)
    return v


def _nm(um):
    return f"{um * 1000:.2f} nm"


def _process(ctx, pump, signal, L, period=None, bulk=False, order=None):
    signal = 2 * pump if signal is None else signal
    if bulk:
        return SpdcProcess(ctx.crystal, ctx.pols, pump, signal, temperature=ctx.T, period=BULK, length_mm=L)
    if period is None:
        order = order if order is not None else default_order(ctx.crystal, ctx.pols, pump, signal, ctx.T)
        period = solve_poling_period(ctx.crystal, ctx.pols, pump, signal, ctx.T, order)
    elif order is None:
        order = default_order(ctx.crystal, ctx.pols, pump, signal, ctx.T)
    return SpdcProcess(ctx.crystal, ctx.pols, pump, signal, temperature=ctx.T, period=period,
                       order=order, length_mm=L)


def _range(values, default):
    if values is None:
        return default
    start, stop, step = values
    if not step > 0 or stop < start:
        raise ValueError("range needs start <= stop and a positive step")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _pump_range(ctx, values):
    lo, hi = ctx.crystal.transparency
    return _range(values, np.arange(lo, hi / 2, 0.005))


# ---------------------------------------------------------------- commands


def cmd_jsa(ctx):
    a = ctx.args
    proc = _process(ctx, a.pump, a.signal, a.L, a.period, a.bulk, a.order)
    pump = PumpPulse(proc.lambda_p, a.tau)
    grid = GridSpec(a.grid, a.window_factor)
    js = build_jsa(proc, pump, grid)
    rep = schmidt_decompose(js)
    rep_i = schmidt_decompose(js, "intensity", with_distinguishability=False)
    ctx.config.update(pump_um=a.pump, signal_um=proc.lambda_s, idler_um=proc.lambda_i, length_mm=a.L, tau_ps=a.tau,
                      period_um=None if proc.is_bulk else proc.period, order=proc.order, grid=a.grid,
                      window_factor=a.window_factor)
    fmt = a.format or "matrix"
    if fmt == "matrix":
        ctx.outputs.extend(js.save(ctx.out, "jsa"))
        if a.components:
            for comp in ("pump", "phasematching"):
                part = build_jsa(proc, pump, grid, components=comp)
                ctx.outputs.extend(part.save(ctx.out, comp, modes=("intensity",)))
    m = marginals(js)
    ctx.table("marginals", ["lambda_s_um", "signal", "lambda_i_um", "idler"],
              zip(js.lambda_s, m.signal, js.lambda_i, m.idler))
    report = rep.to_dict()
    report["intensity_mode"] = rep_i.to_dict()
    ctx.json("report", report)
    print(f"{ctx.crystal.name} {ctx.pols}: {_nm(proc.lambda_p)} -> {_nm(proc.lambda_s)} + {_nm(proc.lambda_i)}, "
          f"period {'bulk' if proc.is_bulk else f'{proc.period:.4f} um'}")
    print(f"P = {rep.P:.4f}  K = {rep.K:.4f}  K_JSI = {rep.K_jsi:.4f}  Delta = {rep.distinguishability:.4g}  "
          f"V_HOM <= {rep.v_hom:.4f}  FWHM s/i = {rep.fwhm_s_nm:.3f}/{rep.fwhm_i_nm:.3f} nm")
    return js


def cmd_optimize(ctx):
    a = ctx.args
    proc = _process(ctx, a.pump, a.signal, 30.0, a.period, a.bulk, a.order)
    res = ds.optimize_tau_L(proc, tuple(a.tau_range), tuple(a.L_range), a.objective,
                            grid_points=a.grid_points, final_resolution=a.grid)
    ctx.config.update(pump_um=a.pump, signal_um=proc.lambda_s, tau_range=a.tau_range, L_range=a.L_range,
                      objective=a.objective, grid_points=a.grid_points, grid=a.grid)
    ctx.table("scan", ["tau_ps", "length_mm", "objective"], res.table)
    out = {"tau_ps": res.tau_ps, "length_mm": res.length_mm, "objective": res.objective_value,
           "flat_objective": res.flat, "evaluations": res.evaluations, "report": res.report.to_dict()}
    ctx.json("optimum", out)
    print(f"best tau = {res.tau_ps:.4f} ps, L = {res.length_mm:.3f} mm: P = {res.report.P:.4f}, "
          f"K_JSI = {res.report.K_jsi:.4f}" + ("  [flat objective]" if res.flat else ""))


def cmd_atlas(ctx):
    a = ctx.args
    pumps = _pump_range(ctx, a.pump_range)
    pts = ds.purity_atlas(ctx.crystal, ctx.pols, pumps, ctx.T, length_mm=a.L, samples=a.samples,
                          resolution=a.atlas_grid)
    ctx.config.update(pump_range=[float(pumps[0]), float(pumps[-1]), len(pumps)], length_mm=a.L,
                      samples=a.samples, atlas_grid=a.atlas_grid)
    ctx.table("atlas", ds.ATLAS_HEADER, (p.row() for p in pts))
    ctx.table("atlas_edges", ["lambda_p_um", "lambda_s_um", "period_um"], ds.atlas_curves(pts))
    print(f"{len(pts)} pure intervals (K_JSI <= {ds.PURE_THRESHOLD}) over {len(pumps)} pump wavelengths")
    return pts


def cmd_gvm(ctx):
    a = ctx.args
    lp = ds.degenerate_gvm_point(ctx.crystal, ctx.T)
    ctx.config.update(scan=a.scan, L=a.L)
    ctx.json("gvm", {"crystal": ctx.crystal.name, "temperature_C": ctx.T, "lambda_p_um": lp,
                     "data_verified": ctx.crystal.verified})
    if a.scan:
        rows = ds.degenerate_scan(ctx.crystal, _range(a.scan, None), ctx.T, length_mm=a.L)
        ctx.table("degenerate_scan", ds.DEGENERATE_HEADER,
                  ([r.lambda_p, r.tau_ps, r.P, r.v_hom, r.distinguishability, r.bandwidth_ratio, r.k_jsi, r.D]
                   for r in rows))
    if lp is None:
        raise ds.NonConvergenceError(f"no degenerate GVM point for {ctx.crystal.name}")
    print(f"{ctx.crystal.name}: degenerate GVM point at {_nm(lp)}")
    return lp


def cmd_cddc(ctx):
    a = ctx.args
    ctx.pols = PolarizationConfig.parse(a.pols)
    cfgs = ds.cddc_search(ctx.crystal, ctx.pols, tuple(a.period_range) if a.period_range else None, ctx.T,
                          period_samples=a.period_samples, length_mm=a.L)
    ctx.config.update(period_range=a.period_range, period_samples=a.period_samples, length_mm=a.L)
    ctx.table("cddc", ds.CDDC_HEADER, (c.row() for c in cfgs))
    print(f"{len(cfgs)} CDDC configurations")
    return cfgs


def cmd_bulk(ctx):
    a = ctx.args
    pumps = _pump_range(ctx, a.pump_range)
    loc = bulk_phasematch_locus(ctx.crystal, ctx.pols, pumps, ctx.T)
    ctx.config.update(pump_range=[float(pumps[0]), float(pumps[-1]), len(pumps)])
    ctx.table("bulk", ["lambda_p_um", "lambda_s_um", "lambda_i_um"],
              ((lp, ls, 1 / (1 / lp - 1 / ls)) for lp, ls in loc))
    print(f"{len(loc)} bulk phase-matched pairs")
    return loc


def cmd_filter(ctx):
    a = ctx.args
    proc = _process(ctx, a.pump, a.signal, a.L, a.period, a.bulk, a.order)
    rows = ds.filter_scan(proc, a.tau, a.fwhm, resolution=a.grid, convention=a.convention)
    ctx.config.update(pump_um=a.pump, length_mm=a.L, tau_ps=a.tau, fwhm_nm=a.fwhm, grid=a.grid,
                      convention=a.convention)
    ctx.table("filter", ds.FILTER_HEADER,
              ([r.fwhm_nm, r.P, r.v_hom, r.transmitted_fraction, r.fwhm_s_nm, r.fwhm_i_nm] for r in rows))
    for r in rows:
        print(f"filter {r.fwhm_nm:g} nm: P = {r.P:.4f}, transmitted = {r.transmitted_fraction:.3f}")
    return rows


COMMANDS = {"jsa": cmd_jsa, "optimize": cmd_optimize, "atlas": cmd_atlas, "gvm": cmd_gvm,
            "cddc": cmd_cddc, "bulk": cmd_bulk, "filter": cmd_filter}


# ---------------------------------------------------------------- plotting


def _plot(ctx, result):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ValueError("--plot needs matplotlib (pip install 'artifact[plot]')") from None
    cmd = ctx.args.command
    fig, ax = plt.subplots(figsize=(5, 4))
    if cmd == "jsa":
        ext = [result.lambda_i[0] * 1e3, result.lambda_i[-1] * 1e3, result.lambda_s[0] * 1e3, result.lambda_s[-1] * 1e3]
        ax.imshow(result.intensity, origin="lower", extent=ext, aspect="auto")
        ax.set_xlabel("idler (nm)")
        ax.set_ylabel("signal (nm)")
    elif cmd == "atlas":
        for p in result:
            ax.plot([p.lambda_p * 1e3] * 2, [p.lambda_s_min * 1e3, p.lambda_s_max * 1e3], lw=2)
        ax.set_xlabel("pump (nm)")
        ax.set_ylabel("signal (nm)")
    elif cmd == "cddc":
        per = [c.period for c in result]
        for attr in ("lambda_p", "lambda_b", "lambda_r"):
            ax.plot(per, [getattr(c, attr) * 1e3 for c in result], ".", ms=2, label=attr)
        ax.set_xscale("log")
        ax.set_xlabel("period (um)")
        ax.set_ylabel("wavelength (nm)")
        ax.legend()
    elif cmd == "bulk":
        ax.plot([p[0] * 1e3 for p in result], [p[1] * 1e3 for p in result], ".", ms=2)
        ax.set_xlabel("pump (nm)")
        ax.set_ylabel("signal (nm)")
    elif cmd == "filter":
        rows = result[1:]
        ax.plot([r.fwhm_nm for r in rows], [r.P for r in rows], label="P")
        ax.plot([r.fwhm_nm for r in rows], [r.transmitted_fraction for r in rows], label="transmitted")
        ax.set_xlabel("filter FWHM (nm)")
        ax.legend()
    else:
        plt.close(fig)
        return
    path = ctx.out / f"{cmd}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--crystal", help="crystal name (KTP, CTA, KTA, RTA, RTP)")
    common.add_argument("--pols", default="o:oe", help="pump:signal+idler axes, e.g. o:oe (default o:oe)")
    common.add_argument("--temp", type=float, help="crystal temperature in degC (default: per crystal)")
    common.add_argument("--data", help="crystal data file (default: shipped data)")
    common.add_argument("--out", default="qpm_out", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "matrix"), help="table/matrix output format")
    common.add_argument("--grid", type=int, default=512, help="JSA grid resolution per axis")
    common.add_argument("--seedless", action="store_true", default=True,
                        help="deterministic mode (always on; accepted for compatibility)")
    common.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")

    process = argparse.ArgumentParser(add_help=False)
    process.add_argument("--pump", type=float, required=True, help="pump wavelength in um")
    process.add_argument("--signal", type=float, help="signal wavelength in um (default: degenerate)")
    process.add_argument("--period", type=float, help="poling period in um (default: solved)")
    process.add_argument("--bulk", action="store_true", help="no grating")
    process.add_argument("--order", type=int, help="QPM order (odd; default: sign of the mismatch)")

    p = argparse.ArgumentParser(prog="qpmdesign", description="SPDC source design in KTP-family crystals")
    p.add_argument("--figure", metavar="N", help="run a preset ('list' shows them)")
    p.add_argument("--out-root", default=".", help="base directory for --figure presets")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("jsa", parents=[common, process], help="joint spectrum and Schmidt report")
    s.add_argument("--L", type=float, default=30.0, help="crystal length in mm")
    s.add_argument("--tau", type=float, default=2.5, help="pump pulse duration (intensity FWHM) in ps")
    s.add_argument("--window-factor", type=float, default=4.0)
    s.add_argument("--components", action="store_true", help="also write pump-only and phase-matching-only grids")

    s = sub.add_parser("optimize", parents=[common, process], help="optimise tau and L")
    s.add_argument("--tau-range", type=float, nargs=2, default=(0.05, 50.0), metavar=("MIN", "MAX"))
    s.add_argument("--L-range", type=float, nargs=2, default=(1.0, 100.0), metavar=("MIN", "MAX"))
    s.add_argument("--objective", choices=("P", "K_jsi"), default="P")
    s.add_argument("--grid-points", type=int, default=24)

    s = sub.add_parser("atlas", parents=[common], help="pure-state atlas")
    s.add_argument("--pump-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="um")
    s.add_argument("--L", type=float, default=30.0)
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--atlas-grid", type=int, default=ds.ATLAS_RESOLUTION)

    s = sub.add_parser("gvm", parents=[common], help="degenerate GVM point and optional scan")
    s.add_argument("--scan", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="pump range in um")
    s.add_argument("--L", type=float, default=30.0)

    s = sub.add_parser("cddc", parents=[common], help="collinear double-downconversion search")
    s.add_argument("--period-range", type=float, nargs=2, metavar=("MIN", "MAX"))
    s.add_argument("--period-samples", type=int, default=200)
    s.add_argument("--L", type=float, default=30.0)

    s = sub.add_parser("bulk", parents=[common], help="bulk phase-matching locus")
    s.add_argument("--pump-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="um")

    s = sub.add_parser("filter", parents=[common, process], help="bandpass filter scan")
    s.add_argument("--L", type=float, default=30.0)
    s.add_argument("--tau", type=float, default=2.5)
    s.add_argument("--fwhm", type=float, nargs="+", default=[1, 2, 3, 4, 5, 6, 8, 10, 15, 20], help="nm")
    s.add_argument("--convention", choices=("amplitude", "intensity"), default="amplitude")

    s = sub.add_parser("rerun", help="replay a run from its manifest and compare outputs")
    s.add_argument("manifest")
    s.add_argument("--out", help="output directory (default: the manifest's directory)")
    return p


def _run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.figure:
        return _run_preset(args.figure, Path(args.out_root))
    if args.command is None:
        raise UsageError("a subcommand or --figure is required")
    if args.command == "rerun":
        return _rerun(args)
    if args.grid < 8:
        raise UsageError("--grid must be at least 8")
    ctx = Context(args)
    result = COMMANDS[args.command](ctx)
    if args.plot:
        _plot(ctx, result)
    ctx.finish(_canonical_argv(argv))
    return EXIT_OK


def _canonical_argv(argv):
    """argv without --out/--plot, so a manifest does not depend on where it was written."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out=") or tok == "--plot":
            continue
        out.append(tok)
    return out


def _run_preset(key, root: Path) -> int:
    if key == "list":
        for k, (desc, _) in PRESETS.items():
            print(f"{k:>12}  {desc}")
        return EXIT_OK
    if key not in PRESETS:
        raise UsageError(f"unknown figure preset {key!r}; use --figure list")
    for line in PRESETS[key][1]:
        argv = shlex.split(line)
        i = argv.index("--out")
        argv[i + 1] = str(root / argv[i + 1])
        code = _run(argv)
        if code:
            return code
    return EXIT_OK


def _rerun(args) -> int:
    mpath = Path(args.manifest)
    manifest = json.loads(mpath.read_text())
    out = Path(args.out) if args.out else mpath.parent
    code = _run(list(manifest["argv"]) + ["--out", str(out)])
    if code:
        return code
    fresh = json.loads((out / "manifest.json").read_text())
    diff = sorted(k for k in set(manifest["outputs"]) | set(fresh["outputs"])
                  if manifest["outputs"].get(k) != fresh["outputs"].get(k))
    if diff:
        print(f"rerun differs in: {', '.join(diff)}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"rerun reproduced {len(fresh['outputs'])} output files byte-for-byte")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _run(argv)
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"qpmdesign: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ds.NonConvergenceError as exc:
        print(f"qpmdesign: no convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CrystalDataError, ValueError) as exc:
        print(f"qpmdesign: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
