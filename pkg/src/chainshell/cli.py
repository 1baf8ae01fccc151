"""Command-line interface.

Subcommands: units, sweep2d, gen3d, filter, loads, analyze, optimize,
run (full pipeline), report.  Exit codes: 0 success, 2 validation error,
3 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import filtering, loads as loads_mod, pipeline, profile2d, shell3d, units
from .config import PipelineConfig, derive_seed, load_config
from .errors import (ChainshellError, ConfigError, EnvelopeError, GeometryError,
                     InfeasibleError, MechanismError, ParameterError, StageError)
from .fem import Material, analyze_shell
from .pipeline import SELECTED_HEADER, _fmt

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (INI-style)")
    common.add_argument("--seed", type=int, help="override the top-level seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads")

    parser = argparse.ArgumentParser(
        prog="chainshell",
        description="batch design toolkit for vacuum-jammed chainmail shells")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("units", parents=[common],
                   help="unit-cell geometry table for the three ring shapes")
    sub.add_parser("sweep2d", parents=[common],
                   help="2D amplitude/frequency feasibility sweep")

    p = sub.add_parser("gen3d", parents=[common],
                       help="generate seeded 3D shell iterations")
    p.add_argument("--amplitude", type=float, required=True, help="A in mm")
    p.add_argument("--frequency", type=int, required=True)
    p.add_argument("--iterations", type=int, default=20)

    p = sub.add_parser("filter", parents=[common],
                       help="select distinct surfaces from a generated pool")
    p.add_argument("--in", dest="in_path", required=True,
                   help="directory containing a gen3d manifest.csv")
    p.add_argument("--keep", type=int, default=4)

    p = sub.add_parser("loads", parents=[common],
                       help="load-case table for a shell")
    p.add_argument("--area", type=float, default=4.0, help="plan area m2")
    p.add_argument("--thickness", type=float, default=0.08, help="m")
    p.add_argument("--surface-area", type=float, default=None,
                   help="deformed surface area m2 (defaults to plan area)")

    p = sub.add_parser("analyze", parents=[common],
                       help="frame analysis of selected surfaces")
    p.add_argument("--in", dest="in_path", required=True,
                   help="selected.csv from the filter step")
    p.add_argument("--supports", default=None,
                   help="support mode or a config file providing [fem] supports")

    sub.add_parser("optimize", parents=[common], help="shelter optimization study")
    sub.add_parser("run", parents=[common], help="full pipeline")

    p = sub.add_parser("report", parents=[common],
                       help="summarize a run directory")
    p.add_argument("--in", dest="in_path", required=True, help="run directory")
    return parser


def _config_from_args(args) -> PipelineConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.threads is not None:
        config = replace(config, threads=args.threads)
    return config


def _out_dir(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def _cat(path: Path) -> None:
    sys.stdout.write(path.read_text(encoding="utf-8"))


def cmd_units(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, "runs/units")
    pipeline.stage_units(config, out)
    _cat(out / "units" / "units.csv")
    return EXIT_OK


def cmd_sweep2d(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, "runs/sweep2d")
    pipeline.stage_sweep2d(config, out)
    _cat(out / "sweep2d" / "max_feasible.csv")
    return EXIT_OK


def cmd_gen3d(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, "runs/gen3d")
    envelope = profile2d.default_envelope(units.Shape.parse(config.sweep2d.shape))
    # an explicit --seed keys the pool directly; otherwise derive per stage
    seed = config.seed if args.seed is not None else derive_seed(config.seed, "gen3d")
    grids = shell3d.generate_iterations(args.amplitude, args.frequency,
                                        n=args.iterations, seed=seed,
                                        span=config.gen3d.span_mm,
                                        envelope=envelope)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["iteration,amplitude_mm,frequency,seed,min_z_mm,max_z_mm,"
            "area_m2,perimeter_m"]
    for i, grid in enumerate(grids):
        surface = shell3d.interpolate_surface(grid, config.gen3d.resolution)
        with open(out / f"iter{i:02d}.mesh", "w", encoding="utf-8",
                  newline="\n") as fh:
            shell3d.write_mesh(surface.mesh, fh)
        with open(out / f"iter{i:02d}.pgm", "wb") as fh:
            shell3d.write_pgm(shell3d.depth_map(surface, 128), fh)
        metrics = filtering.measure(surface)
        rows.append(",".join([
            str(i), _fmt(args.amplitude, 1), str(args.frequency), str(seed),
            _fmt(float(grid.z_values.min()), 6),
            _fmt(float(grid.z_values.max()), 6),
            _fmt(metrics.area_a, 9), _fmt(metrics.perimeter_P, 9)]))
    (out / "manifest.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {len(grids)} iterations to {out}")
    return EXIT_OK


def _read_csv(path: Path) -> List[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [row for row in csv.DictReader(fh)
                if row and not next(iter(row.values()), "").startswith("#")]


def cmd_filter(args) -> int:
    in_dir = Path(args.in_path)
    manifest = in_dir / "manifest.csv" if in_dir.is_dir() else in_dir
    rows = _read_csv(manifest)
    if not rows:
        raise ParameterError(f"no iterations found in {manifest}")
    metrics = [filtering.SurfaceMetrics(perimeter_P=float(r["perimeter_m"]),
                                        area_a=float(r["area_m2"]))
               for r in rows]
    dP, da = filtering.auto_tolerance_from_metrics(metrics, args.keep)
    kept = set(filtering.select_indices(metrics, dP, da, args.keep))
    out = Path(args.out) if args.out else manifest.parent
    lines = [SELECTED_HEADER]
    for i, r in enumerate(rows):
        lines.append(",".join([
            r["iteration"], r["amplitude_mm"], r["frequency"], r["seed"],
            r["perimeter_m"], r["area_m2"], "1" if i in kept else "0",
            _fmt(dP, 9), _fmt(da, 9)]))
    out.mkdir(parents=True, exist_ok=True)
    (out / "selected.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"kept {len(kept)} of {len(rows)} (dP={dP:.9f} m, da={da:.9f} m2)")
    return EXIT_OK


def cmd_loads(args) -> int:
    spec = loads_mod.StructureSpec(plan_area_a=args.area,
                                   thickness_t=args.thickness)
    surface_area = args.surface_area if args.surface_area is not None else args.area
    case = loads_mod.combine(spec, surface_area)
    limit = loads_mod.deflection_limit(spec.span_L)
    print("DL_kN,LL_kN,SL_kN,WL_kN,TL_kN,deflection_limit_mm")
    print(",".join([_fmt(case.dead_DL, 4), _fmt(case.live_LL, 4),
                    _fmt(case.snow_SL, 4), _fmt(case.wind_WL, 4),
                    _fmt(case.total_TL, 4), _fmt(limit, 4)]))
    return EXIT_OK


def _support_mode(value: Optional[str], config: PipelineConfig) -> str:
    if value is None:
        return config.fem.supports
    if value in ("boundary-fixed", "corner-pinned"):
        return value
    nested = load_config(value)
    return nested.fem.supports


def cmd_analyze(args) -> int:
    config = _config_from_args(args)
    mode = _support_mode(args.supports, config)
    selected = Path(args.in_path)
    if selected.is_dir():
        selected = selected / "selected.csv"
    rows = [r for r in _read_csv(selected) if r["kept"] == "1"]
    if not rows:
        raise ParameterError(f"no kept surfaces in {selected}")
    structure = loads_mod.StructureSpec(
        plan_area_a=config.loads.plan_area_m2,
        thickness_t=config.loads.thickness_m,
        span_L=config.gen3d.span_mm / 1000.0,
        unit_weight_rho=config.loads.unit_weight_kn_m3,
        solid_fraction=config.loads.solid_fraction)
    material = Material(config.fem.elastic_modulus_pa, config.fem.shear_modulus_pa)
    out_lines = ["model,DL_kN,LL_kN,SL_kN,WL_kN,TL_kN,max_displacement_mm,"
                 "limit_mm,passed"]
    for r in rows:
        idx = int(r["iteration"])
        grids = shell3d.generate_iterations(float(r["amplitude_mm"]),
                                            int(r["frequency"]), n=idx + 1,
                                            seed=int(r["seed"]),
                                            span=config.gen3d.span_mm)
        surface = shell3d.interpolate_surface(grids[idx], config.gen3d.resolution)
        case = loads_mod.combine(structure, float(r["area_m2"]),
                                 mu=config.loads.snow_shape_factor,
                                 c_p=config.loads.wind_shape_factor)
        analysis = analyze_shell(surface, case, grid=config.fem.lattice_grid,
                                 material=material, support_mode=mode,
                                 thickness=config.loads.thickness_m,
                                 solid_fraction=config.loads.solid_fraction)
        out_lines.append(",".join([
            f"iter{idx:02d}", _fmt(case.dead_DL, 4), _fmt(case.live_LL, 4),
            _fmt(case.snow_SL, 4), _fmt(case.wind_WL, 4),
            _fmt(case.total_TL, 4), _fmt(analysis.max_displacement_mm, 4),
            _fmt(analysis.limit_mm, 4), "1" if analysis.passed else "0"]))
    out = Path(args.out) if args.out else selected.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "displacements.csv").write_text("\n".join(out_lines) + "\n",
                                           encoding="utf-8")
    sys.stdout.write("\n".join(out_lines) + "\n")
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, "runs/shelter")
    pipeline.stage_optimize(config, out)
    _cat(out / "optimize" / "ranking.csv")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, f"runs/run-seed{config.seed}")
    run_dir = pipeline.run_pipeline(config, out)
    print(f"run complete: {run_dir}")
    print(f"manifest hash: {pipeline.read_manifest_hash(run_dir)}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.in_path)
    manifest = run_dir / "manifest.txt"
    if not manifest.exists():
        raise ParameterError(f"{run_dir} has no manifest.txt")
    print(f"run directory: {run_dir}")
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if line.startswith(("seed", "config_hash", "status", "manifest_hash",
                            "failed_stage", "error")):
            print(f"  {line}")
    sweep = run_dir / "sweep2d" / "max_feasible.csv"
    if sweep.exists():
        rows = _read_csv(sweep)
        if rows:
            r = rows[0]
            print(f"2D sweep maximum: {r['shape']} A={r['max_amplitude_mm']} mm "
                  f"f={r['max_frequency']}")
    disp = run_dir / "analyze" / "displacements.csv"
    if disp.exists():
        rows = _read_csv(disp)
        print(f"analysis: {len(rows)} models, "
              f"{sum(1 for r in rows if r['passed'] == '1')} within the limit")
        for r in rows:
            print(f"  {r['model']}: TL={r['TL_kN']} kN, "
                  f"max={r['max_displacement_mm']} mm (limit {r['limit_mm']})")
    ranking = run_dir / "optimize" / "ranking.csv"
    if ranking.exists():
        rows = [r for r in _read_csv(ranking) if r["rank"]]
        print(f"shelter ranking: {len(rows)} candidates")
        for r in rows[:5]:
            print(f"  #{r['rank']} {r['candidate']}: score={r['weighted_score']} "
                  f"CMS={r['CMS_m2']} UA={r['UA_m2']}")
    return EXIT_OK


_COMMANDS = {
    "units": cmd_units,
    "sweep2d": cmd_sweep2d,
    "gen3d": cmd_gen3d,
    "filter": cmd_filter,
    "loads": cmd_loads,
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, EnvelopeError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StageError, MechanismError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ChainshellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
