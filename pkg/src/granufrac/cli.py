"""Command-line entry points.

Exit codes: 0 success, 2 configuration problems (with the violation
list), 3 solver/preparation failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from . import io as gio
from .cfd import FluidSolverError
from .config import (ConfigError, load_config, rayleigh_warning,
                     validate_config, with_overrides)
from .experiments import (PackingError, generate_packing, kozeny_carman,
                          run_injection, run_permeability)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("GRANUFRAC_THREADS", "1"))


def _load_validated(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.snapshot_times:
        overrides["snapshot_times"] = tuple(
            float(t) for t in args.snapshot_times.split(","))
    if overrides:
        cfg = with_overrides(cfg, **overrides)
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    warning = rayleigh_warning(cfg)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    return cfg


def _inlet_mask(yc, wellbore_width):
    centre = 0.5 * (yc[0] + yc[-1])
    return np.abs(yc - centre) < 0.5 * wellbore_width


def _run_metrics(cfg, result):
    """Derived metrics stored in (and recomputed from) a RunRecord."""
    series = result.series.as_arrays()
    p_peak, t_peak = analysis.peak_pressure(
        series["time"], series["injection_pressure"])
    porosity = result.packing.porosity
    phi_i = result.packing.phi_i
    k = cfg.permeability_override or kozeny_carman(
        2.0 * cfg.particle_radius, porosity)
    gmax = result.series.max_inlet_shear_rate
    initial = result.engine.initial_bond_count
    broken = result.engine.broken_bond_count
    grid = result.grid
    obs = analysis.fracture_metric(
        cfg, broken, initial, grid.alpha,
        _inlet_mask(grid.cell_centers()[1], cfg.wellbore_width),
        (grid.hx, grid.hy))
    point = analysis.criteria_point(cfg, p_peak, k, phi_i, gmax,
                                    obs.observed)
    verdict = analysis.classify_initiation(point)
    return {
        "p_peak": p_peak, "t_peak": t_peak, "permeability": k,
        "porosity": porosity, "phi_i": phi_i,
        "max_inlet_shear_rate": gmax,
        "initial_bonds": initial, "broken_bonds": broken,
        "broken_fraction": obs.broken_fraction,
        "channel_length_cells": obs.channel.length_cells,
        "channel_max_aperture": obs.channel.max_aperture,
        "channel_orientation_deg": obs.channel.orientation_deg,
        "inv_pi1": point.inv_pi1, "tau2": point.tau2,
        "prediction": verdict.label,
        "observation": "fracture" if obs.observed else "no_fracture",
    }


def _save_injection(outdir, cfg, result):
    os.makedirs(outdir, exist_ok=True)
    metrics = _run_metrics(cfg, result)
    engine, grid = result.engine, result.grid
    counts = engine.bond_counts()
    gio.write_particle_snapshot(
        os.path.join(outdir, "particles_final.tsv"),
        engine.pos, engine.vel, cfg.particle_radius, counts)
    gio.write_grid_snapshot(os.path.join(outdir, "grid_final.tsv"), grid)
    gio.write_particles_vtk(
        os.path.join(outdir, "particles_final.vtk"),
        engine.pos, engine.vel, cfg.particle_radius, counts)
    gio.write_grid_vtk(os.path.join(outdir, "grid_final.vtk"), grid)
    snapshots = [{"time": engine.time,
                  "particles": "particles_final.tsv",
                  "grid": "grid_final.tsv"}]
    gio.save_run_record(outdir, cfg, result.series.as_arrays(),
                        metrics, snapshots)
    return metrics


def cmd_pack(args):
    cfg = _load_validated(args)
    packing = generate_packing(cfg, args.mode)
    gio.save_packing(args.out, packing)
    print(f"packing: {packing.count} particles, porosity "
          f"{packing.porosity:.4f}, {len(packing.bonds)} bonds -> "
          f"{args.out}")
    return EXIT_OK


def cmd_inject(args):
    cfg = _load_validated(args)
    packing = gio.load_packing(args.packing) if args.packing else None
    result = run_injection(cfg, packing)
    metrics = _save_injection(args.out, cfg, result)
    print(f"injection: P_peak {metrics['p_peak']:.1f} Pa at "
          f"t {metrics['t_peak']:.3f} s; broken "
          f"{metrics['broken_bonds']}/{metrics['initial_bonds']}; "
          f"{metrics['observation']} -> {args.out}")
    return EXIT_OK


def cmd_permeability(args):
    cfg = _load_validated(args)
    packing = gio.load_packing(args.packing) if args.packing else None
    result = run_permeability(cfg, packing)
    os.makedirs(args.out, exist_ok=True)
    metrics = {"permeability": result.permeability,
               "pressure_drop": result.pressure_drop,
               "flow_rate": result.flow_rate,
               "porosity": result.porosity, "phi_i": result.phi_i,
               "steady_time": result.steady_time}
    empty = {"time": np.array([result.steady_time]),
             "injection_pressure": np.array([result.pressure_drop]),
             "broken_bonds": np.array([0]),
             "wall_stress": np.zeros((1, 6)),
             "kinetic_energy": np.array([0.0])}
    gio.save_run_record(args.out, cfg, empty, metrics)
    print(f"permeability: k {result.permeability:.4e} m^2 "
          f"(dp {result.pressure_drop:.2f} Pa) -> {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    with open(args.manifest) as fh:
        entries = [ln.strip() for ln in fh
                   if ln.strip() and not ln.startswith("#")]
    for path in entries:
        run_args = argparse.Namespace(
            config=path, seed=args.seed, threads=args.threads,
            snapshot_times=None, packing=None,
            out=os.path.join(args.out,
                             os.path.splitext(os.path.basename(path))[0]))
        cmd_inject(run_args)
    return EXIT_OK


def cmd_analyze(args):
    records = gio.list_run_records(args.runs)
    rows = []
    for rec in records:
        cfg, m = rec.config, rec.metrics
        if "p_peak" not in m:        # permeability record; no criteria row
            continue
        p_peak, _ = analysis.peak_pressure(
            rec.series["time"], rec.series["injection_pressure"])
        grid = gio.read_grid_snapshot(
            os.path.join(rec.path, "grid_final.tsv"))
        hx = grid["xc"][1] - grid["xc"][0] if len(grid["xc"]) > 1 else 1.0
        hy = grid["yc"][1] - grid["yc"][0] if len(grid["yc"]) > 1 else 1.0
        obs = analysis.fracture_metric(
            cfg, int(m["broken_bonds"]), int(m["initial_bonds"]),
            grid["alpha"], _inlet_mask(grid["yc"], cfg.wellbore_width),
            (hx, hy))
        point = analysis.criteria_point(
            cfg, p_peak, m["permeability"], m["phi_i"],
            m["max_inlet_shear_rate"], obs.observed)
        verdict = analysis.classify_initiation(point)
        fluid = (f"K={cfg.rheology.consistency_index:g},"
                 f"n={cfg.rheology.flow_behavior_index:g}")
        rows.append((rec.run_id, fluid,
                     cfg.rheology.flow_behavior_index,
                     cfg.rheology.consistency_index, cfg.sigma3,
                     cfg.injection_velocity,
                     cfg.material.youngs_modulus, p_peak,
                     m["permeability"], m["phi_i"], point.inv_pi1,
                     point.tau2, verdict.label,
                     "fracture" if obs.observed else "no_fracture"))
    gio.write_criteria_table(args.out, rows,
                             analysis.INV_PI1_THRESHOLD,
                             analysis.TAU2_THRESHOLD)
    print(f"analyze: {len(rows)} runs -> {args.out}")
    return EXIT_OK


def cmd_validate_config(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    print("config ok")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="granufrac",
        description="Coupled fluid-grain injection simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, out=True):
        if config:
            p.add_argument("--config", required=True)
        if out:
            p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--snapshot-times", default=None,
                       help="comma-separated simulation times")

    p = sub.add_parser("pack", help="prepare and store a packing")
    common(p)
    p.add_argument("--mode", choices=("injection", "permeability"),
                   default="injection")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("inject", help="run an injection experiment")
    common(p)
    p.add_argument("--packing", default=None,
                   help="directory holding a stored packing")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("permeability",
                       help="run a steady through-flow measurement")
    common(p)
    p.add_argument("--packing", default=None)
    p.set_defaults(func=cmd_permeability)

    p = sub.add_parser("sweep", help="run every config in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze",
                       help="criteria table from run directories")
    p.add_argument("runs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "threads"):
        os.environ.setdefault("GRANUFRAC_THREADS", str(_threads(args)))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FluidSolverError, PackingError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
