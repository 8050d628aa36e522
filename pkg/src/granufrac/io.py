"""Results persistence: columnar text formats, legacy-VTK exports and
self-describing run directories.

Every columnar file starts with a format-version header line; floats
are written with ``repr`` so a read-back reproduces the stored values
bit for bit.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import (SimulationConfig, config_hash, config_to_text,
                     load_config)

FORMAT_HEADER = "# granufrac-format 1"
SERIES_COLUMNS = ("time", "injection_pressure", "broken_bonds",
                  "wall_stress_xlo", "wall_stress_xhi",
                  "wall_stress_ylo", "wall_stress_yhi",
                  "wall_stress_zlo", "wall_stress_zhi",
                  "kinetic_energy")
PARTICLE_COLUMNS = ("id", "x", "y", "z", "vx", "vy", "vz",
                    "radius", "bond_count")
GRID_COLUMNS = ("xc", "yc", "u", "v", "p", "alpha", "mu")


class FormatError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_table(path, columns, rows):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(FORMAT_HEADER + "\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def _read_table(path, columns):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != FORMAT_HEADER:
            raise FormatError(f"{path}: unrecognized header {header!r}")
        names = tuple(fh.readline().rstrip("\n").split("\t"))
        if names != tuple(columns):
            raise FormatError(f"{path}: expected columns {columns}, "
                              f"got {names}")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    return rows


# -- time series ------------------------------------------------------------

def write_series(path, series: dict):
    """series holds the arrays produced by CoupledSeries.as_arrays()."""
    n = len(series["time"])
    ws = np.asarray(series["wall_stress"], dtype=float).reshape(n, 6)
    rows = ((series["time"][i], series["injection_pressure"][i],
             int(series["broken_bonds"][i]), *ws[i],
             series["kinetic_energy"][i]) for i in range(n))
    _write_table(path, SERIES_COLUMNS, rows)


def read_series(path) -> dict:
    rows = _read_table(path, SERIES_COLUMNS)
    data = np.array([[float(v) for v in r] for r in rows]).reshape(
        len(rows), len(SERIES_COLUMNS))
    return {"time": data[:, 0], "injection_pressure": data[:, 1],
            "broken_bonds": data[:, 2].astype(int),
            "wall_stress": data[:, 3:9],
            "kinetic_energy": data[:, 9]}


# -- snapshots --------------------------------------------------------------

def write_particle_snapshot(path, positions, velocities, radius,
                            bond_counts):
    pos = np.atleast_2d(positions)
    vel = np.atleast_2d(velocities)
    n = pos.shape[0] if pos.size else 0
    rows = ((i, *pos[i], *vel[i], radius, int(bond_counts[i]))
            for i in range(n))
    _write_table(path, PARTICLE_COLUMNS, rows)


def read_particle_snapshot(path):
    rows = _read_table(path, PARTICLE_COLUMNS)
    n = len(rows)
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    bonds = np.zeros(n, dtype=int)
    radius = 0.0
    for k, r in enumerate(rows):
        pos[k] = [float(v) for v in r[1:4]]
        vel[k] = [float(v) for v in r[4:7]]
        radius = float(r[7])
        bonds[k] = int(r[8])
    return {"positions": pos, "velocities": vel, "radius": radius,
            "bond_counts": bonds}


def write_grid_snapshot(path, grid):
    xc, yc = grid.cell_centers()
    rows = ((xc[i], yc[j], grid.u[i, j], grid.v[i, j], grid.p[i, j],
             grid.alpha[i, j], grid.mu[i, j])
            for i in range(grid.nx) for j in range(grid.ny))
    _write_table(path, GRID_COLUMNS, rows)


def read_grid_snapshot(path):
    rows = _read_table(path, GRID_COLUMNS)
    data = np.array([[float(v) for v in r] for r in rows]).reshape(
        len(rows), len(GRID_COLUMNS))
    xc = np.unique(data[:, 0])
    yc = np.unique(data[:, 1])
    nx, ny = len(xc), len(yc)
    out = {"xc": xc, "yc": yc}
    for k, name in enumerate(GRID_COLUMNS[2:], start=2):
        out[name] = data[:, k].reshape(nx, ny)
    return out


# -- legacy VTK (visualization only; not round-tripped) ---------------------

def write_particles_vtk(path, positions, velocities, radius, bond_counts):
    pos = np.atleast_2d(positions)
    n = pos.shape[0] if pos.size else 0
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\nparticles\nASCII\n"
                 "DATASET POLYDATA\n")
        fh.write(f"POINTS {n} double\n")
        for i in range(n):
            fh.write("%.9e %.9e %.9e\n" % tuple(pos[i]))
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS velocity double\n")
        for i in range(n):
            fh.write("%.9e %.9e %.9e\n" % tuple(velocities[i]))
        fh.write("SCALARS bond_count int 1\nLOOKUP_TABLE default\n")
        for i in range(n):
            fh.write("%d\n" % bond_counts[i])
        fh.write("SCALARS radius double 1\nLOOKUP_TABLE default\n")
        for _ in range(n):
            fh.write("%.9e\n" % radius)


def write_grid_vtk(path, grid):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\nfluid grid\nASCII\n"
                 "DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 2\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write("SPACING %.9e %.9e %.9e\n"
                 % (grid.hx, grid.hy, grid.extent[2]))
        ncell = grid.nx * grid.ny
        fh.write(f"CELL_DATA {ncell}\n")
        for name in ("p", "alpha", "mu"):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fld = getattr(grid, name)
            for j in range(grid.ny):
                for i in range(grid.nx):
                    fh.write("%.9e\n" % fld[i, j])
        fh.write("VECTORS velocity double\n")
        for j in range(grid.ny):
            for i in range(grid.nx):
                fh.write("%.9e %.9e 0.0\n" % (grid.u[i, j], grid.v[i, j]))


# -- packings ---------------------------------------------------------------

def save_packing(directory, packing):
    os.makedirs(directory, exist_ok=True)
    np.save(os.path.join(directory, "positions.npy"), packing.positions)
    np.save(os.path.join(directory, "bonds.npy"), packing.bonds)
    np.save(os.path.join(directory, "walls.npy"), packing.wall_positions)
    meta = {"mode": packing.mode, "porosity": packing.porosity,
            "phi_i": packing.phi_i}
    with open(os.path.join(directory, "packing.json"), "w") as fh:
        json.dump(meta, fh, indent=1)


def load_packing(directory):
    from .experiments import Packing
    with open(os.path.join(directory, "packing.json")) as fh:
        meta = json.load(fh)
    return Packing(
        np.load(os.path.join(directory, "positions.npy")),
        np.load(os.path.join(directory, "bonds.npy")),
        np.load(os.path.join(directory, "walls.npy")),
        meta["mode"], meta["porosity"], meta["phi_i"])


# -- run records ------------------------------------------------------------

@dataclass
class RunRecord:
    """Self-describing results directory."""

    run_id: str
    config: SimulationConfig
    config_digest: str
    series: dict
    snapshots: list = field(default_factory=list)  # [{"time", "particles", "grid"}]
    metrics: dict = field(default_factory=dict)

    @property
    def path(self):
        return self._path

    _path: str = ""


def save_run_record(directory, cfg: SimulationConfig, series: dict,
                    metrics: dict, snapshots=None) -> str:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "config.ini"), "w") as fh:
        fh.write(config_to_text(cfg))
    write_series(os.path.join(directory, "series.tsv"), series)
    record = {"run_id": os.path.basename(os.path.normpath(directory)),
              "config_hash": config_hash(cfg),
              "snapshots": snapshots or [],
              "metrics": metrics}
    with open(os.path.join(directory, "record.json"), "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
    return directory


def load_run_record(directory) -> RunRecord:
    with open(os.path.join(directory, "record.json")) as fh:
        record = json.load(fh)
    cfg = load_config(os.path.join(directory, "config.ini"))
    digest = config_hash(cfg)
    if digest != record["config_hash"]:
        raise FormatError(
            f"{directory}: stored config hash {record['config_hash']} "
            f"does not match the config file ({digest})")
    series = read_series(os.path.join(directory, "series.tsv"))
    t = series["time"]
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise FormatError(f"{directory}: series timestamps not "
                          "strictly increasing")
    rec = RunRecord(record["run_id"], cfg, digest, series,
                    record.get("snapshots", []),
                    record.get("metrics", {}))
    rec._path = os.path.abspath(directory)
    return rec


def list_run_records(root):
    """RunRecords under root (directories holding record.json), sorted."""
    out = []
    for name in sorted(os.listdir(root)):
        d = os.path.join(root, name)
        if os.path.isdir(d) and os.path.exists(
                os.path.join(d, "record.json")):
            out.append(load_run_record(d))
    return out


# -- criteria table ---------------------------------------------------------

CRITERIA_COLUMNS = ("run_id", "fluid", "flow_behavior_index",
                    "consistency_index", "sigma3", "velocity",
                    "youngs_modulus", "p_peak", "permeability",
                    "phi_i", "inv_pi1", "tau2", "prediction",
                    "observation")


def write_criteria_table(path, rows, inv_pi1_threshold, tau2_threshold):
    """Delimited criteria table with threshold metadata for plotting."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(FORMAT_HEADER + "\n")
        fh.write(f"# threshold inv_pi1 {inv_pi1_threshold!r}\n")
        fh.write(f"# threshold tau2 {tau2_threshold!r}\n")
        fh.write("\t".join(CRITERIA_COLUMNS) + "\n")
        for row in rows:
            fh.write("\t".join(
                _fmt(v) if isinstance(v, (int, float, np.floating))
                else str(v) for v in row) + "\n")


def read_criteria_table(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != FORMAT_HEADER:
            raise FormatError(f"{path}: unrecognized header {header!r}")
        thresholds = {}
        line = fh.readline()
        while line.startswith("# threshold"):
            _, _, name, value = line.split()
            thresholds[name] = float(value)
            line = fh.readline()
        names = tuple(line.rstrip("\n").split("\t"))
        if names != CRITERIA_COLUMNS:
            raise FormatError(f"{path}: bad criteria columns {names}")
        rows = []
        for raw in fh:
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split("\t")
            row = dict(zip(CRITERIA_COLUMNS, parts))
            for key in ("flow_behavior_index", "consistency_index",
                        "sigma3", "velocity", "youngs_modulus",
                        "p_peak", "permeability", "phi_i", "inv_pi1",
                        "tau2"):
                row[key] = float(row[key])
            rows.append(row)
    return {"thresholds": thresholds, "rows": rows}
