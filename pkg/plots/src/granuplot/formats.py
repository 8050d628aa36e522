"""Readers for the granufrac columnar formats (format-version 1).

Independent re-implementation of the published file contracts; kept free
of any granufrac import on purpose.
"""

import numpy as np

FORMAT_HEADER = "# granufrac-format 1"

SERIES_COLUMNS = ("time", "injection_pressure", "broken_bonds",
                  "wall_xlo", "wall_xhi", "wall_ylo", "wall_yhi",
                  "wall_zlo", "wall_zhi", "kinetic_energy")
GRID_COLUMNS = ("x", "y", "u", "v", "p", "alpha", "mu")
CRITERIA_COLUMNS = ("run_id", "fluid", "flow_behavior_index",
                    "consistency_index", "sigma3", "velocity",
                    "youngs_modulus", "p_peak", "permeability",
                    "phi_i", "inv_pi1", "tau2", "prediction",
                    "observation")
CRITERIA_FLOATS = ("flow_behavior_index", "consistency_index", "sigma3",
                   "velocity", "youngs_modulus", "p_peak", "permeability",
                   "phi_i", "inv_pi1", "tau2")


class FormatError(ValueError):
    pass


def _check_header(path, line):
    if line.rstrip("\n") != FORMAT_HEADER:
        raise FormatError(f"{path}: unrecognized format header")


def read_series(path):
    """Time-series table -> dict of column name to float array."""
    with open(path, "r", encoding="ascii") as fh:
        _check_header(path, fh.readline())
        names = tuple(fh.readline().rstrip("\n").split("\t"))
        if names != SERIES_COLUMNS:
            raise FormatError(f"{path}: bad series columns {names}")
        data = np.array([[float(v) for v in raw.split("\t")]
                         for raw in fh if raw.strip()], dtype=float)
    data = data.reshape(-1, len(SERIES_COLUMNS))
    return {name: data[:, k] for k, name in enumerate(SERIES_COLUMNS)}


def read_grid(path):
    """Grid snapshot -> dict with xc, yc axes and (nx, ny) field arrays."""
    with open(path, "r", encoding="ascii") as fh:
        _check_header(path, fh.readline())
        names = tuple(fh.readline().rstrip("\n").split("\t"))
        if names != GRID_COLUMNS:
            raise FormatError(f"{path}: bad grid columns {names}")
        data = np.array([[float(v) for v in raw.split("\t")]
                         for raw in fh if raw.strip()], dtype=float)
    data = data.reshape(-1, len(GRID_COLUMNS))
    xc = np.unique(data[:, 0])
    yc = np.unique(data[:, 1])
    out = {"xc": xc, "yc": yc}
    for k, name in enumerate(GRID_COLUMNS[2:], start=2):
        out[name] = data[:, k].reshape(len(xc), len(yc))
    return out


def read_criteria(path):
    """Criteria table -> {"thresholds": {...}, "rows": [dict, ...]}."""
    with open(path, "r", encoding="ascii") as fh:
        _check_header(path, fh.readline())
        thresholds = {}
        line = fh.readline()
        while line.startswith("# threshold"):
            try:
                _, _, name, value = line.split()
                thresholds[name] = float(value)
            except ValueError as exc:
                raise FormatError(f"{path}: bad threshold line") from exc
            line = fh.readline()
        names = tuple(line.rstrip("\n").split("\t"))
        if names != CRITERIA_COLUMNS:
            raise FormatError(f"{path}: bad criteria columns {names}")
        if "inv_pi1" not in thresholds or "tau2" not in thresholds:
            raise FormatError(f"{path}: missing threshold metadata")
        rows = []
        for raw in fh:
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != len(CRITERIA_COLUMNS):
                raise FormatError(f"{path}: short criteria row")
            row = dict(zip(CRITERIA_COLUMNS, parts))
            for key in CRITERIA_FLOATS:
                row[key] = float(row[key])
            rows.append(row)
    return {"thresholds": thresholds, "rows": rows}
