"""Deterministic paper-style figures from granufrac artifacts."""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import formats

# fixed style so identical inputs always produce identical bytes
STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "svg.hashsalt": "granuplot",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

FLUID_COLORS = {}
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f")

KINDS = {}


def _fluid_color(name):
    if name not in FLUID_COLORS:
        FLUID_COLORS[name] = _PALETTE[len(FLUID_COLORS) % len(_PALETTE)]
    return FLUID_COLORS[name]


def _kind(name):
    def wrap(fn):
        KINDS[name] = fn
        return fn
    return wrap


def _save(fig, output):
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, metadata=_no_date_metadata(output))
    plt.close(fig)


def _no_date_metadata(output):
    # PNG is already timestamp-free; SVG/PDF embed dates unless cleared
    suffix = Path(output).suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None


@_kind("pressure_history")
def pressure_history(inputs, output, style=None):
    """Injection-pressure histories, one curve per series file."""
    fig, ax = plt.subplots()
    for path in inputs:
        series = formats.read_series(path)
        ax.plot(series["time"], series["injection_pressure"],
                label=Path(path).parent.name or Path(path).stem)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("injection pressure [Pa]")
    ax.legend(fontsize=7)
    _save(fig, output)


@_kind("peak_over_sigma")
def peak_over_sigma(inputs, output, style=None):
    """P_peak / sigma3 against sigma3, grouped by fluid."""
    table = formats.read_criteria(inputs[0])
    fig, ax = plt.subplots()
    by_fluid = {}
    for row in table["rows"]:
        by_fluid.setdefault(row["fluid"], []).append(
            (row["sigma3"], row["p_peak"] / row["sigma3"]))
    for fluid in sorted(by_fluid):
        pts = np.array(sorted(by_fluid[fluid]))
        ax.plot(pts[:, 0], pts[:, 1], "o-", color=_fluid_color(fluid),
                label=fluid)
    ax.set_xlabel(r"$\sigma_3$ [Pa]")
    ax.set_ylabel(r"$P_{peak}/\sigma_3$")
    if by_fluid:
        ax.legend(fontsize=7)
    _save(fig, output)


@_kind("pi_scatter")
def pi_scatter(inputs, output, style=None):
    """Pi1-Pi2 validation scatter (Pi2 = P_peak / sigma3)."""
    table = formats.read_criteria(inputs[0])
    fig, ax = plt.subplots()
    for row in table["rows"]:
        pi1 = 1.0 / row["inv_pi1"]
        pi2 = row["p_peak"] / row["sigma3"]
        ax.loglog([pi1], [pi2], "o", color=_fluid_color(row["fluid"]))
    handles = [plt.Line2D([], [], marker="o", ls="", color=c, label=f)
               for f, c in sorted(FLUID_COLORS.items())]
    if handles:
        ax.legend(handles=handles, fontsize=7)
    ax.set_xlabel(r"$\Pi_1$")
    ax.set_ylabel(r"$\Pi_2 = P_{peak}/\sigma_3$")
    _save(fig, output)


@_kind("viscosity_map")
def viscosity_map(inputs, output, style=None):
    """Apparent-viscosity field of a grid snapshot (log color scale)."""
    grid = formats.read_grid(inputs[0])
    fig, ax = plt.subplots()
    mu = grid["mu"].T
    mesh = ax.pcolormesh(grid["xc"], grid["yc"], np.log10(mu),
                         shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=r"$\log_{10}\,\mu$ [Pa s]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    _save(fig, output)


@_kind("peak_bars")
def peak_bars(inputs, output, style=None):
    """Peak-pressure bar comparison across runs."""
    table = formats.read_criteria(inputs[0])
    rows = sorted(table["rows"], key=lambda r: r["run_id"])
    fig, ax = plt.subplots()
    xs = np.arange(len(rows))
    ax.bar(xs, [r["p_peak"] for r in rows],
           color=[_fluid_color(r["fluid"]) for r in rows])
    ax.set_xticks(xs)
    ax.set_xticklabels([r["run_id"] for r in rows], rotation=60,
                       ha="right", fontsize=6)
    ax.set_ylabel(r"$P_{peak}$ [Pa]")
    fig.tight_layout()
    _save(fig, output)


@_kind("criteria_map")
def criteria_map(inputs, output, style=None):
    """1/Pi1 - tau2 map with the threshold box read from metadata.

    Points are colored by whether the classifier prediction agreed with
    the observed outcome.
    """
    table = formats.read_criteria(inputs[0])
    t1 = table["thresholds"]["inv_pi1"]
    t2 = table["thresholds"]["tau2"]
    fig, ax = plt.subplots()
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.axvline(t1, color="k", lw=1.0, ls="--")
    ax.axhline(t2, color="k", lw=1.0, ls="--")
    for row in table["rows"]:
        agree = row["prediction"] == row["observation"]
        marker = "o" if row["observation"] == "fracture" else "s"
        ax.plot([row["inv_pi1"]], [row["tau2"]], marker,
                color="#2ca02c" if agree else "#d62728",
                mec="k", mew=0.4, ms=6)
    ax.set_xlabel(r"$1/\Pi_1$")
    ax.set_ylabel(r"$\tau_2$")
    ax.set_title(f"thresholds: $1/\\Pi_1$={t1:g}, $\\tau_2$={t2:g}",
                 fontsize=8)
    _save(fig, output)


def make_figure(kind, inputs, output, style=None):
    """Render one figure; raises KeyError for unknown kinds and
    FormatError for malformed inputs."""
    if kind not in KINDS:
        raise KeyError(f"unknown figure kind {kind!r}")
    for path in inputs:
        if not Path(path).exists():
            raise FileNotFoundError(path)
    with plt.rc_context(STYLE):
        KINDS[kind](inputs, output, style)
    return output


def regeneration_check(tmp_dir=None):
    """Render sample criteria-map and pressure-history figures twice and
    assert byte-identical output. Used by acceptance tests."""
    import tempfile
    with tempfile.TemporaryDirectory() as default_dir:
        root = Path(tmp_dir or default_dir)
        criteria = root / "criteria.tsv"
        series = root / "series.tsv"
        _write_sample_inputs(criteria, series)
        jobs = [("criteria_map", [criteria], root / "map.png"),
                ("pressure_history", [series], root / "hist.png")]
        for kind, inputs, out in jobs:
            make_figure(kind, inputs, out)
            first = out.read_bytes()
            make_figure(kind, inputs, out)
            assert out.read_bytes() == first, f"{kind} not byte-identical"


def _write_sample_inputs(criteria_path, series_path):
    with open(criteria_path, "w", encoding="ascii") as fh:
        fh.write(formats.FORMAT_HEADER + "\n")
        fh.write("# threshold inv_pi1 0.06\n")
        fh.write("# threshold tau2 2e-07\n")
        fh.write("\t".join(formats.CRITERIA_COLUMNS) + "\n")
        fh.write("demo\tK=11.0,n=0.5\t0.5\t11.0\t1000\t0.4\t1e6\t"
                 "5000\t2e-11\t0.6\t0.5\t5e-7\tfracture\tfracture\n")
    with open(series_path, "w", encoding="ascii") as fh:
        fh.write(formats.FORMAT_HEADER + "\n")
        fh.write("\t".join(formats.SERIES_COLUMNS) + "\n")
        for i in range(20):
            t = 0.01 * i
            p = 4000.0 * np.exp(-((t - 0.08) / 0.05) ** 2)
            fh.write("\t".join(repr(float(v)) for v in
                               (t, p, 0, 1, 1, 1, 1, 0, 0, 1e-9)) + "\n")
