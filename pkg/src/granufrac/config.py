"""Configuration schema, shared domain types and global numeric conventions.

All quantities are strict SI (m, kg, s, Pa, J). Config files carry bare
numbers, no unit syntax.

Config files are INI-style text with the sections

    [domain]    geometry, particle size, grid resolution, seed
    [material]  grain elastic / frictional / cohesive parameters
    [fluid]     fluid density and power-law rheology (n = 1 -> Newtonian)
    [stresses]  boundary stress targets and servo gain
    [injection] inlet velocity
    [time]      DEM / CFD step sizes and end time
    [output]    series cadence and snapshot times
    [analysis]  post-processing constants (permeability override,
                fracture-metric thresholds)

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, replace

GRAVITY = 9.81


@dataclass(frozen=True)
class MaterialParams:
    """Grain material parameters (Hertz elasticity + surface-energy cohesion)."""

    density: float = 2650.0            # kg/m^3
    poisson_ratio: float = 0.3
    youngs_modulus: float = 1.0e6      # Pa
    friction_coefficient: float = 0.5
    surface_energy_density: float = 1.0  # J/m^2
    restitution: float = 0.2           # used for contact damping

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))

    @property
    def effective_modulus(self) -> float:
        """E* for like-material contacts: E / (2 (1 - nu^2))."""
        return self.youngs_modulus / (2.0 * (1.0 - self.poisson_ratio**2))


@dataclass(frozen=True)
class RheologyModel:
    """Power-law rheology mu = K * gamma_dot^(n-1); n = 1 is Newtonian."""

    consistency_index: float   # K, Pa s^n
    flow_behavior_index: float # n, dimensionless


# Fluids used throughout the experiments.
GUAR = RheologyModel(consistency_index=11.0, flow_behavior_index=0.41)
XG = RheologyModel(consistency_index=4.78, flow_behavior_index=0.1547)
NEWTONIAN_3PAS = RheologyModel(consistency_index=3.0, flow_behavior_index=1.0)
WATER = RheologyModel(consistency_index=1.0e-3, flow_behavior_index=1.0)


@dataclass
class Particle:
    """Single-grain state used at I/O boundaries (the engine stores arrays)."""

    id: int
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    angular_velocity: tuple[float, float, float]
    radius: float
    mass: float
    moment_of_inertia: float
    bonded_neighbors: set[int] = field(default_factory=set)

    @classmethod
    def make(cls, pid, position, radius, density, velocity=(0.0, 0.0, 0.0),
             angular_velocity=(0.0, 0.0, 0.0), bonded_neighbors=None):
        mass = density * (4.0 / 3.0) * math.pi * radius**3
        return cls(
            id=pid,
            position=tuple(position),
            velocity=tuple(velocity),
            angular_velocity=tuple(angular_velocity),
            radius=radius,
            mass=mass,
            moment_of_inertia=0.4 * mass * radius**2,
            bonded_neighbors=set(bonded_neighbors or ()),
        )


@dataclass
class SimulationConfig:
    """Full description of one experiment."""

    domain_extent: tuple[float, float, float] = (0.6, 0.3, 0.002)
    particle_radius: float = 0.001
    particle_count_target: int = 45000
    material: MaterialParams = field(default_factory=MaterialParams)
    fluid_density: float = 1000.0
    rheology: RheologyModel = field(default_factory=lambda: GUAR)
    sigma3: float = 1000.0
    sigma1: float = 2000.0
    injection_velocity: float = 5.0e-4
    inlet_ramp_time: float = 0.02      # s; linear spin-up of the inlet speed
    wellbore_width: float = 0.05
    dt_dem: float = 1.0e-5
    dt_cfd: float = 1.0e-4
    grid_cells: tuple[int, int, int] = (60, 30, 1)
    end_time: float = 1.0
    rng_seed: int = 12345
    # exposed solver / preparation knobs
    gravity: float = 0.0               # magnitude along -y; 0 for the horizontal cell
    alpha_min: float = 0.2             # voidfraction floor
    servo_gain: float = 5.0e-7         # m / (Pa s)
    series_interval: int = 10          # CFD steps between time-series samples
    snapshot_times: tuple[float, ...] = ()
    # analysis constants (calibration values, pinned by regression tests)
    permeability_override: float = 0.0  # m^2; 0 -> Kozeny-Carman estimate
    bond_break_fraction: float = 0.01
    channel_voidfraction: float = 0.7
    channel_min_cells: int = 5

    @property
    def n_sub(self) -> int:
        return int(round(self.dt_cfd / self.dt_dem))

    @property
    def cell_size(self) -> tuple[float, float, float]:
        ex, ey, ez = self.domain_extent
        nx, ny, nz = self.grid_cells
        return (ex / nx, ey / ny, ez / nz)

    @property
    def particle_volume(self) -> float:
        return (4.0 / 3.0) * math.pi * self.particle_radius**3

    @property
    def particle_mass(self) -> float:
        return self.material.density * self.particle_volume


def rayleigh_timestep(radius: float, material: MaterialParams) -> float:
    """Rayleigh critical time step for explicit DEM integration.

    dt_R = pi r sqrt(rho / G) / (0.1631 nu + 0.8766), G = E / (2 (1 + nu)).
    """
    g = material.shear_modulus
    return (math.pi * radius * math.sqrt(material.density / g)
            / (0.1631 * material.poisson_ratio + 0.8766))


def validate_config(cfg: SimulationConfig) -> list[str]:
    """Check every config invariant; return a complete list of violations.

    An empty list means the config is usable as-is.
    """
    errors = []

    def check(ok, path, value, rule):
        if not ok:
            errors.append(f"{path} = {value!r}: {rule}")

    m = cfg.material
    check(m.density > 0, "material.density", m.density, "must be > 0")
    check(0.0 <= m.poisson_ratio < 0.5, "material.poisson_ratio",
          m.poisson_ratio, "must be in [0, 0.5)")
    check(m.youngs_modulus > 0, "material.youngs_modulus",
          m.youngs_modulus, "must be > 0")
    check(m.friction_coefficient >= 0, "material.friction_coefficient",
          m.friction_coefficient, "must be >= 0")
    check(m.surface_energy_density >= 0, "material.surface_energy_density",
          m.surface_energy_density, "must be >= 0")
    check(0.0 < m.restitution <= 1.0, "material.restitution",
          m.restitution, "must be in (0, 1]")

    rh = cfg.rheology
    check(rh.consistency_index > 0, "fluid.consistency_index",
          rh.consistency_index, "must be > 0")
    check(0.0 < rh.flow_behavior_index <= 1.0, "fluid.flow_behavior_index",
          rh.flow_behavior_index,
          "flow_behavior_index out of range (shear-thickening n > 1 unsupported)")

    check(cfg.fluid_density > 0, "fluid.density", cfg.fluid_density, "must be > 0")
    check(all(e > 0 for e in cfg.domain_extent), "domain.extent",
          cfg.domain_extent, "all extents must be > 0")
    check(cfg.particle_radius > 0, "domain.particle_radius",
          cfg.particle_radius, "must be > 0")
    check(cfg.sigma3 > 0, "stresses.sigma3", cfg.sigma3, "must be > 0")
    check(cfg.sigma1 > 0, "stresses.sigma1", cfg.sigma1, "must be > 0")
    check(cfg.injection_velocity >= 0, "injection.velocity",
          cfg.injection_velocity, "must be >= 0")
    check(0.0 < cfg.wellbore_width <= cfg.domain_extent[1],
          "domain.wellbore_width", cfg.wellbore_width,
          "must be positive and fit the inlet face")
    check(cfg.dt_dem > 0, "time.dt_dem", cfg.dt_dem, "must be > 0")
    check(cfg.dt_cfd > 0, "time.dt_cfd", cfg.dt_cfd, "must be > 0")
    check(cfg.end_time > 0, "time.end_time", cfg.end_time, "must be > 0")
    check(cfg.inlet_ramp_time >= 0, "time.inlet_ramp_time",
          cfg.inlet_ramp_time, "must be >= 0")
    check(0.0 < cfg.alpha_min < 1.0, "fluid.alpha_min", cfg.alpha_min,
          "must be in (0, 1)")
    check(cfg.servo_gain > 0, "stresses.servo_gain", cfg.servo_gain, "must be > 0")
    check(cfg.series_interval >= 1, "output.series_interval",
          cfg.series_interval, "must be >= 1")

    if cfg.dt_dem > 0 and cfg.dt_cfd > 0:
        ratio = cfg.dt_cfd / cfg.dt_dem
        check(abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1,
              "time.dt_cfd", cfg.dt_cfd,
              f"sub-cycle ratio not integral (dt_cfd/dt_dem = {ratio})")

    nx, ny, nz = cfg.grid_cells
    check(nx >= 1 and ny >= 1 and nz == 1, "domain.grid_cells", cfg.grid_cells,
          "grid must be nx x ny x 1 (pseudo-2D, single cell across thickness)")
    if all(e > 0 for e in cfg.domain_extent) and nx >= 1 and ny >= 1:
        d = 2.0 * cfg.particle_radius
        hx, hy, _ = cfg.cell_size
        check(min(hx, hy) >= 3.0 * d - 1e-12, "domain.grid_cells", cfg.grid_cells,
              f"grid cell edge {min(hx, hy):g} below 3 particle diameters {3*d:g} "
              "(unresolved-coupling validity)")

    return errors


def rayleigh_warning(cfg: SimulationConfig) -> str | None:
    """Warn (do not reject) when dt_dem exceeds 0.3 of the Rayleigh step."""
    dt_r = rayleigh_timestep(cfg.particle_radius, cfg.material)
    if cfg.dt_dem > 0.3 * dt_r:
        return (f"dt_dem = {cfg.dt_dem:g} s exceeds 0.3 * Rayleigh step "
                f"({0.3 * dt_r:g} s); explicit integration may be unstable")
    return None


# ---------------------------------------------------------------------------
# Config file I/O

_SCHEMA = {
    "domain": ["extent_x", "extent_y", "extent_z", "particle_radius",
               "particle_count_target", "wellbore_width",
               "grid_nx", "grid_ny", "grid_nz", "rng_seed", "gravity"],
    "material": ["density", "poisson_ratio", "youngs_modulus",
                 "friction_coefficient", "surface_energy_density", "restitution"],
    "fluid": ["density", "consistency_index", "flow_behavior_index", "alpha_min"],
    "stresses": ["sigma3", "sigma1", "servo_gain"],
    "injection": ["velocity", "ramp_time"],
    "time": ["dt_dem", "dt_cfd", "end_time"],
    "output": ["series_interval", "snapshot_times"],
    "analysis": ["permeability", "bond_break_fraction",
                 "channel_voidfraction", "channel_min_cells"],
}


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration files."""


def config_to_text(cfg: SimulationConfig) -> str:
    """Serialize a config to the INI schema; floats use repr (round-trip exact)."""
    ex, ey, ez = cfg.domain_extent
    nx, ny, nz = cfg.grid_cells
    m = cfg.material
    sections = {
        "domain": {
            "extent_x": repr(ex), "extent_y": repr(ey), "extent_z": repr(ez),
            "particle_radius": repr(cfg.particle_radius),
            "particle_count_target": str(cfg.particle_count_target),
            "wellbore_width": repr(cfg.wellbore_width),
            "grid_nx": str(nx), "grid_ny": str(ny), "grid_nz": str(nz),
            "rng_seed": str(cfg.rng_seed),
            "gravity": repr(cfg.gravity),
        },
        "material": {
            "density": repr(m.density),
            "poisson_ratio": repr(m.poisson_ratio),
            "youngs_modulus": repr(m.youngs_modulus),
            "friction_coefficient": repr(m.friction_coefficient),
            "surface_energy_density": repr(m.surface_energy_density),
            "restitution": repr(m.restitution),
        },
        "fluid": {
            "density": repr(cfg.fluid_density),
            "consistency_index": repr(cfg.rheology.consistency_index),
            "flow_behavior_index": repr(cfg.rheology.flow_behavior_index),
            "alpha_min": repr(cfg.alpha_min),
        },
        "stresses": {
            "sigma3": repr(cfg.sigma3),
            "sigma1": repr(cfg.sigma1),
            "servo_gain": repr(cfg.servo_gain),
        },
        "injection": {"velocity": repr(cfg.injection_velocity),
                      "ramp_time": repr(cfg.inlet_ramp_time)},
        "time": {
            "dt_dem": repr(cfg.dt_dem),
            "dt_cfd": repr(cfg.dt_cfd),
            "end_time": repr(cfg.end_time),
        },
        "output": {
            "series_interval": str(cfg.series_interval),
            "snapshot_times": " ".join(repr(t) for t in cfg.snapshot_times),
        },
        "analysis": {
            "permeability": repr(cfg.permeability_override),
            "bond_break_fraction": repr(cfg.bond_break_fraction),
            "channel_voidfraction": repr(cfg.channel_voidfraction),
            "channel_min_cells": str(cfg.channel_min_cells),
        },
    }
    out = io.StringIO()
    for name, kv in sections.items():
        out.write(f"[{name}]\n")
        for k, v in kv.items():
            out.write(f"{k} = {v}\n")
        out.write("\n")
    return out.getvalue()


def config_from_text(text: str) -> SimulationConfig:
    """Parse the INI schema. Unknown sections/keys raise ConfigError.

    Missing keys fall back to the defaults of SimulationConfig, except that
    sigma1 defaults to 2 * sigma3 when absent.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    base = SimulationConfig()

    def get(section, key, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
        return default

    ex = get("domain", "extent_x", float, base.domain_extent[0])
    ey = get("domain", "extent_y", float, base.domain_extent[1])
    ez = get("domain", "extent_z", float, base.domain_extent[2])
    nx = get("domain", "grid_nx", int, base.grid_cells[0])
    ny = get("domain", "grid_ny", int, base.grid_cells[1])
    nz = get("domain", "grid_nz", int, base.grid_cells[2])

    material = MaterialParams(
        density=get("material", "density", float, base.material.density),
        poisson_ratio=get("material", "poisson_ratio", float,
                          base.material.poisson_ratio),
        youngs_modulus=get("material", "youngs_modulus", float,
                           base.material.youngs_modulus),
        friction_coefficient=get("material", "friction_coefficient", float,
                                 base.material.friction_coefficient),
        surface_energy_density=get("material", "surface_energy_density", float,
                                   base.material.surface_energy_density),
        restitution=get("material", "restitution", float,
                        base.material.restitution),
    )
    rheology = RheologyModel(
        consistency_index=get("fluid", "consistency_index", float,
                              base.rheology.consistency_index),
        flow_behavior_index=get("fluid", "flow_behavior_index", float,
                                base.rheology.flow_behavior_index),
    )
    sigma3 = get("stresses", "sigma3", float, base.sigma3)
    sigma1 = get("stresses", "sigma1", float, 2.0 * sigma3)

    snap_raw = get("output", "snapshot_times", str, "")
    snapshot_times = tuple(float(tok) for tok in snap_raw.split())

    return SimulationConfig(
        domain_extent=(ex, ey, ez),
        particle_radius=get("domain", "particle_radius", float,
                            base.particle_radius),
        particle_count_target=get("domain", "particle_count_target", int,
                                  base.particle_count_target),
        material=material,
        fluid_density=get("fluid", "density", float, base.fluid_density),
        rheology=rheology,
        sigma3=sigma3,
        sigma1=sigma1,
        injection_velocity=get("injection", "velocity", float,
                               base.injection_velocity),
        inlet_ramp_time=get("injection", "ramp_time", float,
                            base.inlet_ramp_time),
        wellbore_width=get("domain", "wellbore_width", float,
                           base.wellbore_width),
        dt_dem=get("time", "dt_dem", float, base.dt_dem),
        dt_cfd=get("time", "dt_cfd", float, base.dt_cfd),
        grid_cells=(nx, ny, nz),
        end_time=get("time", "end_time", float, base.end_time),
        rng_seed=get("domain", "rng_seed", int, base.rng_seed),
        gravity=get("domain", "gravity", float, base.gravity),
        alpha_min=get("fluid", "alpha_min", float, base.alpha_min),
        servo_gain=get("stresses", "servo_gain", float, base.servo_gain),
        series_interval=get("output", "series_interval", int,
                            base.series_interval),
        snapshot_times=snapshot_times,
        permeability_override=get("analysis", "permeability", float,
                                  base.permeability_override),
        bond_break_fraction=get("analysis", "bond_break_fraction", float,
                                base.bond_break_fraction),
        channel_voidfraction=get("analysis", "channel_voidfraction", float,
                                 base.channel_voidfraction),
        channel_min_cells=get("analysis", "channel_min_cells", int,
                              base.channel_min_cells),
    )


def load_config(path) -> SimulationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read())


def config_hash(cfg: SimulationConfig) -> str:
    return hashlib.sha256(config_to_text(cfg).encode()).hexdigest()


def with_overrides(cfg: SimulationConfig, **kwargs) -> SimulationConfig:
    """Dataclass replace() passthrough, kept for sweep manifests."""
    return replace(cfg, **kwargs)
