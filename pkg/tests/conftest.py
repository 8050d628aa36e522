"""Shared fixtures: the desk-scale experiment matrix with on-disk caching.

Simulation runs are expensive (minutes each), so completed run records
are cached under tests/_cache keyed by the config hash; a cache entry is
only reused when the config that produced it hashes identically.
"""

import os
from pathlib import Path

import pytest

import granufrac.cli as cli
from granufrac.config import (GUAR, WATER, XG, MaterialParams,
                              SimulationConfig, config_hash, config_to_text)
from granufrac import io as gio

CACHE = Path(__file__).resolve().parent / "_cache"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running verification")


# -- desk-scale experiment matrix (single source of truth) -------------------

def injection_config(rheology, velocity, sigma3, youngs_modulus):
    """Desk-scale injection experiment (~670 grains, 0.3 s).

    The very shear-thinning XG needs the smaller fluid step to converge.
    """
    dt_cfd = 1.0e-4 if rheology is XG else 2.0e-4
    return SimulationConfig(
        domain_extent=(0.08, 0.04, 0.002), particle_radius=0.001,
        particle_count_target=800,
        material=MaterialParams(youngs_modulus=youngs_modulus,
                                surface_energy_density=0.1),
        fluid_density=1000.0, rheology=rheology, sigma3=sigma3,
        sigma1=2.0 * sigma3, injection_velocity=velocity,
        wellbore_width=0.02, servo_gain=2.0e-6, dt_dem=2.0e-5,
        dt_cfd=dt_cfd, grid_cells=(12, 6, 1), end_time=0.3, rng_seed=7,
        series_interval=5, channel_min_cells=2, bond_break_fraction=0.007)


def permeability_config(sigma3):
    """Desk-scale Darcy measurement: water, whole-face inflow."""
    return SimulationConfig(
        domain_extent=(0.08, 0.04, 0.002), particle_radius=0.001,
        particle_count_target=800,
        material=MaterialParams(youngs_modulus=1.0e6,
                                surface_energy_density=1.0),
        fluid_density=1000.0, rheology=WATER, sigma3=sigma3,
        sigma1=2.0 * sigma3, injection_velocity=1.0e-3,
        wellbore_width=0.02, servo_gain=2.0e-6, dt_dem=2.0e-5,
        dt_cfd=2.0e-4, grid_cells=(12, 6, 1), end_time=0.3, rng_seed=7,
        series_interval=5)


def small_config(**overrides):
    """A reduced bed (~200 grains) that settles in a few seconds."""
    from granufrac.config import with_overrides
    cfg = SimulationConfig(
        domain_extent=(0.04, 0.02, 0.002), particle_radius=0.001,
        particle_count_target=200,
        material=MaterialParams(youngs_modulus=1.0e7,
                                surface_energy_density=0.1),
        fluid_density=1000.0, rheology=GUAR, sigma3=1500.0, sigma1=3000.0,
        injection_velocity=0.4, wellbore_width=0.01, servo_gain=2.0e-6,
        dt_dem=2.0e-5, dt_cfd=2.0e-4, grid_cells=(6, 3, 1), end_time=0.1,
        rng_seed=11, series_interval=5)
    return with_overrides(cfg, **overrides) if overrides else cfg


INJECTION_MATRIX = {
    # name: (rheology, velocity, sigma3, youngs_modulus)
    "c7_g_u04_s500_E1e6":  (GUAR, 0.40, 500.0, 1.0e6),
    "c7_g_u04_s1000_E1e6": (GUAR, 0.40, 1000.0, 1.0e6),
    "c7_g_u04_s1500_E1e6": (GUAR, 0.40, 1500.0, 1.0e6),
    "c8_x_u04_s500_E1e6":  (XG, 0.40, 500.0, 1.0e6),
    "c8_x_u04_s1000_E1e6": (XG, 0.40, 1000.0, 1.0e6),
    "c8_x_u04_s1500_E1e6": (XG, 0.40, 1500.0, 1.0e6),
    "c8_g_u04_s500_E1e7":  (GUAR, 0.40, 500.0, 1.0e7),
    "c8_x_u04_s500_E1e7":  (XG, 0.40, 500.0, 1.0e7),
    "c9_g_u003_s1000_E1e6": (GUAR, 0.03, 1000.0, 1.0e6),
    "c9_g_u003_s1500_E1e6": (GUAR, 0.03, 1500.0, 1.0e6),
    "c9_x_u003_s1000_E1e6": (XG, 0.03, 1000.0, 1.0e6),
    "c9_x_u003_s1500_E1e6": (XG, 0.03, 1500.0, 1.0e6),
}

# criteria-map sweep: 2 fluids x 2 rates x 2 stresses, all at E = 1 MPa
CRITERIA_SWEEP = [
    "c9_g_u003_s1000_E1e6", "c9_g_u003_s1500_E1e6",
    "c7_g_u04_s1000_E1e6", "c7_g_u04_s1500_E1e6",
    "c9_x_u003_s1000_E1e6", "c9_x_u003_s1500_E1e6",
    "c8_x_u04_s1000_E1e6", "c8_x_u04_s1500_E1e6",
]
PERMEABILITY_SIGMAS = (500.0, 1000.0, 1500.0)


def _write_config(cfg, name):
    CACHE.mkdir(exist_ok=True)
    path = CACHE / f"{name}.ini"
    path.write_text(config_to_text(cfg))
    return path


def _pack_tag(sigma3, youngs_modulus, mode):
    e = f"{youngs_modulus:.0e}"
    return (f"pk_{mode[:4]}_s{int(sigma3)}_E{e}")


def packing_dir(sigma3, youngs_modulus, mode):
    """Prepare (or load) a cached packing for the given stress state."""
    if mode == "injection":
        cfg = injection_config(GUAR, 0.4, sigma3, youngs_modulus)
    else:
        cfg = permeability_config(sigma3)
    tag = _pack_tag(sigma3, youngs_modulus, mode)
    out = CACHE / "packs" / f"{tag}-{config_hash(cfg)[:8]}"
    if not (out / "packing.json").exists():
        rc = cli.main(["pack", "--config", str(_write_config(cfg, tag)),
                       "--out", str(out), "--mode", mode])
        assert rc == 0, f"packing {tag} failed"
    return out


def injection_record(name):
    """Run (or load) one injection experiment from the matrix."""
    rheo, vel, sigma3, e = INJECTION_MATRIX[name]
    cfg = injection_config(rheo, vel, sigma3, e)
    out = CACHE / "runs" / f"{name}-{config_hash(cfg)[:8]}"
    if not (out / "record.json").exists():
        pack = packing_dir(sigma3, e, "injection")
        rc = cli.main(["inject", "--config", str(_write_config(cfg, name)),
                       "--out", str(out), "--packing", str(pack)])
        assert rc == 0, f"injection run {name} failed"
    return gio.load_run_record(out)


def permeability_record(sigma3):
    name = f"c6_perm_s{int(sigma3)}"
    cfg = permeability_config(sigma3)
    out = CACHE / "runs" / f"{name}-{config_hash(cfg)[:8]}"
    if not (out / "record.json").exists():
        pack = packing_dir(sigma3, 1.0e6, "permeability")
        rc = cli.main(["permeability", "--config",
                       str(_write_config(cfg, name)),
                       "--out", str(out), "--packing", str(pack)])
        assert rc == 0, f"permeability run {name} failed"
    return gio.load_run_record(out)


@pytest.fixture(scope="session")
def injection_runs():
    return {name: injection_record(name) for name in INJECTION_MATRIX}


@pytest.fixture(scope="session")
def permeability_runs():
    return {s: permeability_record(s) for s in PERMEABILITY_SIGMAS}
