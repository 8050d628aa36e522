"""Two-way particle-fluid exchange and the sub-cycled time loop.

Per outer (fluid) step: voidfraction + viscosity update, one implicit
fluid solve, N_sub DEM sub-steps against frozen fluid fields, then
momentum-source accumulation for the next fluid solve. The fluid force
on a particle is drag + (-grad p) V_p + (div tau) V_p + Archimedes;
only the drag is mirrored back onto the grid (model A bookkeeping: the
resolved pressure/viscous terms already act on the mixture).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cfd import (FluidGrid, FluidSolverError, compute_voidfraction,
                  deposit_particle_field, solve_fluid_step, INLET)
from .config import RheologyModel, SimulationConfig
from .dem import DemEngine
from .rheology import SHEAR_RATE_FLOOR, fcm_factor


@dataclass
class FluidSample:
    """Fluid state interpolated at particle centers (arrays over particles)."""

    velocity: np.ndarray       # (N, 2)
    pressure_gradient: np.ndarray  # (N, 2)
    tau_divergence: np.ndarray     # (N, 2)
    voidfraction: np.ndarray   # (N,)
    viscosity: np.ndarray      # (N,)


def sample_fluid_at_particles(grid: FluidGrid,
                              positions: np.ndarray) -> FluidSample:
    """Bilinear interpolation of cell-centered fields at particle centers.

    Coordinates are clamped to the cell-center hull (zero-gradient
    extrapolation in the half-cell rim); fully out-of-domain particles
    raise ValueError.
    """
    x, y = positions[:, 0], positions[:, 1]
    bad = ((x < 0) | (x > grid.extent[0]) | (y < 0) | (y > grid.extent[1]))
    if bad.any():
        ids = np.nonzero(bad)[0]
        raise ValueError(f"particles outside fluid domain: ids "
                         f"{ids[:5].tolist()}")
    fx = np.clip(x / grid.hx - 0.5, 0.0, grid.nx - 1.0)
    fy = np.clip(y / grid.hy - 0.5, 0.0, grid.ny - 1.0)
    i0 = np.minimum(fx.astype(int), grid.nx - 2) if grid.nx > 1 \
        else np.zeros(len(fx), dtype=int)
    j0 = np.minimum(fy.astype(int), grid.ny - 2) if grid.ny > 1 \
        else np.zeros(len(fy), dtype=int)
    tx = fx - i0
    ty = fy - j0
    i1 = np.minimum(i0 + 1, grid.nx - 1)
    j1 = np.minimum(j0 + 1, grid.ny - 1)

    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty

    def interp(f):
        return (w00 * f[i0, j0] + w10 * f[i1, j0]
                + w01 * f[i0, j1] + w11 * f[i1, j1])

    gpx, gpy = grid.pressure_gradient()
    tdx, tdy = grid.tau_divergence()
    return FluidSample(
        velocity=np.column_stack((interp(grid.u), interp(grid.v))),
        pressure_gradient=np.column_stack((interp(gpx), interp(gpy))),
        tau_divergence=np.column_stack((interp(tdx), interp(tdy))),
        voidfraction=interp(grid.alpha),
        viscosity=interp(grid.mu))


# ---------------------------------------------------------------------------
# vectorized drag closures (same math as rheology.py scalar forms)

# slip-speed floor for the linearized drag conductance: the power-law
# coefficient |w|^(n-1) diverges as slip -> 0 for n < 1
SLIP_FLOOR = 1.0e-8

# Temporal blending weight for the deposited voidfraction field inside
# the coupled loop (1.0 = no smoothing).  See run_coupled.
ALPHA_SMOOTHING = 0.5


def _drag_cm(w, alpha, rheology, d, v_p):
    """Christopher-Middleman packed-bed drag, vectorized over particles.

    Returns (force (N,2), linearized conductance c (N,) with
    f = c * w evaluated at the slip-floored speed)."""
    n = rheology.flow_behavior_index
    k = rheology.consistency_index
    speed = np.sqrt(np.einsum("ij,ij->i", w, w))
    spd = np.where(speed > 0.0, speed, 1.0)
    fcm = np.where(
        alpha >= 1.0, 0.0,
        (150.0 / 12.0) * (9.0 + 3.0 / n) ** n
        * alpha ** (2.0 * (1.0 - n)) * (1.0 - alpha) ** n)
    pref = fcm * k * (1.0 - alpha) * v_p / (d ** (n + 1.0) * alpha)
    coeff = np.where(speed > 0.0, pref * spd ** (n - 1.0), 0.0)
    c_lin = pref * np.maximum(speed, SLIP_FLOOR) ** (n - 1.0)
    return coeff[:, None] * w, c_lin


def _drag_difelice(w, alpha, rho, rheology, d):
    """Di Felice voidage-corrected sphere drag, vectorized (Newtonian)."""
    mu = rheology.consistency_index
    speed = np.sqrt(np.einsum("ij,ij->i", w, w))
    spd = np.maximum(speed, SLIP_FLOOR)
    re = rho * d * spd / mu
    cd = (0.63 + 4.8 / np.sqrt(re)) ** 2
    chi = 3.7 - 0.65 * np.exp(-0.5 * (1.5 - np.log10(re)) ** 2)
    c_lin = 0.5 * cd * rho * (np.pi * d**2 / 4.0) * spd * alpha ** (-chi)
    coeff = np.where(speed > 0.0, c_lin, 0.0)
    return coeff[:, None] * w, c_lin


def particle_fluid_force(sample: FluidSample, velocities: np.ndarray,
                         cfg: SimulationConfig,
                         drag_model: str = "cm") -> dict:
    """Eq.-(2b) fluid force per particle; all terms reported separately.

    Returns dict with "drag", "pressure", "viscous", "archimedes" and
    "total", each (N, 2) in the grid plane.
    """
    if np.any(sample.voidfraction <= 0.0):
        raise ValueError("cell fully solid: voidfraction <= 0")
    w = sample.velocity - velocities[:, :2]
    d = 2.0 * cfg.particle_radius
    v_p = cfg.particle_volume
    if drag_model == "cm":
        drag, c_lin = _drag_cm(w, sample.voidfraction, cfg.rheology, d, v_p)
    elif drag_model == "difelice":
        if cfg.rheology.flow_behavior_index != 1.0:
            raise ValueError("Di Felice drag requires Newtonian rheology")
        drag, c_lin = _drag_difelice(w, sample.voidfraction,
                                     cfg.fluid_density, cfg.rheology, d)
    else:
        raise ValueError(f"unknown drag model {drag_model!r}")
    pressure = -sample.pressure_gradient * v_p
    viscous = sample.tau_divergence * v_p
    # gravity acts along -y when enabled; Archimedes is its hydrostatic
    # counterpart and vanishes with gravity off (the pseudo-2D default)
    archimedes = np.zeros_like(drag)
    archimedes[:, 1] = cfg.fluid_density * v_p * cfg.gravity
    return {"drag": drag, "drag_coeff": c_lin, "pressure": pressure,
            "viscous": viscous, "archimedes": archimedes,
            "total": drag + pressure + viscous + archimedes}


def accumulate_sources(grid: FluidGrid, positions: np.ndarray,
                       radius: float, drag: np.ndarray) -> np.ndarray:
    """Distribute -f_drag onto the grid (N/m^3) with the same deposition
    weights as the voidfraction assignment. Overwrites grid.src.
    Action-reaction: sum(src * V) == -sum(drag) to roundoff."""
    grid.src = deposit_particle_field(grid, positions, radius,
                                      -drag / grid.vol)
    return grid.src


def accumulate_exchange(grid: FluidGrid, positions: np.ndarray,
                        radius: float, coeff: np.ndarray,
                        velocities: np.ndarray) -> None:
    """Distribute the linearized drag onto the grid for semi-implicit
    treatment: per-cell conductance C = sum(c_i)/dV and particle-velocity
    source sum(c_i v_i)/dV, so the fluid feels C (v_p - u) with the NEW
    fluid velocity. Same 8-point weights as the voidfraction assignment.
    Overwrites grid.drag_coeff / grid.drag_u (grid.src is untouched and
    reserved for prescribed sources)."""
    vals = np.column_stack((coeff, coeff[:, None] * velocities[:, :2]))
    dep = deposit_particle_field(grid, positions, radius, vals / grid.vol)
    grid.drag_coeff = dep[:, :, 0]
    grid.drag_u = dep[:, :, 1:]


def injection_pressure(grid: FluidGrid) -> float:
    """Area-weighted mean pressure over inlet-adjacent cells."""
    cells = []
    cells.append(grid.p[-1, grid.bc_xhi == INLET])
    cells.append(grid.p[0, grid.bc_xlo == INLET])
    cells.append(grid.p[grid.bc_ylo == INLET, 0])
    cells.append(grid.p[grid.bc_yhi == INLET, -1])
    vals = np.concatenate(cells)
    if vals.size == 0:
        return 0.0
    return float(vals.mean())


@dataclass
class CoupledSeries:
    """Time series emitted by the coupled loop."""

    time: list = field(default_factory=list)
    injection_pressure: list = field(default_factory=list)
    broken_bonds: list = field(default_factory=list)
    wall_stress: list = field(default_factory=list)      # (6,) per sample
    kinetic_energy: list = field(default_factory=list)
    max_inlet_shear_rate: float = 0.0

    def as_arrays(self) -> dict:
        return {"time": np.array(self.time),
                "injection_pressure": np.array(self.injection_pressure),
                "broken_bonds": np.array(self.broken_bonds, dtype=int),
                "wall_stress": np.array(self.wall_stress),
                "kinetic_energy": np.array(self.kinetic_energy)}


def run_coupled(cfg: SimulationConfig, engine: DemEngine, grid: FluidGrid,
                drag_model: str = "cm", servo: bool = True,
                snapshot_callback=None, end_time: float | None = None,
                progress=None) -> CoupledSeries:
    """Sub-cycled coupled loop from engine.time to end_time.

    snapshot_callback(step_index, time, engine, grid) fires at the
    configured snapshot times (nearest outer step, each time once).
    """
    if end_time is None:
        end_time = cfg.end_time
    n_sub = cfg.n_sub
    dt_cfd, dt_dem = cfg.dt_cfd, cfg.dt_dem
    n_outer = max(int(round((end_time - engine.time) / dt_cfd)), 0)
    snap_left = sorted(cfg.snapshot_times)
    series = CoupledSeries()

    # linear spin-up of the prescribed inlet speed: an impulsively
    # started inlet in an incompressible solver lands the whole
    # steady pressure field on the bed in one step
    ramp_targets = [grid.val_xlo.copy(), grid.val_xhi.copy(),
                    grid.val_ylo.copy(), grid.val_yhi.copy()]

    def _apply_ramp(t_now):
        if cfg.inlet_ramp_time <= 0.0 or t_now >= cfg.inlet_ramp_time:
            f = 1.0
        else:
            f = t_now / cfg.inlet_ramp_time
        grid.val_xlo = ramp_targets[0] * f
        grid.val_xhi = ramp_targets[1] * f
        grid.val_ylo = ramp_targets[2] * f
        grid.val_yhi = ramp_targets[3] * f

    grid.alpha = compute_voidfraction(
        engine.pos, engine.radius, grid, cfg.alpha_min,
        cfg.particle_volume)
    grid.alpha_old = grid.alpha.copy()

    for step in range(n_outer):
        grid.alpha_old = grid.alpha
        # Blend the freshly deposited voidfraction with the previous
        # field.  The incompressible solver converts d(alpha)/dt
        # directly into pressure, so feeding it the raw per-step
        # deposition lets particle jitter and pressure feedback ring
        # against each other; the EMA damps that loop while leaving
        # the converged (steady) voidfraction untouched.
        raw = compute_voidfraction(
            engine.pos, engine.radius, grid, cfg.alpha_min,
            cfg.particle_volume)
        grid.alpha = (ALPHA_SMOOTHING * raw
                      + (1.0 - ALPHA_SMOOTHING) * grid.alpha_old)
        _apply_ramp(engine.time + dt_cfd)
        solve_fluid_step(grid, dt_cfd, rheology=cfg.rheology)

        forces = None
        for _ in range(n_sub):
            sample = sample_fluid_at_particles(grid, engine.pos)
            forces = particle_fluid_force(sample, engine.vel, cfg,
                                          drag_model)
            # Shear-thinning drag stiffens without bound as slip -> 0
            # (conductance ~ |w|^(n-1)), so an explicitly applied drag
            # force overshoots the equilibrium slip whenever
            # c * dt / m > 1.  Scaling the drag by m / (m + c * dt)
            # is the linearised implicit update and keeps the substep
            # stable for arbitrarily stiff drag.
            scale = engine.mass / (engine.mass
                                   + forces["drag_coeff"] * dt_dem)
            ext = np.zeros_like(engine.pos)
            ext[:, :2] = (forces["drag"] * scale[:, None]
                          + forces["pressure"] + forces["viscous"]
                          + forces["archimedes"])
            engine.step(dt_dem, ext_force=ext, servo=servo)
        accumulate_exchange(grid, engine.pos, engine.radius,
                            forces["drag_coeff"], engine.vel)

        t = engine.time
        series.max_inlet_shear_rate = max(
            series.max_inlet_shear_rate,
            float(grid.shear_rate()[-1].max()), SHEAR_RATE_FLOOR)
        if step % cfg.series_interval == 0 or step == n_outer - 1:
            series.time.append(t)
            series.injection_pressure.append(injection_pressure(grid))
            series.broken_bonds.append(engine.broken_bond_count)
            series.wall_stress.append(
                [engine.walls.measured_stress(w) for w in range(6)])
            series.kinetic_energy.append(engine.kinetic_energy())
        while snap_left and t >= snap_left[0] - 0.5 * dt_cfd:
            snap_left.pop(0)
            if snapshot_callback is not None:
                snapshot_callback(step, t, engine, grid)
        if progress is not None:
            progress(step, n_outer, t)
    return series
