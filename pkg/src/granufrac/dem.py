"""Discrete-element engine: neighbor management, cohesive contact forces,
bond bookkeeping, explicit time integration and stress-controlled walls.

Particles are monodisperse spheres of a single material; the bed lives in
an axis-aligned box bounded by six walls (index 2*axis + side, side 0 =
low coordinate). Servo walls move along their normal to hold a target
stress; all walls are frictionless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .config import MaterialParams, SimulationConfig
from .contact import ContactLaw

SERVO_VELOCITY_CAP = 1.0e-2   # m/s
SERVO_DEADBAND = 0.02         # relative stress tolerance at equilibrium
STRESS_SMOOTHING = 0.02       # EMA factor for the servo stress estimate


class SimulationBlowup(RuntimeError):
    """Raised when particle state goes NaN or exceeds the velocity guard."""


@dataclass
class Contact:
    """Inspection-level view of one contact (spec-facing)."""

    particle_i: int
    particle_j: int            # -1..-6 encodes wall index -(w+1)
    normal_overlap: float
    tangential_displacement: np.ndarray
    is_bonded: bool


def _law_array(law: ContactLaw) -> np.ndarray:
    return np.array([law.kn, law.w_adh, law.c1, law.fa, law.fb, law.a_c,
                     law.a_f, law.delta_c, law.damp_pref, law.kt_pref,
                     law.mu_fric, law.r_eff])


class WallSet:
    """Six planar walls; fixed or servo(target stress) per wall."""

    def __init__(self, extent):
        self.pos = np.array([0.0, extent[0], 0.0, extent[1], 0.0, extent[2]])
        self.vel = np.zeros(6)
        self.mode = ["fixed"] * 6
        self.target = np.zeros(6)
        self.stress_ema = np.zeros(6)
        self.gain = 1.0e-7
        # travel limits per wall; servo motion never takes a wall outside
        # [pos_min, pos_max] (used to keep walls inside the fluid grid)
        self.pos_min = np.full(6, -np.inf)
        self.pos_max = np.full(6, np.inf)

    def set_servo(self, index: int, target_stress: float):
        self.mode[index] = "servo"
        self.target[index] = target_stress
        # start the stress estimate at the target so a freshly armed servo
        # does not lurch before the EMA has built up
        self.stress_ema[index] = target_stress

    def area(self, index: int) -> float:
        axis = index // 2
        spans = [self.pos[2 * a + 1] - self.pos[2 * a] for a in range(3)
                 if a != axis]
        return spans[0] * spans[1]

    def measured_stress(self, index: int) -> float:
        return self.stress_ema[index]

    def servo_update(self, wall_force: np.ndarray, dt: float):
        """Advance servo walls toward their stress targets.

        wall_force holds the summed normal contact force per wall for the
        step just computed. Opposing walls never cross: motion stops at a
        small fraction of the current gap.
        """
        for w in range(6):
            stress = wall_force[w] / self.area(w)
            self.stress_ema[w] += STRESS_SMOOTHING * (stress - self.stress_ema[w])
            if self.mode[w] != "servo":
                self.vel[w] = 0.0
                continue
            err = self.target[w] - self.stress_ema[w]
            if abs(err) <= SERVO_DEADBAND * abs(self.target[w]):
                self.vel[w] = 0.0
                continue
            v = self.gain * err
            v = max(-SERVO_VELOCITY_CAP, min(SERVO_VELOCITY_CAP, v))
            # low wall advances inward with +v, high wall with -v
            self.vel[w] = v if w % 2 == 0 else -v
        self.pos += self.vel * dt
        np.clip(self.pos, self.pos_min, self.pos_max, out=self.pos)
        for a in range(3):
            lo, hi = 2 * a, 2 * a + 1
            if self.pos[lo] >= self.pos[hi]:
                mid = 0.5 * (self.pos[lo] + self.pos[hi])
                self.pos[lo] = mid - 1e-12
                self.pos[hi] = mid + 1e-12


class DemEngine:
    """Explicit DEM stepper over a monodisperse bonded bed."""

    def __init__(self, cfg: SimulationConfig, positions: np.ndarray,
                 walls: WallSet | None = None, backend=None):
        self.cfg = cfg
        self.n = positions.shape[0]
        self.pos = np.array(positions, dtype=float)
        self.vel = np.zeros_like(self.pos)
        self.omega = np.zeros_like(self.pos)
        self.radius = cfg.particle_radius
        self.mass = cfg.particle_mass
        self.inertia = 0.4 * self.mass * self.radius**2
        self.material = cfg.material

        self.pp_law = _law_array(ContactLaw.build(
            cfg.material, self.radius, self.mass, self.radius, self.mass))
        self.pw_law = _law_array(ContactLaw.build(
            cfg.material, self.radius, self.mass, frictionless=True))

        self.walls = walls if walls is not None else WallSet(cfg.domain_extent)
        self.walls.gain = cfg.servo_gain

        self.kernel = backend if backend is not None else kernels.get_backend()

        # bonds as sorted int64 keys i * n + j (i < j)
        self.bond_keys = np.empty(0, dtype=np.int64)
        self.broken_bond_count = 0
        self.initial_bond_count = 0

        self.skin = 0.3 * self.radius
        self._pair_i = np.empty(0, dtype=np.int64)
        self._pair_j = np.empty(0, dtype=np.int64)
        self._bonded = np.empty(0, dtype=np.uint8)
        self._tang = np.empty((0, 3))
        self._pos_at_build = None

        self.force = np.zeros_like(self.pos)
        self.torque = np.zeros_like(self.pos)
        self.wall_force = np.zeros(6)
        self.time = 0.0
        self.velocity_guard = 10.0

    # -- bonds --------------------------------------------------------------

    def bond_pairs(self) -> np.ndarray:
        """Current bonds as an (B, 2) id array, ordered (min, max)."""
        return np.column_stack((self.bond_keys // self.n,
                                self.bond_keys % self.n))

    def bond_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        if self.bond_keys.size:
            pairs = self.bond_pairs()
            np.add.at(counts, pairs[:, 0], 1)
            np.add.at(counts, pairs[:, 1], 1)
        return counts

    def set_bonds(self, pairs: np.ndarray):
        """Install the bond set (ids ordered (min, max) per row)."""
        if len(pairs) == 0:
            self.bond_keys = np.empty(0, dtype=np.int64)
        else:
            pairs = np.asarray(pairs, dtype=np.int64)
            keys = pairs[:, 0] * self.n + pairs[:, 1]
            self.bond_keys = np.unique(keys)
        self.initial_bond_count = self.bond_keys.size
        self.broken_bond_count = 0
        self._pos_at_build = None  # force neighbor rebuild

    def bond_touching(self, tolerance: float = 1.0e-2):
        """Bond every pair closer than 2r (1 + tolerance). Used once after
        packing preparation; no bonds form during a run."""
        cutoff = 2.0 * self.radius * (1.0 + tolerance)
        tree = cKDTree(self.pos)
        pairs = tree.query_pairs(cutoff, output_type="ndarray")
        if pairs.size:
            pairs = np.sort(pairs, axis=1)
        self.set_bonds(pairs)

    # -- neighbor list ------------------------------------------------------

    def _needs_rebuild(self) -> bool:
        if self._pos_at_build is None:
            return True
        disp = np.abs(self.pos - self._pos_at_build).max()
        return disp > 0.5 * self.skin

    def _rebuild_pairs(self):
        cutoff = 2.0 * self.radius + self.skin
        tree = cKDTree(self.pos)
        cand = tree.query_pairs(cutoff, output_type="ndarray")
        if cand.size:
            cand = np.sort(cand, axis=1)
            keys = cand[:, 0].astype(np.int64) * self.n + cand[:, 1]
        else:
            keys = np.empty(0, dtype=np.int64)
        keys = np.union1d(keys, self.bond_keys)

        # carry tangential history across rebuilds
        old_keys = self._pair_i * self.n + self._pair_j
        tang = np.zeros((keys.size, 3))
        if old_keys.size:
            idx = np.searchsorted(keys, old_keys)
            ok = (idx < keys.size) & (keys[np.minimum(idx, keys.size - 1)]
                                      == old_keys)
            tang[idx[ok]] = self._tang[ok]

        self._pair_i = (keys // self.n).astype(np.int64)
        self._pair_j = (keys % self.n).astype(np.int64)
        self._bonded = np.isin(keys, self.bond_keys,
                               assume_unique=True).astype(np.uint8)
        self._tang = tang
        self._pos_at_build = self.pos.copy()

    # -- stepping -----------------------------------------------------------

    def compute_forces(self, dt: float):
        """Evaluate contact + wall forces into self.force/self.torque and
        apply bond breakage (irreversible, symmetric)."""
        if self._needs_rebuild():
            self._rebuild_pairs()
        break_mask = np.zeros(self._pair_i.size, dtype=np.uint8)
        self.kernel.compute_forces(
            self.pos, self.vel, self.omega, self.radius, dt,
            self._pair_i, self._pair_j, self._bonded, self._tang,
            self.pp_law, self.pw_law, self.walls.pos, self.walls.vel,
            self.force, self.torque, self.wall_force, break_mask)
        if break_mask.any():
            broken = np.nonzero(break_mask)[0]
            keys = self._pair_i[broken] * self.n + self._pair_j[broken]
            self.bond_keys = np.setdiff1d(self.bond_keys, keys,
                                          assume_unique=True)
            self._bonded[broken] = 0
            self.broken_bond_count += broken.size

    def step(self, dt: float, ext_force: np.ndarray | None = None,
             gravity: float = 0.0, servo: bool = True,
             damping: float = 0.0):
        """One explicit DEM sub-step (semi-implicit Euler).

        ext_force: per-particle force added to contacts (fluid coupling).
        damping: optional non-physical velocity damping factor per step,
        used only during packing preparation.
        """
        self.compute_forces(dt)
        total = self.force
        if ext_force is not None:
            total = total + ext_force
        acc = total / self.mass
        if gravity:
            acc = acc.copy()
            acc[:, 1] -= gravity
        self.vel += dt * acc
        if damping:
            self.vel *= (1.0 - damping)
            self.omega *= (1.0 - damping)
        self.omega += dt * self.torque / self.inertia
        self.pos += dt * self.vel

        # never penetrate a wall by more than one radius: clamp centers
        for a in range(3):
            np.clip(self.pos[:, a], self.walls.pos[2 * a],
                    self.walls.pos[2 * a + 1], out=self.pos[:, a])

        if servo:
            self.walls.servo_update(self.wall_force, dt)
        self.time += dt

        vmax = float(np.abs(self.vel).max(initial=0.0))
        if not np.isfinite(self.pos).all() or vmax > self.velocity_guard:
            raise SimulationBlowup(
                f"DEM state blew up at t = {self.time:g} s "
                f"(max |v| = {vmax:g} m/s)")

    # -- inspection ---------------------------------------------------------

    def kinetic_energy(self) -> float:
        return float(0.5 * self.mass * np.sum(self.vel**2)
                     + 0.5 * self.inertia * np.sum(self.omega**2))

    def detect_contacts(self) -> list[Contact]:
        """Spec-level contact listing: overlapping pairs, persisting bonds
        (any separation until broken) and overlapping wall contacts."""
        if self._needs_rebuild():
            self._rebuild_pairs()
        out = []
        d = self.pos[self._pair_j] - self.pos[self._pair_i]
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
        overlap = 2.0 * self.radius - dist
        for k in range(self._pair_i.size):
            bonded = bool(self._bonded[k])
            if overlap[k] > 0.0 or bonded:
                out.append(Contact(int(self._pair_i[k]), int(self._pair_j[k]),
                                   float(overlap[k]), self._tang[k].copy(),
                                   bonded))
        for w in range(6):
            axis, side = w // 2, w % 2
            if side == 0:
                gap = self.pos[:, axis] - self.walls.pos[w]
            else:
                gap = self.walls.pos[w] - self.pos[:, axis]
            for i in np.nonzero(self.radius - gap > 0.0)[0]:
                out.append(Contact(int(i), -(w + 1),
                                   float(self.radius - gap[i]),
                                   np.zeros(3), False))
        return out
