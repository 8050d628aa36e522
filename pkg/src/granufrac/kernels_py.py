"""Pure-numpy DEM force kernel (fallback backend).

Mirrors granufrac._core op-for-op: identical arithmetic and accumulation
order, so the two backends agree bitwise for the same inputs.

Contact-law constants are packed into 12-slot float arrays (one for
pair contacts, one for particle-wall contacts):

    [0] kn         Hertz prefactor (4/3) E* sqrt(R*)
    [1] w_adh      JKR work of adhesion (0 -> pure Hertz)
    [2] c1         sqrt(2 pi w / E*)
    [3] fa         4 E* / (3 R*)
    [4] fb         sqrt(8 pi w E*)
    [5] a_c        contact radius at pull-off
    [6] a_f        fold point of delta(a)
    [7] delta_c    pull-off separation (break below this)
    [8] damp_pref  normal dashpot prefactor
    [9] kt_pref    tangential stiffness prefactor
    [10] mu_fric   Coulomb friction coefficient
    [11] r_eff     effective radius
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _jkr_radius_vec(delta, law):
    """Fixed-count Newton for the JKR contact radius (stable branch),
    started above the root (delta(a) is convex, so monotone)."""
    c1 = law[2]
    a_c = law[5]
    r_eff = law[11]
    a = np.maximum(2.0 * a_c, np.sqrt(np.maximum(delta, 0.0) * r_eff) + a_c)
    need = a * a / r_eff - c1 * np.sqrt(a) < delta
    while np.any(need):
        a[need] *= 2.0
        need = a * a / r_eff - c1 * np.sqrt(a) < delta
    for _ in range(12):
        s = np.sqrt(a)
        f = a * a / r_eff - c1 * s - delta
        fp = 2.0 * a / r_eff - 0.5 * c1 / s
        a -= f / fp
    return a


def compute_forces(pos, vel, omega, radius, dt,
                   pair_i, pair_j, bonded, tang,
                   pp_law, pw_law,
                   wall_pos, wall_vel,
                   force, torque, wall_force, break_mask):
    """One force pass: pair + wall forces, tangential history update.

    Outputs (force, torque, wall_force, break_mask) are overwritten; tang
    is updated in place. Walls are indexed 2*axis + side (side 0 = low).
    """
    force[:] = 0.0
    torque[:] = 0.0
    wall_force[:] = 0.0
    break_mask[:] = False

    m = pair_i.shape[0]
    if m:
        d = pos[pair_j] - pos[pair_i]
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
        n = d / dist[:, None]
        delta = 2.0 * radius - dist

        w_adh = pp_law[1]
        delta_c = pp_law[7]
        bonded_b = bonded.astype(bool)
        broke = bonded_b & (delta < delta_c)
        break_mask[:] = broke
        live_bond = bonded_b & ~broke
        hertzian = ~bonded_b & (delta > 0.0)
        active = live_bond | hertzian

        fn = np.zeros(m)
        dpos = delta > 0.0
        hz = (hertzian | (live_bond & (w_adh == 0.0))) & dpos
        fn[hz] = pp_law[0] * delta[hz] * np.sqrt(delta[hz])
        if w_adh > 0.0:
            jb = live_bond
            if np.any(jb):
                a = _jkr_radius_vec(delta[jb], pp_law)
                fn[jb] = pp_law[3] * a**3 - pp_law[4] * a**1.5

        lever = radius - 0.5 * delta
        om_sum = omega[pair_i] + omega[pair_j]
        vrel = (vel[pair_i] - vel[pair_j]
                + lever[:, None] * np.cross(om_sum, n))
        vn = np.einsum("ij,ij->i", vrel, n)
        vt = vrel - vn[:, None] * n

        cn = pp_law[8] * np.where(dpos, delta, 0.0) ** 0.25
        p_norm = np.where(active, fn + cn * vn, 0.0)

        # incremental tangential spring with Coulomb cap
        kt = pp_law[9] * np.sqrt(np.where(dpos, delta, 0.0))
        ts = tang + vt * dt
        tsn = np.einsum("ij,ij->i", ts, n)
        ts = ts - tsn[:, None] * n
        ft = -kt[:, None] * ts
        ft_mag = np.sqrt(np.einsum("ij,ij->i", ft, ft))
        cap = pp_law[10] * np.abs(fn)
        over = active & (ft_mag > cap) & (kt > 0.0)
        scale = np.ones(m)
        scale[over] = cap[over] / ft_mag[over]
        ft = ft * scale[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            ts = np.where((over & (kt > 0.0))[:, None], -ft / kt[:, None], ts)
        slide = active & dpos
        tang[:] = np.where(slide[:, None], ts, 0.0)
        ft = np.where(slide[:, None], ft, 0.0)

        f_pair = -p_norm[:, None] * n + ft
        t_pair = lever[:, None] * np.cross(n, ft)
        np.add.at(force, pair_i, f_pair)
        np.add.at(force, pair_j, -f_pair)
        np.add.at(torque, pair_i, t_pair)
        np.add.at(torque, pair_j, t_pair)

    # particle-wall contacts (frictionless)
    npart = pos.shape[0]
    for wi in range(6):
        axis = wi // 2
        side = wi % 2
        if side == 0:
            gap = pos[:, axis] - wall_pos[wi]
            nw = -1.0
        else:
            gap = wall_pos[wi] - pos[:, axis]
            nw = 1.0
        deltaw = radius - gap
        idx = np.nonzero(deltaw > 0.0)[0]
        if idx.size == 0:
            continue
        dw = deltaw[idx]
        fnw = pw_law[0] * dw * np.sqrt(dw)
        vrel_n = (vel[idx, axis] - wall_vel[wi]) * nw
        cnw = pw_law[8] * dw**0.25
        p = fnw + cnw * vrel_n
        np.add.at(force, (idx, np.full(idx.size, axis)), -p * nw)
        wall_force[wi] += float(np.sum(p))
