# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled DEM force kernel (hot inner loop).

Same contract and law-array layout as granufrac.kernels_py; see that
module for documentation. Accumulation runs in pair order, matching the
fallback's unbuffered accumulation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, pow

BACKEND_NAME = "cython"


cdef double _jkr_radius(double delta, double c1, double a_c, double a_f,
                        double r_eff) nogil:
    # fixed-count Newton from above the root; delta(a) is convex right of
    # the fold a_f, so the iteration is monotone and deterministic
    cdef double a = 2.0 * a_c
    cdef double alt = sqrt((delta if delta > 0.0 else 0.0) * r_eff) + a_c
    cdef double s, f, fp
    cdef int it
    if alt > a:
        a = alt
    while a * a / r_eff - c1 * sqrt(a) < delta:
        a *= 2.0
    for it in range(12):
        s = sqrt(a)
        f = a * a / r_eff - c1 * s - delta
        fp = 2.0 * a / r_eff - 0.5 * c1 / s
        a -= f / fp
    return a


def compute_forces(double[:, ::1] pos, double[:, ::1] vel,
                   double[:, ::1] omega, double radius, double dt,
                   long[::1] pair_i, long[::1] pair_j,
                   cnp.uint8_t[::1] bonded, double[:, ::1] tang,
                   double[::1] pp_law, double[::1] pw_law,
                   double[::1] wall_pos, double[::1] wall_vel,
                   double[:, ::1] force, double[:, ::1] torque,
                   double[::1] wall_force, cnp.uint8_t[::1] break_mask):
    cdef Py_ssize_t m = pair_i.shape[0]
    cdef Py_ssize_t npart = pos.shape[0]
    cdef Py_ssize_t k, i, j, idx
    cdef int axis, side, wi
    cdef double dx, dy, dz, dist, nx, ny, nz, delta, lever
    cdef double ox, oy, oz, cx, cy, cz
    cdef double vrx, vry, vrz, vn, vtx, vty, vtz
    cdef double fn, cn, p_norm, kt, tsx, tsy, tsz, tsn
    cdef double ftx, fty, ftz, ft_mag, cap, scale, a
    cdef double gap, deltaw, nw, fnw, vrel_n, cnw, p
    cdef double kn = pp_law[0], w_adh = pp_law[1], c1 = pp_law[2]
    cdef double fa = pp_law[3], fb = pp_law[4], a_c = pp_law[5]
    cdef double a_f = pp_law[6], delta_c = pp_law[7]
    cdef double damp_pref = pp_law[8], kt_pref = pp_law[9]
    cdef double mu_fric = pp_law[10], r_eff = pp_law[11]
    cdef double kn_w = pw_law[0], damp_w = pw_law[8]
    cdef bint is_bonded, broke, hertzian, active, dpos

    force[:, :] = 0.0
    torque[:, :] = 0.0
    wall_force[:] = 0.0
    break_mask[:] = 0

    for k in range(m):
        i = pair_i[k]
        j = pair_j[k]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        dz = pos[j, 2] - pos[i, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        nx = dx / dist
        ny = dy / dist
        nz = dz / dist
        delta = 2.0 * radius - dist

        is_bonded = bonded[k] != 0
        broke = is_bonded and delta < delta_c
        if broke:
            break_mask[k] = 1
            is_bonded = False
        hertzian = (not is_bonded) and (not broke) and delta > 0.0
        if broke:
            hertzian = False
        active = is_bonded or hertzian
        dpos = delta > 0.0

        if not active:
            tang[k, 0] = 0.0
            tang[k, 1] = 0.0
            tang[k, 2] = 0.0
            continue

        if is_bonded and w_adh > 0.0:
            a = _jkr_radius(delta, c1, a_c, a_f, r_eff)
            fn = fa * a * a * a - fb * a * sqrt(a)
        elif dpos:
            fn = kn * delta * sqrt(delta)
        else:
            fn = 0.0

        lever = radius - 0.5 * delta
        ox = omega[i, 0] + omega[j, 0]
        oy = omega[i, 1] + omega[j, 1]
        oz = omega[i, 2] + omega[j, 2]
        cx = oy * nz - oz * ny
        cy = oz * nx - ox * nz
        cz = ox * ny - oy * nx
        vrx = vel[i, 0] - vel[j, 0] + lever * cx
        vry = vel[i, 1] - vel[j, 1] + lever * cy
        vrz = vel[i, 2] - vel[j, 2] + lever * cz
        vn = vrx * nx + vry * ny + vrz * nz
        vtx = vrx - vn * nx
        vty = vry - vn * ny
        vtz = vrz - vn * nz

        cn = damp_pref * pow(delta, 0.25) if dpos else 0.0
        p_norm = fn + cn * vn

        kt = kt_pref * sqrt(delta) if dpos else 0.0
        tsx = tang[k, 0] + vtx * dt
        tsy = tang[k, 1] + vty * dt
        tsz = tang[k, 2] + vtz * dt
        tsn = tsx * nx + tsy * ny + tsz * nz
        tsx -= tsn * nx
        tsy -= tsn * ny
        tsz -= tsn * nz
        ftx = -kt * tsx
        fty = -kt * tsy
        ftz = -kt * tsz
        ft_mag = sqrt(ftx * ftx + fty * fty + ftz * ftz)
        cap = mu_fric * (fn if fn >= 0.0 else -fn)
        if ft_mag > cap and kt > 0.0:
            scale = cap / ft_mag
            ftx *= scale
            fty *= scale
            ftz *= scale
            tsx = -ftx / kt
            tsy = -fty / kt
            tsz = -ftz / kt
        if dpos:
            tang[k, 0] = tsx
            tang[k, 1] = tsy
            tang[k, 2] = tsz
        else:
            tang[k, 0] = 0.0
            tang[k, 1] = 0.0
            tang[k, 2] = 0.0
            ftx = 0.0
            fty = 0.0
            ftz = 0.0

        force[i, 0] += -p_norm * nx + ftx
        force[i, 1] += -p_norm * ny + fty
        force[i, 2] += -p_norm * nz + ftz
        force[j, 0] -= -p_norm * nx + ftx
        force[j, 1] -= -p_norm * ny + fty
        force[j, 2] -= -p_norm * nz + ftz
        # torque = lever * (n x ft), same on both particles
        cx = lever * (ny * ftz - nz * fty)
        cy = lever * (nz * ftx - nx * ftz)
        cz = lever * (nx * fty - ny * ftx)
        torque[i, 0] += cx
        torque[i, 1] += cy
        torque[i, 2] += cz
        torque[j, 0] += cx
        torque[j, 1] += cy
        torque[j, 2] += cz

    for wi in range(6):
        axis = wi // 2
        side = wi % 2
        nw = -1.0 if side == 0 else 1.0
        for idx in range(npart):
            if side == 0:
                gap = pos[idx, axis] - wall_pos[wi]
            else:
                gap = wall_pos[wi] - pos[idx, axis]
            deltaw = radius - gap
            if deltaw <= 0.0:
                continue
            fnw = kn_w * deltaw * sqrt(deltaw)
            vrel_n = (vel[idx, axis] - wall_vel[wi]) * nw
            cnw = damp_w * pow(deltaw, 0.25)
            p = fnw + cnw * vrel_n
            force[idx, axis] += -p * nw
            wall_force[wi] += p
