"""Incompressible locally averaged Navier-Stokes solver on a fixed
structured grid (pseudo-2D: nx x ny x 1 cells).

Collocated variable arrangement with Rhie-Chow momentum-interpolated face
fluxes; segregated pressure-velocity iteration (implicit upwind momentum
predictor + pressure correction), first-order in time. The solid phase
enters through the voidfraction field, the per-cell apparent viscosity
and the momentum-exchange source field.

Boundary conditions are tagged per boundary face cell: SLIP, NOSLIP,
OUTLET (p = 0) and INLET (fixed normal velocity).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import SimulationConfig
from .rheology import apparent_viscosity

SLIP, NOSLIP, OUTLET, INLET = 0, 1, 2, 3

MAX_INNER = 200
TOL_MASS = 1.0e-8
TOL_MOM = 1.0e-6
RELAX_U = 0.95
RELAX_P = 1.0
RELAX_MU = 0.4  # under-relax viscosity refresh for shear-thinning fluids


class FluidSolverError(RuntimeError):
    """Non-convergence of the pressure-velocity iteration; try smaller dt."""

    def __init__(self, msg, mass_residual=None, momentum_residual=None):
        super().__init__(msg)
        self.mass_residual = mass_residual
        self.momentum_residual = momentum_residual


class FluidGrid:
    """Structured grid state (cell-centered) plus face boundary tags."""

    def __init__(self, nx: int, ny: int, extent, rho: float):
        self.nx, self.ny = nx, ny
        self.hx = extent[0] / nx
        self.hy = extent[1] / ny
        self.hz = extent[2]
        self.extent = tuple(extent)
        self.rho = rho
        self.vol = self.hx * self.hy * self.hz
        self.ax = self.hy * self.hz   # x-face area
        self.ay = self.hx * self.hz   # y-face area

        self.u = np.zeros((nx, ny))
        self.v = np.zeros((nx, ny))
        self.p = np.zeros((nx, ny))
        self.alpha = np.ones((nx, ny))
        self.alpha_old = np.ones((nx, ny))
        self.mu = np.full((nx, ny), 1.0e-3)
        self.src = np.zeros((nx, ny, 2))  # prescribed momentum source, N/m^3
        # semi-implicit particle drag: per-volume conductance C (kg/m^3/s)
        # and particle-velocity part, entering momentum as C (v_p - u)
        self.drag_coeff = np.zeros((nx, ny))
        self.drag_u = np.zeros((nx, ny, 2))

        self.bc_xlo = np.full(ny, SLIP); self.val_xlo = np.zeros(ny)
        self.bc_xhi = np.full(ny, SLIP); self.val_xhi = np.zeros(ny)
        self.bc_ylo = np.full(nx, SLIP); self.val_ylo = np.zeros(nx)
        self.bc_yhi = np.full(nx, SLIP); self.val_yhi = np.zeros(nx)

        # face normal velocities (Rhie-Chow), persisted across steps
        self.uf = np.zeros((nx + 1, ny))
        self.vf = np.zeros((nx, ny + 1))

    @classmethod
    def from_config(cls, cfg: SimulationConfig) -> "FluidGrid":
        nx, ny, _ = cfg.grid_cells
        return cls(nx, ny, cfg.domain_extent, cfg.fluid_density)

    def cell_centers(self):
        xc = (np.arange(self.nx) + 0.5) * self.hx
        yc = (np.arange(self.ny) + 0.5) * self.hy
        return xc, yc

    # -- derived fields -----------------------------------------------------

    def _grad(self, f, face_lo=None, face_hi=None, axis=0):
        """Cell gradient from interpolated face values; boundary faces use
        the supplied values, defaulting to zero-gradient (cell value)."""
        if axis == 0:
            fw = np.empty((self.nx + 1, self.ny))
            fw[1:-1] = 0.5 * (f[:-1] + f[1:])
            fw[0] = f[0] if face_lo is None else face_lo
            fw[-1] = f[-1] if face_hi is None else face_hi
            return (fw[1:] - fw[:-1]) / self.hx
        fw = np.empty((self.nx, self.ny + 1))
        fw[:, 1:-1] = 0.5 * (f[:, :-1] + f[:, 1:])
        fw[:, 0] = f[:, 0] if face_lo is None else face_lo
        fw[:, -1] = f[:, -1] if face_hi is None else face_hi
        return (fw[:, 1:] - fw[:, :-1]) / self.hy

    def _pressure_faces(self, f):
        """Boundary face values of a pressure-like field: 0 on outlets,
        zero-gradient elsewhere."""
        xlo = np.where(self.bc_xlo == OUTLET, 0.0, f[0])
        xhi = np.where(self.bc_xhi == OUTLET, 0.0, f[-1])
        ylo = np.where(self.bc_ylo == OUTLET, 0.0, f[:, 0])
        yhi = np.where(self.bc_yhi == OUTLET, 0.0, f[:, -1])
        return xlo, xhi, ylo, yhi

    def pressure_gradient(self):
        xlo, xhi, ylo, yhi = self._pressure_faces(self.p)
        gx = self._grad(self.p, xlo, xhi, axis=0)
        gy = self._grad(self.p, ylo, yhi, axis=1)
        return gx, gy

    def _vel_faces(self, f, comp):
        """Boundary face values of velocity component comp (0=u, 1=v)."""
        def face(bc, val, interior, is_normal):
            out = np.where(bc == OUTLET, interior, 0.0)
            if is_normal:
                out = np.where(bc == INLET, val, out)
            return out
        xlo = face(self.bc_xlo, self.val_xlo, f[0], comp == 0)
        xhi = face(self.bc_xhi, self.val_xhi, f[-1], comp == 0)
        ylo = face(self.bc_ylo, self.val_ylo, f[:, 0], comp == 1)
        yhi = face(self.bc_yhi, self.val_yhi, f[:, -1], comp == 1)
        # slip walls leave the tangential component free (zero gradient)
        if comp == 1:
            xlo = np.where(self.bc_xlo == SLIP, f[0], xlo)
            xhi = np.where(self.bc_xhi == SLIP, f[-1], xhi)
        else:
            ylo = np.where(self.bc_ylo == SLIP, f[:, 0], ylo)
            yhi = np.where(self.bc_yhi == SLIP, f[:, -1], yhi)
        return xlo, xhi, ylo, yhi

    def velocity_gradients(self):
        uxlo, uxhi, uylo, uyhi = self._vel_faces(self.u, 0)
        vxlo, vxhi, vylo, vyhi = self._vel_faces(self.v, 1)
        gux = self._grad(self.u, uxlo, uxhi, axis=0)
        guy = self._grad(self.u, uylo, uyhi, axis=1)
        gvx = self._grad(self.v, vxlo, vxhi, axis=0)
        gvy = self._grad(self.v, vylo, vyhi, axis=1)
        return gux, guy, gvx, gvy

    def shear_rate(self):
        """gamma = sqrt(2 D:D), D the symmetric velocity-gradient tensor."""
        gux, guy, gvx, gvy = self.velocity_gradients()
        dxy = 0.5 * (guy + gvx)
        return np.sqrt(2.0 * (gux**2 + gvy**2 + 2.0 * dxy**2))

    def tau_divergence(self):
        """div(mu (grad u + grad u^T)) per cell, central differences."""
        gux, guy, gvx, gvy = self.velocity_gradients()
        txx = 2.0 * self.mu * gux
        tyy = 2.0 * self.mu * gvy
        txy = self.mu * (guy + gvx)
        dx = self._grad(txx, axis=0) + self._grad(txy, axis=1)
        dy = self._grad(txy, axis=0) + self._grad(tyy, axis=1)
        return dx, dy

    def update_viscosity(self, rheology):
        mu = apparent_viscosity(self.shear_rate(), rheology)
        self.mu = (np.full((self.nx, self.ny), float(mu))
                   if np.isscalar(mu) else np.asarray(mu))

    def mass_imbalance(self, dt: float):
        """Per-cell continuity defect: net outflow + storage, kg/s."""
        afx, afy = _face_alpha(self)
        out = (self.rho * afx[1:] * self.uf[1:] * self.ax
               - self.rho * afx[:-1] * self.uf[:-1] * self.ax
               + self.rho * afy[:, 1:] * self.vf[:, 1:] * self.ay
               - self.rho * afy[:, :-1] * self.vf[:, :-1] * self.ay)
        storage = self.rho * (self.alpha - self.alpha_old) * self.vol / dt
        return out + storage

    def boundary_fluxes(self):
        """Volumetric flux in (positive) and out per boundary, m^3/s."""
        afx, afy = _face_alpha(self)
        q = (-(afx[-1] * self.uf[-1] * self.ax).sum()
             + (afx[0] * self.uf[0] * self.ax).sum()
             - (afy[:, -1] * self.vf[:, -1] * self.ay).sum()
             + (afy[:, 0] * self.vf[:, 0] * self.ay).sum())
        return q


def apply_boundary_conditions(grid: FluidGrid, cfg: SimulationConfig,
                              mode: str = "injection") -> FluidGrid:
    """Tag grid faces for the chosen experiment.

    injection: fixed-velocity inlet over the wellbore patch on the x+
    face (flow enters along -x); p = 0 outlets on the x- ("back") face
    and both y faces; impermeable slip elsewhere.
    permeability: inlet over the whole x+ face, no-slip y faces, p = 0
    outlet on x-.
    """
    ny = grid.ny
    _, yc = grid.cell_centers()
    u_in = -cfg.injection_velocity
    if mode == "injection":
        if cfg.wellbore_width > grid.extent[1]:
            raise ValueError("wellbore patch exceeds inlet face extent")
        patch = np.abs(yc - 0.5 * grid.extent[1]) < 0.5 * cfg.wellbore_width
        grid.bc_xhi = np.where(patch, INLET, SLIP)
        grid.val_xhi = np.where(patch, u_in, 0.0)
        grid.bc_xlo = np.full(ny, OUTLET); grid.val_xlo = np.zeros(ny)
        grid.bc_ylo = np.full(grid.nx, OUTLET); grid.val_ylo = np.zeros(grid.nx)
        grid.bc_yhi = np.full(grid.nx, OUTLET); grid.val_yhi = np.zeros(grid.nx)
    elif mode == "permeability":
        grid.bc_xhi = np.full(ny, INLET); grid.val_xhi = np.full(ny, u_in)
        grid.bc_xlo = np.full(ny, OUTLET); grid.val_xlo = np.zeros(ny)
        grid.bc_ylo = np.full(grid.nx, NOSLIP); grid.val_ylo = np.zeros(grid.nx)
        grid.bc_yhi = np.full(grid.nx, NOSLIP); grid.val_yhi = np.zeros(grid.nx)
    else:
        raise ValueError(f"unknown boundary mode {mode!r}")
    return grid


# ---------------------------------------------------------------------------
# voidfraction

_SUB_OFFSETS = 0.5 * np.array(
    [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
    dtype=float)


def deposit_particle_field(grid: FluidGrid, positions: np.ndarray,
                           radius: float, values: np.ndarray) -> np.ndarray:
    """Deposit per-particle values onto cells: 2x2x2 octant sub-sampling
    (offsets r/2 per axis, 1/8 weight each), each sub-point spread
    bilinearly over its surrounding cell centers so the deposit varies
    continuously with particle position. Weights sum to 1 per particle
    exactly (bilinear coordinates clamped at the boundary), so column
    sums conserve the deposited totals.

    values: (N,) or (N, m); returns (nx, ny) or (nx, ny, m).
    """
    values = np.asarray(values, dtype=float)
    out_shape = ((grid.nx, grid.ny) if values.ndim == 1
                 else (grid.nx, grid.ny, values.shape[1]))
    out = np.zeros(out_shape)
    if not positions.shape[0]:
        return out
    v8 = values / 8.0
    flat = out.reshape(grid.nx * grid.ny, -1)
    v2 = v8.reshape(len(v8), -1)
    for off in _SUB_OFFSETS:
        px = positions[:, 0] + radius * off[0]
        py = positions[:, 1] + radius * off[1]
        fx = np.clip(px / grid.hx - 0.5, 0.0, grid.nx - 1.0)
        fy = np.clip(py / grid.hy - 0.5, 0.0, grid.ny - 1.0)
        i0 = np.minimum(fx.astype(int), max(grid.nx - 2, 0))
        j0 = np.minimum(fy.astype(int), max(grid.ny - 2, 0))
        tx = fx - i0
        ty = fy - j0
        i1 = np.minimum(i0 + 1, grid.nx - 1)
        j1 = np.minimum(j0 + 1, grid.ny - 1)
        for ii, jj, w in ((i0, j0, (1 - tx) * (1 - ty)),
                          (i1, j0, tx * (1 - ty)),
                          (i0, j1, (1 - tx) * ty),
                          (i1, j1, tx * ty)):
            np.add.at(flat, ii * grid.ny + jj, w[:, None] * v2)
    return out


def compute_voidfraction(positions: np.ndarray, radius: float,
                         grid: FluidGrid, alpha_min: float = 0.2,
                         particle_volume: float | None = None) -> np.ndarray:
    """Per-cell fluid volume fraction from particle centers.

    Each particle's volume is deposited via deposit_particle_field
    (octant sub-sampling with bilinear cell weights), so global solid
    volume is conserved exactly and alpha varies continuously with
    particle positions. Cells denser than 1 - alpha_min shed the excess
    solid to face neighbors (conservation preserved).
    """
    nx, ny = grid.nx, grid.ny
    if particle_volume is None:
        particle_volume = (4.0 / 3.0) * np.pi * radius**3
    solid = np.zeros((nx, ny))
    if positions.shape[0]:
        bad = ((positions[:, 0] < -radius)
               | (positions[:, 0] > grid.extent[0] + radius)
               | (positions[:, 1] < -radius)
               | (positions[:, 1] > grid.extent[1] + radius))
        if bad.any():
            ids = np.nonzero(bad)[0]
            raise ValueError(f"particles outside grid: ids {ids[:5].tolist()}")
        solid = deposit_particle_field(
            grid, positions, radius,
            np.full(positions.shape[0], particle_volume))

    max_solid = (1.0 - alpha_min) * grid.vol
    cnt = np.full((nx, ny), 4.0)
    cnt[0] -= 1; cnt[-1] -= 1; cnt[:, 0] -= 1; cnt[:, -1] -= 1
    for _ in range(50):
        over = solid > max_solid * (1.0 + 1e-14)
        if not over.any():
            break
        excess = np.where(over, solid - max_solid, 0.0)
        solid = np.where(over, max_solid, solid)
        share = excess / cnt
        solid[1:] += share[:-1]
        solid[:-1] += share[1:]
        solid[:, 1:] += share[:, :-1]
        solid[:, :-1] += share[:, 1:]

    return 1.0 - solid / grid.vol


# ---------------------------------------------------------------------------
# pressure-velocity solve

def _face_alpha(grid):
    a = grid.alpha
    afx = np.empty((grid.nx + 1, grid.ny))
    afx[1:-1] = 0.5 * (a[:-1] + a[1:])
    afx[0] = a[0]; afx[-1] = a[-1]
    afy = np.empty((grid.nx, grid.ny + 1))
    afy[:, 1:-1] = 0.5 * (a[:, :-1] + a[:, 1:])
    afy[:, 0] = a[:, 0]; afy[:, -1] = a[:, -1]
    return afx, afy


def _face_mu(grid):
    """Harmonic-mean viscosity at interior faces, cell value at boundaries."""
    m = grid.mu
    mfx = np.empty((grid.nx + 1, grid.ny))
    mfx[1:-1] = 2.0 * m[:-1] * m[1:] / (m[:-1] + m[1:])
    mfx[0] = m[0]; mfx[-1] = m[-1]
    mfy = np.empty((grid.nx, grid.ny + 1))
    mfy[:, 1:-1] = 2.0 * m[:, :-1] * m[:, 1:] / (m[:, :-1] + m[:, 1:])
    mfy[:, 0] = m[:, 0]; mfy[:, -1] = m[:, -1]
    return mfx, mfy


def _enforce_face_bc(grid):
    """Stamp fixed boundary face velocities (inlets; walls are 0)."""
    grid.uf[0] = np.where(grid.bc_xlo == INLET, grid.val_xlo,
                          np.where(grid.bc_xlo == OUTLET, grid.uf[0], 0.0))
    grid.uf[-1] = np.where(grid.bc_xhi == INLET, grid.val_xhi,
                           np.where(grid.bc_xhi == OUTLET, grid.uf[-1], 0.0))
    grid.vf[:, 0] = np.where(grid.bc_ylo == INLET, grid.val_ylo,
                             np.where(grid.bc_ylo == OUTLET, grid.vf[:, 0], 0.0))
    grid.vf[:, -1] = np.where(grid.bc_yhi == INLET, grid.val_yhi,
                              np.where(grid.bc_yhi == OUTLET, grid.vf[:, -1], 0.0))


def _transpose_terms(grid):
    """Explicit remainder of div(tau) beyond the implicit div(mu grad c)."""
    gux, guy, gvx, gvy = grid.velocity_gradients()
    mu = grid.mu
    r_u = grid._grad(mu * gux, axis=0) + grid._grad(mu * gvx, axis=1)
    r_v = grid._grad(mu * guy, axis=0) + grid._grad(mu * gvy, axis=1)
    return r_u, r_v


def _assemble_component(grid, comp, u_old_c, at, gp_c, r_c, dt):
    """Upwind/implicit momentum coefficients for one velocity component.

    Returns (aP, aE, aW, aN, aS, b); off-diagonal a's are the positive
    neighbor coefficients of the standard form
    aP u_P = sum(a_nb u_nb) + b.
    """
    nx, ny = grid.nx, grid.ny
    rho, ax, ay, hx, hy = grid.rho, grid.ax, grid.ay, grid.hx, grid.hy
    alpha = grid.alpha
    afx, afy = _face_alpha(grid)
    mfx, mfy = _face_mu(grid)

    aP = at + grid.drag_coeff * grid.vol
    aE = np.zeros((nx, ny)); aW = np.zeros((nx, ny))
    aN = np.zeros((nx, ny)); aS = np.zeros((nx, ny))
    src_c = grid.src[:, :, comp] + grid.drag_u[:, :, comp]
    b = at * u_old_c + grid.vol * (alpha * (-gp_c + r_c) + src_c)

    # interior x faces
    F = rho * afx[1:-1] * grid.uf[1:-1] * ax          # outflow of cell i
    D = mfx[1:-1] * ax / hx
    Fp = np.maximum(F, 0.0); Fm = np.maximum(-F, 0.0)
    aE[:-1] += Fm + alpha[:-1] * D
    aP[:-1] += Fp + alpha[:-1] * D
    aW[1:] += Fp + alpha[1:] * D
    aP[1:] += Fm + alpha[1:] * D

    # interior y faces
    F = rho * afy[:, 1:-1] * grid.vf[:, 1:-1] * ay
    D = mfy[:, 1:-1] * ay / hy
    Fp = np.maximum(F, 0.0); Fm = np.maximum(-F, 0.0)
    aN[:, :-1] += Fm + alpha[:, :-1] * D
    aP[:, :-1] += Fp + alpha[:, :-1] * D
    aS[:, 1:] += Fp + alpha[:, 1:] * D
    aP[:, 1:] += Fm + alpha[:, 1:] * D

    # boundary faces
    def boundary(bc, val, cells, face_flux_out, area, h, is_x_face):
        """cells: index expression selecting the boundary cell row/col."""
        is_normal = (comp == 0) == is_x_face
        u_b = np.where(bc == INLET, val if is_normal else 0.0, 0.0)
        fb = face_flux_out
        aP[cells] += np.maximum(fb, 0.0)
        b[cells] += np.maximum(-fb, 0.0) * u_b
        dirichlet = ((bc == INLET) | (bc == NOSLIP)
                     | ((bc == SLIP) & is_normal))
        db = np.where(dirichlet,
                      alpha[cells] * grid.mu[cells] * area / (0.5 * h), 0.0)
        aP[cells] += db
        b[cells] += db * u_b

    boundary(grid.bc_xlo, grid.val_xlo, (0, slice(None)),
             -rho * afx[0] * grid.uf[0] * ax, ax, hx, True)
    boundary(grid.bc_xhi, grid.val_xhi, (nx - 1, slice(None)),
             rho * afx[-1] * grid.uf[-1] * ax, ax, hx, True)
    boundary(grid.bc_ylo, grid.val_ylo, (slice(None), 0),
             -rho * afy[:, 0] * grid.vf[:, 0] * ay, ay, hy, False)
    boundary(grid.bc_yhi, grid.val_yhi, (slice(None), ny - 1),
             rho * afy[:, -1] * grid.vf[:, -1] * ay, ay, hy, False)

    return aP, aE, aW, aN, aS, b


_DENSE_SOLVE_LIMIT = 1024  # cells; below this a dense solve is faster


def _solve_structured(aP, aE, aW, aN, aS, b, nx, ny):
    n = nx * ny
    if n <= _DENSE_SOLVE_LIMIT:
        mat = np.zeros((n, n))
        idx = np.arange(n)
        mat[idx, idx] = aP.ravel()
        mat[idx[:-ny], idx[:-ny] + ny] = -aE.ravel()[:-ny]
        mat[idx[ny:], idx[ny:] - ny] = -aW.ravel()[ny:]
        mat[idx[:-1], idx[:-1] + 1] = -aN.ravel()[:-1]
        mat[idx[1:], idx[1:] - 1] = -aS.ravel()[1:]
        return np.linalg.solve(mat, b.ravel()).reshape(nx, ny)
    main = aP.ravel()
    east = -aE.ravel()[:-ny]
    west = -aW.ravel()[ny:]
    north = -aN.ravel()[:-1]
    south = -aS.ravel()[1:]
    mat = sp.diags([main, east, west, north, south],
                   [0, ny, -ny, 1, -1], format="csc")
    return spla.spsolve(mat, b.ravel()).reshape(nx, ny)


def solve_fluid_step(grid: FluidGrid, dt: float, rheology=None,
                     max_inner: int = MAX_INNER,
                     tol_mass: float = TOL_MASS,
                     tol_mom: float = TOL_MOM) -> dict:
    """Advance (u, p) one implicit step.

    alpha, alpha_old, mu and src must be populated. With rheology given,
    the apparent viscosity is refreshed from the shear-rate field every
    inner iteration.
    """
    nx, ny = grid.nx, grid.ny
    rho, vol = grid.rho, grid.vol
    hx, hy, ax, ay = grid.hx, grid.hy, grid.ax, grid.ay
    u_old, v_old = grid.u.copy(), grid.v.copy()
    at = rho * grid.alpha * vol / dt
    storage = rho * (grid.alpha - grid.alpha_old) * vol / dt

    _enforce_face_bc(grid)

    inflow = float(np.abs(grid.val_xlo[grid.bc_xlo == INLET]).sum() * ax
                   + np.abs(grid.val_xhi[grid.bc_xhi == INLET]).sum() * ax
                   + np.abs(grid.val_ylo[grid.bc_ylo == INLET]).sum() * ay
                   + np.abs(grid.val_yhi[grid.bc_yhi == INLET]).sum() * ay)
    flux_scale = max(rho * inflow, rho * vol * nx * ny / dt * 1e-9, 1e-30)

    mass_res = mom_res = np.inf
    for n_inner in range(1, max_inner + 1):
        if rheology is not None:
            # blended refresh: the fixed point still satisfies
            # mu = mu(shear rate), but strongly shear-thinning fluids
            # limit-cycle if the update is applied unrelaxed
            mu_prev = grid.mu
            grid.update_viscosity(rheology)
            grid.mu = RELAX_MU * grid.mu + (1.0 - RELAX_MU) * mu_prev
        gpx, gpy = grid.pressure_gradient()
        r_u, r_v = _transpose_terms(grid)

        sysu = _assemble_component(grid, 0, u_old, at, gpx, r_u, dt)
        sysv = _assemble_component(grid, 1, v_old, at, gpy, r_v, dt)

        # momentum residuals with current fields (pre-relaxation)
        def resid(sys_, f):
            aP, aE, aW, aN, aS, b = sys_
            r = aP * f - b
            r[:-1] -= aE[:-1] * f[1:]
            r[1:] -= aW[1:] * f[:-1]
            r[:, :-1] -= aN[:, :-1] * f[:, 1:]
            r[:, 1:] -= aS[:, 1:] * f[:, :-1]
            return float(np.abs(r).sum())
        bnorm = max(float(np.abs(sysu[5]).sum() + np.abs(sysv[5]).sum()),
                    1e-30)
        mom_res = (resid(sysu, grid.u) + resid(sysv, grid.v)) / bnorm

        # implicit under-relaxation
        new_uv = []
        d_comp = []
        for sys_, f in ((sysu, grid.u), (sysv, grid.v)):
            aP, aE, aW, aN, aS, b = sys_
            aP_r = aP / RELAX_U
            b_r = b + (aP_r - aP) * f
            new_uv.append(_solve_structured(aP_r, aE, aW, aN, aS, b_r, nx, ny))
            # SIMPLEC-consistent correction coefficient
            d_comp.append(grid.alpha * vol / (aP_r - (aE + aW + aN + aS)))
        grid.u, grid.v = new_uv
        du, dv = d_comp

        # Rhie-Chow face velocities
        afx, afy = _face_alpha(grid)
        gpx, gpy = grid.pressure_gradient()
        duf = 0.5 * (du[:-1] + du[1:])
        grid.uf[1:-1] = (0.5 * (grid.u[:-1] + grid.u[1:])
                         + duf * (0.5 * (gpx[:-1] + gpx[1:])
                                  - (grid.p[1:] - grid.p[:-1]) / hx))
        dvf = 0.5 * (dv[:, :-1] + dv[:, 1:])
        grid.vf[:, 1:-1] = (0.5 * (grid.v[:, :-1] + grid.v[:, 1:])
                            + dvf * (0.5 * (gpy[:, :-1] + gpy[:, 1:])
                                     - (grid.p[:, 1:] - grid.p[:, :-1]) / hy))
        # outlet faces: one-sided Rhie-Chow against p_face = 0
        out = grid.bc_xlo == OUTLET
        grid.uf[0, out] = (grid.u[0, out] + du[0, out]
                           * (gpx[0, out]
                              - (grid.p[0, out] - 0.0) / (0.5 * hx)))
        out = grid.bc_xhi == OUTLET
        grid.uf[-1, out] = (grid.u[-1, out] + du[-1, out]
                            * (gpx[-1, out]
                               - (0.0 - grid.p[-1, out]) / (0.5 * hx)))
        out = grid.bc_ylo == OUTLET
        grid.vf[out, 0] = (grid.v[out, 0] + dv[out, 0]
                           * (gpy[out, 0]
                              - (grid.p[out, 0] - 0.0) / (0.5 * hy)))
        out = grid.bc_yhi == OUTLET
        grid.vf[out, -1] = (grid.v[out, -1] + dv[out, -1]
                            * (gpy[out, -1]
                               - (0.0 - grid.p[out, -1]) / (0.5 * hy)))
        _enforce_face_bc(grid)

        # pressure correction
        imbalance = grid.mass_imbalance(dt)
        mass_res = float(np.abs(imbalance).sum()) / flux_scale
        if mass_res < tol_mass and mom_res < tol_mom and n_inner >= 2:
            break

        cP = np.zeros((nx, ny))
        cE = np.zeros((nx, ny)); cW = np.zeros((nx, ny))
        cN = np.zeros((nx, ny)); cS = np.zeros((nx, ny))
        cfx = rho * afx[1:-1] * duf * ax / hx
        cE[:-1] += cfx; cW[1:] += cfx
        cP[:-1] += cfx; cP[1:] += cfx
        cfy = rho * afy[:, 1:-1] * dvf * ay / hy
        cN[:, :-1] += cfy; cS[:, 1:] += cfy
        cP[:, :-1] += cfy; cP[:, 1:] += cfy
        out = grid.bc_xlo == OUTLET
        cP[0, out] += rho * afx[0, out] * du[0, out] * ax / (0.5 * hx)
        out = grid.bc_xhi == OUTLET
        cP[-1, out] += rho * afx[-1, out] * du[-1, out] * ax / (0.5 * hx)
        out = grid.bc_ylo == OUTLET
        cP[out, 0] += rho * afy[out, 0] * dv[out, 0] * ay / (0.5 * hy)
        out = grid.bc_yhi == OUTLET
        cP[out, -1] += rho * afy[out, -1] * dv[out, -1] * ay / (0.5 * hy)

        pc = _solve_structured(cP, cE, cW, cN, cS, -imbalance, nx, ny)

        # corrections: cells (relaxed pressure), faces (full correction)
        grid.p += RELAX_P * pc
        pxlo, pxhi, pylo, pyhi = grid._pressure_faces(pc)
        gcx = grid._grad(pc, pxlo, pxhi, axis=0)
        gcy = grid._grad(pc, pylo, pyhi, axis=1)
        grid.u -= du * gcx
        grid.v -= dv * gcy
        grid.uf[1:-1] += duf * (pc[:-1] - pc[1:]) / hx
        grid.vf[:, 1:-1] += dvf * (pc[:, :-1] - pc[:, 1:]) / hy
        out = grid.bc_xlo == OUTLET
        grid.uf[0, out] -= du[0, out] * pc[0, out] / (0.5 * hx)
        out = grid.bc_xhi == OUTLET
        grid.uf[-1, out] += du[-1, out] * pc[-1, out] / (0.5 * hx)
        out = grid.bc_ylo == OUTLET
        grid.vf[out, 0] -= dv[out, 0] * pc[out, 0] / (0.5 * hy)
        out = grid.bc_yhi == OUTLET
        grid.vf[out, -1] += dv[out, -1] * pc[out, -1] / (0.5 * hy)
    else:
        raise FluidSolverError(
            f"pressure-velocity iteration did not converge in {max_inner} "
            f"inner iterations (mass {mass_res:.3e}, momentum {mom_res:.3e}); "
            "suggested remedy: smaller dt_cfd",
            mass_residual=mass_res, momentum_residual=mom_res)

    return {"inner_iterations": n_inner, "mass_residual": mass_res,
            "momentum_residual": mom_res}
