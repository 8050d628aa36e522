"""Post-processing: peak pressure, dimensionless groups, initiation
classification and the observed-fracture metric.

The classification thresholds (1/Pi_1 > 0.06 and tau_2 > 2e-7) mark the
corner of the initiation map: a run is predicted to fracture only when
both dimensionless coordinates exceed their thresholds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter

from .config import SimulationConfig
from .rheology import apparent_viscosity

INV_PI1_THRESHOLD = 0.06
TAU2_THRESHOLD = 2.0e-7
PEAK_MEDFILT_WINDOW = 5


def peak_pressure(times, pressures, window: int = PEAK_MEDFILT_WINDOW):
    """(P_peak, t_peak) of a pressure series after median smoothing.

    The median filter (default window 5) suppresses single-sample
    spikes; ties are broken toward the earliest time.  ``window <= 1``
    skips smoothing.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(pressures, dtype=float)
    if p.size == 0:
        raise ValueError("empty pressure series")
    if t.shape != p.shape:
        raise ValueError("times and pressures differ in length")
    if window > 1 and p.size >= window:
        # edge padding so a genuine peak in the last samples survives
        p = median_filter(p, size=window, mode="nearest")
    i = int(np.argmax(p))          # argmax returns the first maximum
    return float(p[i]), float(t[i])


def pi_groups(p_peak: float, sigma3: float, consistency_index: float,
              flow_behavior_index: float, permeability: float,
              flow_rate: float):
    """(Pi_1, Pi_2) = (P_peak/K, sigma3/K) * (k^(3/2)/Q)^n.

    ``flow_rate`` is volumetric (m^3/s): the inlet speed times the
    inlet area.
    """
    for name, v in (("p_peak", p_peak), ("sigma3", sigma3),
                    ("consistency_index", consistency_index),
                    ("flow_behavior_index", flow_behavior_index),
                    ("permeability", permeability),
                    ("flow_rate", flow_rate)):
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v}")
    scale = (permeability**1.5 / flow_rate) ** flow_behavior_index
    return (p_peak / consistency_index * scale,
            sigma3 / consistency_index * scale)


def tau2(mu_apparent_at_inlet: float, phi_i: float, velocity: float,
         inlet_length: float, youngs_modulus: float) -> float:
    """tau_2 = mu' * phi_i * v / (l * E).

    ``mu_apparent_at_inlet`` is the apparent viscosity evaluated at
    the run's maximum inlet shear rate (where fluid velocity peaks).
    """
    if mu_apparent_at_inlet < 0 or phi_i < 0 or velocity < 0:
        raise ValueError("tau2 inputs must be non-negative")
    if not (inlet_length > 0 and youngs_modulus > 0):
        raise ValueError("inlet_length and youngs_modulus must be > 0")
    return mu_apparent_at_inlet * phi_i * velocity / (
        inlet_length * youngs_modulus)


@dataclass
class CriteriaPoint:
    """One run's coordinates on the initiation map."""

    inv_pi1: float
    tau2: float
    inputs: dict = field(default_factory=dict)
    observed_fracture: bool = False


@dataclass
class Classification:
    label: str                 # "fracture" | "no_fracture"
    margin_inv_pi1: float      # coordinate minus threshold
    margin_tau2: float


def classify_initiation(point: CriteriaPoint) -> Classification:
    """Fracture is predicted only above both thresholds (monotone)."""
    m1 = point.inv_pi1 - INV_PI1_THRESHOLD
    m2 = point.tau2 - TAU2_THRESHOLD
    label = "fracture" if (m1 > 0 and m2 > 0) else "no_fracture"
    return Classification(label, m1, m2)


def criteria_point(cfg: SimulationConfig, p_peak: float,
                   permeability: float, phi_i: float,
                   max_inlet_shear_rate: float,
                   observed_fracture: bool) -> CriteriaPoint:
    """Assemble a CriteriaPoint from run-level measurements."""
    rheo = cfg.rheology
    area = cfg.wellbore_width * cfg.domain_extent[2]
    flow_rate = cfg.injection_velocity * area
    mu = float(apparent_viscosity(max_inlet_shear_rate, rheo))
    p1, _ = pi_groups(p_peak, cfg.sigma3, rheo.consistency_index,
                      rheo.flow_behavior_index, permeability, flow_rate)
    t2 = tau2(mu, phi_i, cfg.injection_velocity, cfg.wellbore_width,
              cfg.material.youngs_modulus)
    inputs = {"p_peak": p_peak, "sigma3": cfg.sigma3,
              "consistency_index": rheo.consistency_index,
              "flow_behavior_index": rheo.flow_behavior_index,
              "permeability": permeability, "flow_rate": flow_rate,
              "mu_apparent": mu, "velocity": cfg.injection_velocity,
              "inlet_length": cfg.wellbore_width,
              "youngs_modulus": cfg.material.youngs_modulus,
              "phi_i": phi_i}
    return CriteriaPoint(1.0 / p1, t2, inputs, observed_fracture)


@dataclass
class ChannelDescriptors:
    """Connected high-voidfraction region grown from the inlet face."""

    length_cells: int          # columns penetrated inward from the inlet
    length: float              # penetration depth along x, metres
    max_aperture: float        # widest transverse (y) extent, metres
    orientation_deg: float     # principal axis vs the sigma3 (y) axis
    cell_count: int


def channel_descriptors(alpha: np.ndarray, inlet_mask: np.ndarray,
                        cell_size, threshold: float) -> ChannelDescriptors:
    """Breadth-first growth of alpha > threshold cells from the x+ face.

    ``inlet_mask`` flags which rows (y indices) of the x+ boundary are
    injection cells.  Depth is the BFS distance from that seed layer.
    """
    nx, ny = alpha.shape
    hx, hy = cell_size
    open_cell = alpha > threshold
    depth = np.full((nx, ny), -1, dtype=int)
    queue = deque()
    for j in range(ny):
        if inlet_mask[j] and open_cell[nx - 1, j]:
            depth[nx - 1, j] = 0
            queue.append((nx - 1, j))
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < nx and 0 <= b < ny and open_cell[a, b] \
                    and depth[a, b] < 0:
                depth[a, b] = depth[i, j] + 1
                queue.append((a, b))
    cells = np.argwhere(depth >= 0)
    if cells.size == 0:
        return ChannelDescriptors(0, 0.0, 0.0, 0.0, 0)
    # penetration depth: how many grid columns the connected channel
    # spans inward from the inlet face
    length_cells = int(nx - cells[:, 0].min())
    # transverse aperture: widest y-run of channel cells in one column
    aperture = 0
    for i in np.unique(cells[:, 0]):
        aperture = max(aperture, int(np.sum(depth[i] >= 0)))
    # principal direction of the cell cloud vs the y (sigma3) axis
    xy = cells * np.array([hx, hy])
    if len(cells) > 1:
        cov = np.cov((xy - xy.mean(axis=0)).T)
        _, vecs = np.linalg.eigh(cov)
        principal = vecs[:, -1]
        angle = np.degrees(np.arccos(
            min(1.0, abs(float(principal[1])))))
    else:
        angle = 0.0
    return ChannelDescriptors(
        length_cells, length_cells * hx,
        aperture * hy, float(angle), len(cells))


@dataclass
class FractureObservation:
    observed: bool
    broken_fraction: float
    channel: ChannelDescriptors


def fracture_metric(cfg: SimulationConfig, broken_bonds: int,
                    initial_bonds: int, alpha: np.ndarray,
                    inlet_mask: np.ndarray,
                    cell_size) -> FractureObservation:
    """Observed fracture = enough broken bonds AND a long enough
    high-voidfraction channel grown from the wellbore."""
    frac = broken_bonds / initial_bonds if initial_bonds else 0.0
    chan = channel_descriptors(alpha, inlet_mask, cell_size,
                               cfg.channel_voidfraction)
    observed = (frac > cfg.bond_break_fraction
                and chan.length_cells >= cfg.channel_min_cells)
    return FractureObservation(bool(observed), float(frac), chan)
