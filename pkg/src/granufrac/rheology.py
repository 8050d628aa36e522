"""Closure library: power-law viscosity, generalized Reynolds number and
porous-media drag laws for power-law (shear-thinning) and Newtonian fluids.

All functions are pure and accept scalars or numpy arrays where noted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RheologyModel

# Regularization floor for the power-law shear rate: mu = K gamma^(n-1)
# diverges as gamma -> 0 for n < 1. Injection shear rates are far above
# this floor, so resolved flow is unaffected.
SHEAR_RATE_FLOOR = 1.0e-6


@dataclass(frozen=True)
class DragInput:
    """Inputs to the drag closures for one particle in one cell."""

    fluid_density: float
    rheology: RheologyModel
    voidfraction: float
    particle_diameter: float
    particle_volume: float
    relative_velocity: np.ndarray  # u - v, shape (3,)


def apparent_viscosity(shear_rate, rheology: RheologyModel):
    """mu = K * max(gamma, floor)^(n-1); returns K exactly for n = 1."""
    k = rheology.consistency_index
    n = rheology.flow_behavior_index
    if n == 1.0:
        return k if np.isscalar(shear_rate) else np.full_like(
            np.asarray(shear_rate, dtype=float), k)
    gamma = np.maximum(shear_rate, SHEAR_RATE_FLOOR)
    return k * gamma ** (n - 1.0)


def particle_reynolds(inp: DragInput) -> float:
    """Generalized particle Reynolds number Re_p = rho d^n |u-v|^(2-n) / K."""
    speed = float(np.linalg.norm(inp.relative_velocity))
    if speed == 0.0:
        return 0.0
    n = inp.rheology.flow_behavior_index
    return (inp.fluid_density * inp.particle_diameter**n * speed ** (2.0 - n)
            / inp.rheology.consistency_index)


def fcm_factor(alpha_f: float, n: float) -> float:
    """F_CM = (150/12) (9 + 3/n)^n alpha^(2(1-n)) (1-alpha)^n.

    Collapses to 150 (1 - alpha) at n = 1; 0 at alpha = 1 (no solid).
    """
    if alpha_f >= 1.0:
        return 0.0
    return ((150.0 / 12.0) * (9.0 + 3.0 / n) ** n
            * alpha_f ** (2.0 * (1.0 - n)) * (1.0 - alpha_f) ** n)


def christopher_middleman_drag(inp: DragInput) -> np.ndarray:
    """Packed-bed drag force on one particle in a power-law fluid.

    f_d = (F_CM / Re_p) rho |w| w (1 - alpha) V_p / (d alpha),  w = u - v.

    Implemented with Re_p expanded analytically so the w -> 0 limit is
    finite: f_d = F_CM K |w|^(n-1) w (1 - alpha) V_p / (d^(n+1) alpha).
    """
    alpha = inp.voidfraction
    if alpha <= 0.0:
        raise ValueError("cell fully solid: voidfraction <= 0")
    w = np.asarray(inp.relative_velocity, dtype=float)
    speed = float(np.linalg.norm(w))
    if speed == 0.0 or alpha >= 1.0:
        return np.zeros(3)
    n = inp.rheology.flow_behavior_index
    k = inp.rheology.consistency_index
    d = inp.particle_diameter
    coeff = (fcm_factor(alpha, n) * k * speed ** (n - 1.0)
             * (1.0 - alpha) * inp.particle_volume / (d ** (n + 1.0) * alpha))
    return coeff * w


def di_felice_drag(inp: DragInput) -> np.ndarray:
    """Di Felice voidage-corrected single-sphere drag (Newtonian only).

    Standard published form: f_d = 0.5 Cd rho (pi d^2 / 4) |w| w alpha^(-chi)
    with Cd = (0.63 + 4.8 / sqrt(Re))^2 and
    chi = 3.7 - 0.65 exp(-(1.5 - log10 Re)^2 / 2).
    """
    alpha = inp.voidfraction
    if alpha <= 0.0:
        raise ValueError("cell fully solid: voidfraction <= 0")
    if inp.rheology.flow_behavior_index != 1.0:
        raise ValueError("Di Felice drag requires Newtonian rheology (n = 1)")
    w = np.asarray(inp.relative_velocity, dtype=float)
    speed = float(np.linalg.norm(w))
    if speed == 0.0:
        return np.zeros(3)
    re = particle_reynolds(inp)
    cd = (0.63 + 4.8 / np.sqrt(re)) ** 2
    chi = 3.7 - 0.65 * np.exp(-0.5 * (1.5 - np.log10(re)) ** 2)
    d = inp.particle_diameter
    return (0.5 * cd * inp.fluid_density * (np.pi * d**2 / 4.0)
            * speed * alpha ** (-chi)) * w


def drag_force(inp: DragInput, model: str = "cm") -> np.ndarray:
    """Dispatch by closure name: "cm" (injection runs, any 0 < n <= 1) or
    "difelice" (Newtonian permeability runs)."""
    if model == "cm":
        return christopher_middleman_drag(inp)
    if model == "difelice":
        return di_felice_drag(inp)
    raise ValueError(f"unknown drag model {model!r}")
