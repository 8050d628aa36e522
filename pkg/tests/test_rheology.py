"""Golden-value and property tests for the closure library.

Every closure is checked against an independent re-evaluation of its
closed form, written out long-hand here so a bug in the library cannot
cancel against itself.
"""

import math

import numpy as np
import pytest

from granufrac.config import GUAR, NEWTONIAN_3PAS, XG, RheologyModel
from granufrac.rheology import (SHEAR_RATE_FLOOR, DragInput,
                                apparent_viscosity,
                                christopher_middleman_drag, di_felice_drag,
                                drag_force, fcm_factor, particle_reynolds)

RTOL = 1.0e-12


def make_input(rng, rheology=None):
    n = rng.uniform(0.1, 1.0)
    if rheology is None:
        rheology = RheologyModel(consistency_index=rng.uniform(1e-3, 20.0),
                                 flow_behavior_index=n)
    return DragInput(
        fluid_density=rng.uniform(500.0, 2000.0),
        rheology=rheology,
        voidfraction=rng.uniform(0.3, 0.95),
        particle_diameter=rng.uniform(1e-4, 1e-2),
        particle_volume=rng.uniform(1e-12, 1e-6),
        relative_velocity=rng.uniform(-1.0, 1.0, 3))


# -- independent scalar oracles ---------------------------------------------

def oracle_viscosity(gamma, k, n):
    if n == 1.0:
        return k
    return k * max(gamma, 1.0e-6) ** (n - 1.0)


def oracle_reynolds(rho, d, speed, k, n):
    if speed == 0.0:
        return 0.0
    return rho * d**n * speed ** (2.0 - n) / k


def oracle_fcm(alpha, n):
    if alpha >= 1.0:
        return 0.0
    return (150.0 / 12.0) * (9.0 + 3.0 / n) ** n \
        * alpha ** (2.0 * (1.0 - n)) * (1.0 - alpha) ** n


def oracle_cm_drag(inp):
    w = np.asarray(inp.relative_velocity, dtype=float)
    speed = math.sqrt(float(w @ w))
    if speed == 0.0:
        return np.zeros(3)
    alpha = inp.voidfraction
    n = inp.rheology.flow_behavior_index
    # literal Eq. form (F_CM / Re_p) rho |w| w (1-alpha) V / (d alpha)
    re = oracle_reynolds(inp.fluid_density, inp.particle_diameter, speed,
                         inp.rheology.consistency_index, n)
    fcm = oracle_fcm(alpha, n)
    return ((fcm / re) * inp.fluid_density * speed * w * (1.0 - alpha)
            * inp.particle_volume / (inp.particle_diameter * alpha))


def oracle_di_felice(inp):
    w = np.asarray(inp.relative_velocity, dtype=float)
    speed = math.sqrt(float(w @ w))
    if speed == 0.0:
        return np.zeros(3)
    re = (inp.fluid_density * inp.particle_diameter * speed
          / inp.rheology.consistency_index)
    cd = (0.63 + 4.8 / math.sqrt(re)) ** 2
    chi = 3.7 - 0.65 * math.exp(-((1.5 - math.log10(re)) ** 2) / 2.0)
    area = math.pi * inp.particle_diameter**2 / 4.0
    return (0.5 * cd * inp.fluid_density * area * speed
            * inp.voidfraction ** (-chi)) * w


# -- AC1: golden values ------------------------------------------------------

def test_viscosity_worked_examples():
    assert apparent_viscosity(1.0, GUAR) == 11.0
    expected = 4.78 * 100.0 ** (0.1547 - 1.0)
    assert apparent_viscosity(100.0, XG) == pytest.approx(expected, rel=RTOL)
    assert expected == pytest.approx(0.0975, rel=2e-2)
    for gamma in (0.0, 1.0, 1e4):
        assert apparent_viscosity(gamma, NEWTONIAN_3PAS) == 3.0


def test_viscosity_randomized_golden():
    rng = np.random.default_rng(101)
    for _ in range(60):
        k = rng.uniform(1e-3, 20.0)
        n = rng.uniform(0.1, 1.0)
        gamma = 10.0 ** rng.uniform(-9, 4)
        got = apparent_viscosity(gamma, RheologyModel(k, n))
        assert got == pytest.approx(oracle_viscosity(gamma, k, n), rel=RTOL)


def test_viscosity_floor_and_monotonicity():
    mu_floor = apparent_viscosity(0.0, GUAR)
    assert mu_floor == apparent_viscosity(SHEAR_RATE_FLOOR / 2, GUAR)
    gammas = np.logspace(-6, 4, 200)
    mus = np.array([apparent_viscosity(g, GUAR) for g in gammas])
    assert np.all(np.diff(mus) <= 0.0)


def test_reynolds_worked_examples():
    inp = DragInput(1000.0, GUAR, 0.6, 0.002, 1.0, np.array([1e-3, 0, 0]))
    got = particle_reynolds(inp)
    expected = 1000.0 * 0.002**0.41 * (1e-3) ** (2.0 - 0.41) / 11.0
    assert got == pytest.approx(expected, rel=RTOL)
    assert got == pytest.approx(1.21e-4, rel=2e-2)
    still = DragInput(1000.0, GUAR, 0.6, 0.002, 1.0, np.zeros(3))
    assert particle_reynolds(still) == 0.0


def test_reynolds_newtonian_reduction_and_golden():
    rng = np.random.default_rng(102)
    for _ in range(60):
        inp = make_input(rng)
        speed = float(np.linalg.norm(inp.relative_velocity))
        assert particle_reynolds(inp) == pytest.approx(
            oracle_reynolds(inp.fluid_density, inp.particle_diameter, speed,
                            inp.rheology.consistency_index,
                            inp.rheology.flow_behavior_index), rel=RTOL)
    newt = make_input(rng, rheology=RheologyModel(0.37, 1.0))
    speed = float(np.linalg.norm(newt.relative_velocity))
    classical = newt.fluid_density * newt.particle_diameter * speed / 0.37
    assert particle_reynolds(newt) == pytest.approx(classical, rel=RTOL)


def test_fcm_worked_examples():
    assert fcm_factor(0.6, 1.0) == pytest.approx(150.0 * 0.4, rel=RTOL)
    assert fcm_factor(0.6, 0.41) == pytest.approx(oracle_fcm(0.6, 0.41),
                                                  rel=RTOL)
    assert fcm_factor(0.6, 0.41) == pytest.approx(14.8, rel=2e-2)
    assert fcm_factor(1.0, 0.5) == 0.0


def test_fcm_randomized_golden():
    rng = np.random.default_rng(103)
    for _ in range(60):
        alpha = rng.uniform(0.05, 0.999)
        n = rng.uniform(0.1, 1.0)
        assert fcm_factor(alpha, n) == pytest.approx(oracle_fcm(alpha, n),
                                                     rel=RTOL)


def test_cm_drag_randomized_golden():
    rng = np.random.default_rng(104)
    for _ in range(60):
        inp = make_input(rng)
        np.testing.assert_allclose(christopher_middleman_drag(inp),
                                   oracle_cm_drag(inp), rtol=RTOL, atol=0.0)


def test_di_felice_randomized_golden():
    rng = np.random.default_rng(105)
    for _ in range(60):
        inp = make_input(rng, rheology=RheologyModel(
            rng.uniform(1e-4, 1e-1), 1.0))
        np.testing.assert_allclose(di_felice_drag(inp),
                                   oracle_di_felice(inp), rtol=RTOL, atol=0.0)


def test_di_felice_worked_example():
    inp = DragInput(1000.0, RheologyModel(1.0e-3, 1.0), 0.64, 0.002, 1.0,
                    np.array([1e-3, 0.0, 0.0]))
    np.testing.assert_allclose(di_felice_drag(inp), oracle_di_felice(inp),
                               rtol=RTOL)


# -- AC2: n = 1 reduction ----------------------------------------------------

def test_cm_newtonian_reduction():
    """At n = 1 the composite collapses to the hand-expanded Ergun-viscous
    form 150 mu (1-alpha)^2 V (u-v) / (alpha^2 d^2) -- derived by inserting
    F_CM = 150 (1 - alpha) and Re_p = rho d |w| / mu into Eq. (9)."""
    rng = np.random.default_rng(106)
    for _ in range(60):
        mu = rng.uniform(1e-4, 10.0)
        inp = make_input(rng, rheology=RheologyModel(mu, 1.0))
        w = np.asarray(inp.relative_velocity)
        alpha = inp.voidfraction
        # F_CM = 150 (1-alpha), Re_p = rho d |w| / mu; the rho |w| pair
        # cancels, leaving 150 mu (1-alpha)^2 V w / (alpha d^2)
        hand = (150.0 * mu * (1.0 - alpha) ** 2 * inp.particle_volume * w
                / (alpha * inp.particle_diameter**2))
        np.testing.assert_allclose(christopher_middleman_drag(inp),
                                   hand, rtol=RTOL)
        fcm = fcm_factor(alpha, 1.0)
        assert fcm == pytest.approx(150.0 * (1.0 - alpha), rel=RTOL)


# -- properties --------------------------------------------------------------

def test_drag_odd_in_relative_velocity():
    rng = np.random.default_rng(107)
    for _ in range(20):
        inp = make_input(rng)
        flipped = DragInput(inp.fluid_density, inp.rheology,
                            inp.voidfraction, inp.particle_diameter,
                            inp.particle_volume, -inp.relative_velocity)
        np.testing.assert_array_equal(christopher_middleman_drag(flipped),
                                      -christopher_middleman_drag(inp))
    newt = make_input(rng, rheology=RheologyModel(1e-3, 1.0))
    flipped = DragInput(newt.fluid_density, newt.rheology, newt.voidfraction,
                        newt.particle_diameter, newt.particle_volume,
                        -newt.relative_velocity)
    np.testing.assert_array_equal(di_felice_drag(flipped),
                                  -di_felice_drag(newt))


def test_cm_drag_power_law_speed_scaling():
    rng = np.random.default_rng(108)
    for _ in range(20):
        inp = make_input(rng)
        n = inp.rheology.flow_behavior_index
        doubled = DragInput(inp.fluid_density, inp.rheology,
                            inp.voidfraction, inp.particle_diameter,
                            inp.particle_volume,
                            2.0 * inp.relative_velocity)
        f1 = np.linalg.norm(christopher_middleman_drag(inp))
        f2 = np.linalg.norm(christopher_middleman_drag(doubled))
        assert f2 == pytest.approx(2.0**n * f1, rel=1e-10)


def test_cm_drag_vanishes_limits():
    inp = DragInput(1000.0, GUAR, 0.6, 0.002, 4e-9, np.zeros(3))
    np.testing.assert_array_equal(christopher_middleman_drag(inp), 0.0)
    open_cell = DragInput(1000.0, GUAR, 1.0, 0.002, 4e-9,
                          np.array([0.1, 0.0, 0.0]))
    np.testing.assert_array_equal(christopher_middleman_drag(open_cell), 0.0)
    alphas = np.linspace(0.9, 0.999999, 50)
    mags = [np.linalg.norm(christopher_middleman_drag(
        DragInput(1000.0, GUAR, a, 0.002, 4e-9, np.array([0.1, 0, 0]))))
        for a in alphas]
    assert mags[-1] < 1e-6 * mags[0]


def test_cm_drag_errors_and_dispatch():
    solid = DragInput(1000.0, GUAR, 0.0, 0.002, 4e-9, np.ones(3))
    with pytest.raises(ValueError):
        christopher_middleman_drag(solid)
    nonnewt = DragInput(1000.0, GUAR, 0.6, 0.002, 4e-9, np.ones(3))
    with pytest.raises(ValueError):
        di_felice_drag(nonnewt)
    with pytest.raises(ValueError):
        drag_force(nonnewt, model="nope")
    np.testing.assert_array_equal(drag_force(nonnewt, "cm"),
                                  christopher_middleman_drag(nonnewt))


def test_dimensional_audit():
    """Scaling lengths by s and velocities by s multiplies the CM force by
    s^(n-1) * s * s^3 / s^(n+1) = s^2 (V ~ s^3, d ~ s, |w| ~ s)."""
    rng = np.random.default_rng(109)
    s = 3.7
    for _ in range(10):
        inp = make_input(rng)
        n = inp.rheology.flow_behavior_index
        scaled = DragInput(inp.fluid_density, inp.rheology, inp.voidfraction,
                           s * inp.particle_diameter,
                           s**3 * inp.particle_volume,
                           s * inp.relative_velocity)
        f = christopher_middleman_drag(inp)
        fs = christopher_middleman_drag(scaled)
        np.testing.assert_allclose(fs, s**2 * f, rtol=1e-10)
