"""Analysis pipeline tests: peak extraction, dimensionless groups,
classification and channel descriptors."""

import numpy as np
import pytest

from granufrac.analysis import (INV_PI1_THRESHOLD, TAU2_THRESHOLD,
                                Classification, CriteriaPoint,
                                channel_descriptors, classify_initiation,
                                criteria_point, fracture_metric,
                                peak_pressure, pi_groups, tau2)
from granufrac.config import GUAR, SimulationConfig, with_overrides


def make_point(inv_pi1, t2, observed=False):
    return CriteriaPoint(inv_pi1=inv_pi1, tau2=t2, inputs={},
                         observed_fracture=observed)


# -- peak pressure -----------------------------------------------------------

def test_peak_unsmoothed_path():
    p, t = peak_pressure([0.0, 1.0, 2.0], [0.0, 5.0, 3.0], window=1)
    assert (p, t) == (5.0, 1.0)


def test_peak_monotone_series_is_last_sample():
    t = np.linspace(0.0, 1.0, 20)
    p = np.linspace(0.0, 9.5, 20)
    peak, tp = peak_pressure(t, p)
    assert peak == 9.5 and tp == 1.0


def test_peak_median_filter_suppresses_spike():
    t = np.linspace(0.0, 1.0, 51)
    p = 100.0 * np.sin(np.pi * t)
    p[10] = 1e6                       # single-sample glitch
    peak, tp = peak_pressure(t, p, window=5)
    assert peak < 200.0
    assert tp == pytest.approx(0.5, abs=0.05)


def test_peak_ties_take_earliest():
    p, tp = peak_pressure([0, 1, 2, 3, 4, 5, 6],
                          [0, 4, 4, 4, 4, 4, 0], window=1)
    assert tp == 1


def test_peak_empty_series_rejected():
    with pytest.raises(ValueError):
        peak_pressure([], [])


# -- dimensionless groups ----------------------------------------------------

def test_pi_groups_worked_example():
    q = 1.4e-3 * (0.05 * 0.002)
    pi1, pi2 = pi_groups(6100.0, 1500.0, 11.0, 0.41, 2.23e-8, q)
    hand = (6100.0 / 11.0) * ((2.23e-8) ** 1.5 / q) ** 0.41
    assert pi1 == pytest.approx(hand, rel=1e-12)
    assert pi1 == pytest.approx(7.0, rel=0.05)
    assert 1.0 / pi1 == pytest.approx(0.14, rel=0.05)


def test_pi_groups_newtonian_reduction_and_identity():
    rng = np.random.default_rng(601)
    for _ in range(20):
        p, s3 = rng.uniform(1e2, 1e4, 2)
        mu = rng.uniform(1e-3, 10.0)
        k = rng.uniform(1e-10, 1e-7)
        q = rng.uniform(1e-9, 1e-5)
        pi1, pi2 = pi_groups(p, s3, mu, 1.0, k, q)
        assert pi1 == pytest.approx(p * k**1.5 / (mu * q), rel=1e-12)
        assert pi1 / pi2 == pytest.approx(p / s3, rel=1e-12)


def test_pi_groups_rejects_nonpositive():
    with pytest.raises(ValueError):
        pi_groups(0.0, 1000.0, 11.0, 0.41, 1e-8, 1e-7)
    with pytest.raises(ValueError):
        pi_groups(100.0, 1000.0, 11.0, 0.41, -1e-8, 1e-7)


def test_tau2_worked_example_and_proportionality():
    assert tau2(10.0, 0.6, 1.4e-3, 0.05, 1.0e6) \
        == pytest.approx(1.68e-7, rel=1e-12)
    assert tau2(10.0, 0.6, 1.4e-3, 0.05, 1.0e7) \
        == pytest.approx(1.68e-8, rel=1e-12)
    assert tau2(10.0, 0.6, 0.0, 0.05, 1.0e6) == 0.0


# -- classification ----------------------------------------------------------

def test_classify_worked_examples():
    assert classify_initiation(make_point(0.0, 0.0)).label == "no_fracture"
    assert classify_initiation(make_point(0.1, 1e-6)).label == "fracture"
    assert classify_initiation(make_point(0.05, 1e-6)).label == "no_fracture"
    assert classify_initiation(make_point(0.1, 1e-7)).label == "no_fracture"


def test_classify_margins():
    verdict = classify_initiation(make_point(0.1, 1e-6))
    assert verdict.margin_inv_pi1 == pytest.approx(0.1 - INV_PI1_THRESHOLD)
    assert verdict.margin_tau2 == pytest.approx(1e-6 - TAU2_THRESHOLD)


def test_classify_monotone():
    """Increasing either coordinate never flips fracture -> no_fracture."""
    rng = np.random.default_rng(602)
    for _ in range(200):
        x = rng.uniform(0.0, 0.2)
        y = rng.uniform(0.0, 5e-7)
        base = classify_initiation(make_point(x, y)).label
        up_x = classify_initiation(
            make_point(x + rng.uniform(0, 0.2), y)).label
        up_y = classify_initiation(
            make_point(x, y + rng.uniform(0, 5e-7))).label
        if base == "fracture":
            assert up_x == "fracture" and up_y == "fracture"


# -- channel descriptors -----------------------------------------------------

def grid_with_channel(depth, width=2, nx=12, ny=6):
    alpha = np.full((nx, ny), 0.4)
    j0 = ny // 2 - width // 2
    alpha[nx - depth:, j0:j0 + width] = 0.95
    mask = np.zeros(ny, dtype=bool)
    mask[j0:j0 + width] = True
    return alpha, mask


def test_channel_depth_and_aperture():
    alpha, mask = grid_with_channel(depth=4, width=2)
    desc = channel_descriptors(alpha, mask, (1e-2, 2e-2), 0.7)
    assert desc.length_cells == 4
    assert desc.length == pytest.approx(4 * 1e-2)
    assert desc.max_aperture == pytest.approx(2 * 2e-2)
    assert desc.cell_count == 8


def test_channel_absent_without_connection():
    alpha, mask = grid_with_channel(depth=4, width=2)
    alpha[-1] = 0.4                   # sever the inlet face: nothing reachable
    desc = channel_descriptors(alpha, mask, (1e-2, 2e-2), 0.7)
    assert desc.length_cells == 0
    assert desc.cell_count == 0


def test_channel_orientation():
    # straight channel along x (perpendicular to the inlet face)
    alpha, mask = grid_with_channel(depth=6, width=1)
    desc = channel_descriptors(alpha, mask, (1e-2, 1e-2), 0.7)
    assert abs(desc.orientation_deg) == pytest.approx(90.0, abs=1.0)


# -- fracture metric ---------------------------------------------------------

def metric_cfg():
    return SimulationConfig(bond_break_fraction=0.01,
                            channel_voidfraction=0.7, channel_min_cells=3)


def test_fracture_metric_quiescent_false():
    cfg = metric_cfg()
    alpha = np.full((12, 6), 0.4)
    mask = np.zeros(6, dtype=bool)
    mask[2:4] = True
    obs = fracture_metric(cfg, 0, 1800, alpha, mask, (1e-2, 1e-2))
    assert not obs.observed
    assert obs.channel.length_cells == 0


def test_fracture_metric_needs_both_conditions():
    cfg = metric_cfg()
    alpha, mask = grid_with_channel(depth=4, width=2)
    broken_enough = fracture_metric(cfg, 40, 1800, alpha, mask, (1e-2, 1e-2))
    assert broken_enough.observed
    too_few = fracture_metric(cfg, 5, 1800, alpha, mask, (1e-2, 1e-2))
    assert not too_few.observed       # channel present, bonds intact
    no_channel = fracture_metric(cfg, 40, 1800, np.full((12, 6), 0.4),
                                 mask, (1e-2, 1e-2))
    assert not no_channel.observed    # bonds broken, no channel


def test_fracture_metric_all_bonds_broken():
    cfg = metric_cfg()
    alpha, mask = grid_with_channel(depth=6, width=2)
    obs = fracture_metric(cfg, 1800, 1800, alpha, mask, (1e-2, 1e-2))
    assert obs.observed
    assert obs.broken_fraction == 1.0


# -- criteria_point assembly -------------------------------------------------

def test_criteria_point_assembles_inputs():
    cfg = with_overrides(SimulationConfig(), rheology=GUAR,
                         injection_velocity=1.4e-3, wellbore_width=0.05,
                         domain_extent=(0.6, 0.3, 0.002), sigma3=1500.0)
    point = criteria_point(cfg, p_peak=6100.0, permeability=2.23e-8,
                           phi_i=0.6, max_inlet_shear_rate=1.0,
                           observed_fracture=True)
    # Q = U * wellbore area; at gamma = 1 the apparent viscosity is K = 11
    assert point.inputs["flow_rate"] == pytest.approx(1.4e-3 * 0.05 * 0.002,
                                                      rel=1e-12)
    assert point.inputs["mu_apparent"] == pytest.approx(11.0, rel=1e-12)
    assert point.inv_pi1 == pytest.approx(
        1.0 / pi_groups(6100.0, 1500.0, 11.0, 0.41, 2.23e-8,
                        1.4e-3 * 1e-4)[0], rel=1e-12)
    assert point.tau2 == pytest.approx(
        tau2(11.0, 0.6, 1.4e-3, 0.05, cfg.material.youngs_modulus),
        rel=1e-12)
    assert point.observed_fracture
