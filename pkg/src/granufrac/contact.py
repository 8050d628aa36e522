"""Scalar contact-law reference implementation (Hertz + cohesive JKR).

Cohesion convention
-------------------
Cohesive bonds follow the classical JKR force-displacement relation,
parameterized so that the maximum tensile (pull-off) force of a bonded
contact is

    F_c = 3 pi * (2 * surface_energy_density) * R_eff

i.e. the work of adhesion entering the JKR formulas is
w = 4 * surface_energy_density (classical pull-off is (3/2) pi w R_eff).
With surface_energy_density = 0 the law reduces exactly to Hertz.

Broken or never-bonded contacts are pure Hertz: adhesion is dropped and
no new bonds form.

These scalar functions are the independent reference for the vectorized
step kernels; tests cross-check the two paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import MaterialParams


@dataclass(frozen=True)
class ContactLaw:
    """Precomputed constants for one contact kind (pair or particle-wall)."""

    r_eff: float
    e_star: float
    m_eff: float
    kn: float          # Hertz prefactor (4/3) E* sqrt(R*)
    w_adh: float       # work of adhesion in the JKR formulas
    c1: float          # sqrt(2 pi w / E*), delta(a) = a^2/R - c1 sqrt(a)
    fa: float          # 4 E* / (3 R*), F(a) = fa a^3 - fb a^(3/2)
    fb: float          # sqrt(8 pi w E*)
    a_c: float         # contact radius at the force minimum (pull-off)
    a_f: float         # fold point of delta(a); lower bracket for inversion
    delta_c: float     # separation at pull-off; bond breaks below this
    f_pulloff: float   # maximum tensile force magnitude
    damp_pref: float   # normal dashpot: c_n = damp_pref * delta^(1/4)
    kt_pref: float     # tangential stiffness: k_t = kt_pref * sqrt(delta)
    mu_fric: float

    @classmethod
    def build(cls, material: MaterialParams, r_i: float, m_i: float,
              r_j: float | None = None, m_j: float | None = None,
              frictionless: bool = False) -> "ContactLaw":
        """r_j = None builds the particle-wall law (flat rigid wall)."""
        if r_j is None:
            r_eff = r_i
            m_eff = m_i
        else:
            r_eff = 1.0 / (1.0 / r_i + 1.0 / r_j)
            m_eff = m_i * m_j / (m_i + m_j)
        e_star = material.effective_modulus
        kn = (4.0 / 3.0) * e_star * math.sqrt(r_eff)

        w = 4.0 * material.surface_energy_density
        if w > 0.0:
            c1 = math.sqrt(2.0 * math.pi * w / e_star)
            fa = 4.0 * e_star / (3.0 * r_eff)
            fb = math.sqrt(8.0 * math.pi * w * e_star)
            a_c = (9.0 * math.pi * w * r_eff**2 / (8.0 * e_star)) ** (1.0 / 3.0)
            a_f = a_c / 9.0 ** (1.0 / 3.0)
            delta_c = a_c**2 / r_eff - c1 * math.sqrt(a_c)
            f_pulloff = 1.5 * math.pi * w * r_eff
        else:
            c1 = fa = fb = a_c = a_f = 0.0
            delta_c = 0.0
            f_pulloff = 0.0

        e = material.restitution
        beta = -math.log(e) / math.sqrt(math.log(e) ** 2 + math.pi**2)
        # c_n = 2 sqrt(5/6) beta sqrt(S_n m_eff), S_n = 2 E* sqrt(R* delta)
        damp_pref = (2.0 * math.sqrt(5.0 / 6.0) * beta
                     * math.sqrt(2.0 * e_star * m_eff) * r_eff**0.25)

        g = material.shear_modulus
        g_star = g / (2.0 * (2.0 - material.poisson_ratio))
        kt_pref = 8.0 * g_star * math.sqrt(r_eff)

        mu = 0.0 if frictionless else material.friction_coefficient
        return cls(r_eff, e_star, m_eff, kn, w, c1, fa, fb, a_c, a_f,
                   delta_c, f_pulloff, damp_pref, kt_pref, mu)


def hertz_force(overlap: float, law: ContactLaw) -> float:
    """Repulsive Hertz force, 0 for non-positive overlap."""
    if overlap <= 0.0:
        return 0.0
    return law.kn * overlap * math.sqrt(overlap)


def jkr_contact_radius(overlap: float, law: ContactLaw) -> float:
    """Invert delta(a) = a^2/R - c1 sqrt(a) on the stable branch (a > a_f).

    Fixed-count Newton from above the root: delta(a) is convex with a
    single root right of the fold a_f, so the iteration is monotone and
    deterministic (identical schedule in every backend). Valid for
    overlap >= delta_c.
    """
    a = max(2.0 * law.a_c,
            math.sqrt(max(overlap, 0.0) * law.r_eff) + law.a_c)
    while a * a / law.r_eff - law.c1 * math.sqrt(a) < overlap:
        a *= 2.0
    for _ in range(12):
        s = math.sqrt(a)
        f = a * a / law.r_eff - law.c1 * s - overlap
        fp = 2.0 * a / law.r_eff - 0.5 * law.c1 / s
        a -= f / fp
    return a


def jkr_force(overlap: float, law: ContactLaw) -> float:
    """Signed JKR normal force (positive = repulsive) for a bonded contact.

    Valid down to the pull-off separation delta_c; below it the bond is
    considered broken and the caller must not ask for a force.
    """
    if law.w_adh == 0.0:
        return hertz_force(overlap, law)
    if overlap < law.delta_c:
        raise ValueError("separation beyond pull-off: bond is broken")
    a = jkr_contact_radius(overlap, law)
    return law.fa * a**3 - law.fb * a**1.5


def jkr_normal_force(overlap: float, r_i: float, r_j: float,
                     material: MaterialParams, bonded: bool) -> float:
    """Spec-level entry point: normal force for a pair contact.

    Unbonded (or zero surface energy) -> pure Hertz; bonded -> JKR branch
    with the tensile tail.
    """
    rho = material.density
    m_i = rho * (4.0 / 3.0) * math.pi * r_i**3
    m_j = rho * (4.0 / 3.0) * math.pi * r_j**3
    law = ContactLaw.build(material, r_i, m_i, r_j, m_j)
    if bonded and material.surface_energy_density > 0.0:
        return jkr_force(overlap, law)
    if overlap < 0.0:
        raise ValueError("negative overlap on an unbonded contact")
    return hertz_force(overlap, law)


def pulloff_force(r_i: float, r_j: float, material: MaterialParams) -> float:
    """F_c = 3 pi (2 gamma_s) R_eff (see module docstring)."""
    r_eff = 1.0 / (1.0 / r_i + 1.0 / r_j)
    return 3.0 * math.pi * (2.0 * material.surface_energy_density) * r_eff


def damping_force(overlap: float, rel_normal_velocity: float,
                  law: ContactLaw) -> float:
    """Normal dashpot force (scalar along the contact normal, acting on i).

    rel_normal_velocity > 0 means the particles approach; the returned
    value is the force component along the i->j normal applied to i, so
    force * velocity <= 0 always (dissipative).
    """
    if overlap <= 0.0:
        return 0.0
    c_n = law.damp_pref * overlap**0.25
    return -c_n * rel_normal_velocity


def elastic_energy(overlap: float, law: ContactLaw) -> float:
    """Stored Hertz elastic energy (8/15) E* sqrt(R*) delta^(5/2)."""
    if overlap <= 0.0:
        return 0.0
    return 0.4 * law.kn * overlap**2.5
