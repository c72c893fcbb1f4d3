"""Closed-form rust chemistry.

Composition of rust as a function of the applied current density, the
resulting volumetric expansion, the oxide precipitation rate constant,
Faraday kinematics and the flux reduction coefficient ``k_f`` of the
dense rust layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError

FARADAY = 96485.33212  # C/mol
UA_CM2 = 1e-2          # 1 uA/cm2 in A/m2


@dataclass(frozen=True)
class ChemistryConstants:
    """Rust and reaction constants (SI units).

    The rust densities default to values derived from the molar volume
    ratios, ``rho_x = M_x * rho_Fe / (kappa_x * M_Fe)``, so that the
    precipitate volumes are consistent with the expansion coefficients.
    """

    k_II_III: float = 0.1          # mol^-1 m^3 s^-1, Fe2+ -> Fe3+
    k_III_h: float = 2e-4          # s^-1, Fe3+ -> FeO(OH)
    c_ox: float = 0.28             # mol/m3
    M_Fe: float = 0.05585          # kg/mol
    rho_Fe: float = 7870.0         # kg/m3
    M_o: float = 0.07985           # kg per mol Fe, 1/2 Fe2O3
    M_h: float = 0.08885           # kg per mol Fe, FeO(OH)
    kappa_o: float = 2.0
    kappa_h: float = 3.3
    rho_o: float = field(default=None)  # type: ignore[assignment]
    rho_h: float = field(default=None)  # type: ignore[assignment]
    z_a: float = 2.0
    F: float = FARADAY
    i_a_ref: float = 1.0 * UA_CM2  # A/m2
    k1: float = 0.9
    k2: float = math.log(0.5 / 0.9) / math.log(50.0)
    D_r: float = 1e-10             # m2/s, iron in rust
    t_c: float = 2e-3              # m
    oxide_rate_form: str = "mass-balance"  # or "printed"

    def __post_init__(self):
        if self.rho_o is None:
            object.__setattr__(self, "rho_o", self.M_o * self.rho_Fe / (self.kappa_o * self.M_Fe))
        if self.rho_h is None:
            object.__setattr__(self, "rho_h", self.M_h * self.rho_Fe / (self.kappa_h * self.M_Fe))
        for name in ("k_II_III", "k_III_h", "c_ox", "M_Fe", "rho_Fe", "M_o", "M_h",
                     "rho_o", "rho_h", "z_a", "F", "i_a_ref", "D_r", "t_c"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"chemistry.{name} must be > 0")
        if not self.k2 < 0.0:
            raise ConfigError("chemistry.k2 must be negative")
        if not (0.0 < self.k1 <= 1.0):
            raise ConfigError("chemistry.k1 must lie in (0, 1]")
        if not (self.kappa_h > self.kappa_o > 1.0):
            raise ConfigError("rust expansion ratios must satisfy kappa_h > kappa_o > 1")
        if self.oxide_rate_form not in ("mass-balance", "printed"):
            raise ConfigError("chemistry.oxide_rate_form must be 'mass-balance' or 'printed'")

    def with_(self, **kw) -> "ChemistryConstants":
        kw.setdefault("rho_o", None)
        kw.setdefault("rho_h", None)
        return replace(self, **kw)


@dataclass(frozen=True)
class RustComposition:
    r_h: float
    kappa: float
    k_II_o: float


def hydroxide_mass_fraction(i_a: float, consts: ChemistryConstants) -> float:
    """Mass fraction of hydroxy-oxides in rust formed at current density ``i_a``.

    ``r_h = min(1, k1 * (i_a / i_a_ref) ** k2)``.
    """
    if not i_a > 0.0:
        raise DomainError("hydroxide_mass_fraction requires i_a > 0")
    return min(1.0, consts.k1 * (i_a / consts.i_a_ref) ** consts.k2)


def expansion_coefficient(r_h: float, consts: ChemistryConstants) -> float:
    if not (0.0 <= r_h <= 1.0):
        raise DomainError(f"r_h={r_h} outside [0, 1]")
    return r_h * consts.kappa_h + (1.0 - r_h) * consts.kappa_o


def oxide_rate_constant(r_h: float, consts: ChemistryConstants) -> float:
    """Rate constant of direct Fe2+ -> oxide precipitation [1/s].

    Chosen so that, in a closed well-mixed volume, the two competing paths
    (oxidation followed by hydroxy-oxide precipitation, and direct oxide
    precipitation) deliver a hydroxy-oxide mass fraction ``r_h``.  With
    ``oxide_rate_form="printed"`` the ``1/r_h`` factor is dropped.
    """
    if not (0.0 < r_h <= 1.0):
        raise DomainError(f"oxide_rate_constant needs 0 < r_h <= 1, got {r_h}")
    base = consts.k_II_III * consts.c_ox * (consts.M_h / consts.M_o) * (1.0 - r_h)
    if consts.oxide_rate_form == "printed":
        return base
    return base / r_h


def composition(i_a: float, consts: ChemistryConstants) -> RustComposition:
    r_h = hydroxide_mass_fraction(i_a, consts)
    return RustComposition(r_h, expansion_coefficient(r_h, consts), oxide_rate_constant(r_h, consts))


def faraday_penetration_rate(i_a: float, consts: ChemistryConstants) -> float:
    """Corrosion penetration rate ``d t_cor / dt`` [m/s]."""
    if i_a < 0.0:
        raise DomainError("current density must be >= 0")
    return i_a * consts.M_Fe / (consts.z_a * consts.F * consts.rho_Fe)


def faraday_flux(i_a: float, consts: ChemistryConstants) -> float:
    """Ferrous ion flux released by the anode [mol m^-2 s^-1]."""
    if i_a < 0.0:
        raise DomainError("current density must be >= 0")
    return i_a / (consts.z_a * consts.F)


def flux_reduction(t_r: float, S_l: float, comp: RustComposition,
                   consts: ChemistryConstants, D_c_eff: float) -> float:
    """Fraction ``k_f`` of the Faraday flux that leaves the dense rust layer.

    Stationary two-layer solution: ``t_r`` of rust with diffusivity ``D_r``
    followed by ``t_c`` of concrete with diffusivity ``S_l * D_c_eff``, both
    with first-order consumption ``k_II_o + c_ox * k_II_III``.
    """
    if t_r < 0.0 or D_c_eff < 0.0:
        raise DomainError("flux_reduction needs t_r >= 0 and D_c_eff >= 0")
    if not (0.0 <= S_l <= 1.0):
        raise DomainError(f"S_l={S_l} outside [0, 1]")
    if S_l == 0.0 or D_c_eff == 0.0:
        return 0.0
    k_sum = comp.k_II_o + consts.c_ox * consts.k_II_III
    D_c = S_l * D_c_eff
    A_r = t_r * math.sqrt(k_sum / consts.D_r)
    A_c = consts.t_c * math.sqrt(k_sum / D_c)
    # 2 e^A / (1 + e^2A) = 1 / cosh(A), evaluated as 2 e^-A / (1 + e^-2A)
    sech = 2.0 * math.exp(-A_r) / (1.0 + math.exp(-2.0 * A_r))
    coth_c = 1.0 / math.tanh(A_c) if A_c < 20.0 else 1.0
    sc = math.sqrt(D_c) * coth_c
    k_f = sech * sc / (sc + math.sqrt(consts.D_r) * math.tanh(A_r))
    return min(1.0, max(0.0, k_f))


def box_reaction_fraction(k_II_o: float, consts: ChemistryConstants, c0: float = 1.0,
                          t_end: float = None) -> float:
    """Hydroxy-oxide mass fraction reached in a closed, well-mixed volume.

    Integrates the Fe2+/Fe3+ reaction system with precipitate bookkeeping
    using a stiff ODE solver until the dissolved iron is exhausted.
    """
    from scipy.integrate import solve_ivp

    k_ox = consts.k_II_III * consts.c_ox
    slowest = min(k_II_o + k_ox, consts.k_III_h)
    if t_end is None:
        t_end = 60.0 / slowest

    def rhs(_t, y):
        c2, c3, n_o, n_h = y
        return [-(k_II_o + k_ox) * c2,
                k_ox * c2 - consts.k_III_h * c3,
                k_II_o * c2,
                consts.k_III_h * c3]

    sol = solve_ivp(rhs, (0.0, t_end), [c0, 0.0, 0.0, 0.0], method="Radau",
                    rtol=1e-10, atol=1e-14 * c0)
    _, _, n_o, n_h = sol.y[:, -1]
    m_o, m_h = n_o * consts.M_o, n_h * consts.M_h
    return float(m_h / (m_o + m_h))
