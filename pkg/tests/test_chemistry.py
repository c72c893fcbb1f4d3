import math

import mpmath
import numpy as np
import pytest

from corrocrack.chemistry import (UA_CM2, ChemistryConstants, RustComposition, box_reaction_fraction,
                                  composition, expansion_coefficient, faraday_flux,
                                  faraday_penetration_rate, flux_reduction, hydroxide_mass_fraction,
                                  oxide_rate_constant)
from corrocrack.errors import ConfigError, DomainError

C = ChemistryConstants()
SECONDS_PER_YEAR = 365.25 * 86400.0


def kf_oracle(t_r, S_l, k_II_o, consts, D_c_eff, dps=40):
    """Two-layer stationary flux ratio evaluated in high precision."""
    mpmath.mp.dps = dps
    k = mpmath.mpf(k_II_o) + mpmath.mpf(consts.c_ox) * consts.k_II_III
    Dr, Dc = mpmath.mpf(consts.D_r), mpmath.mpf(S_l) * D_c_eff
    Ar = mpmath.mpf(t_r) * mpmath.sqrt(k / Dr)
    Ac = mpmath.mpf(consts.t_c) * mpmath.sqrt(k / Dc)
    sc = mpmath.sqrt(Dc) * mpmath.coth(Ac)
    return float(mpmath.sech(Ar) * sc / (sc + mpmath.sqrt(Dr) * mpmath.tanh(Ar)))


class TestComposition:
    def test_reference_fraction(self):
        assert hydroxide_mass_fraction(1 * UA_CM2, C) == pytest.approx(0.9, rel=1e-14)

    def test_fifty_gives_half(self):
        assert hydroxide_mass_fraction(50 * UA_CM2, C) == pytest.approx(0.5, rel=1e-12)

    def test_capped_at_one(self):
        assert hydroxide_mass_fraction(1e-4 * UA_CM2, C) == 1.0

    def test_decreasing(self):
        r = [hydroxide_mass_fraction(i * UA_CM2, C) for i in (1, 10, 100, 500)]
        assert all(a > b for a, b in zip(r, r[1:]))

    def test_zero_current_rejected(self):
        with pytest.raises(DomainError):
            hydroxide_mass_fraction(0.0, C)

    def test_expansion_at_reference(self):
        assert expansion_coefficient(0.9, C) == pytest.approx(0.9 * 3.3 + 0.1 * 2.0, rel=1e-14)
        assert expansion_coefficient(0.9, C) == pytest.approx(3.17, abs=1e-12)

    def test_expansion_limits(self):
        assert expansion_coefficient(0.0, C) == C.kappa_o
        assert expansion_coefficient(1.0, C) == C.kappa_h
        with pytest.raises(DomainError):
            expansion_coefficient(1.2, C)

    def test_derived_densities(self):
        assert C.rho_h == pytest.approx(0.08885 * 7870 / (3.3 * 0.05585), rel=1e-14)
        assert C.rho_o == pytest.approx(0.07985 * 7870 / (2.0 * 0.05585), rel=1e-14)

    def test_oxide_rate_vanishes_at_full_hydroxide(self):
        assert oxide_rate_constant(1.0, C) == 0.0

    def test_printed_form_drops_fraction(self):
        printed = C.with_(oxide_rate_form="printed")
        assert oxide_rate_constant(0.5, C) == pytest.approx(2.0 * oxide_rate_constant(0.5, printed))

    def test_invalid_constants(self):
        with pytest.raises(ConfigError):
            C.with_(k2=0.1)
        with pytest.raises(ConfigError):
            C.with_(kappa_o=4.0)

    def test_composition_bundle(self):
        comp = composition(10 * UA_CM2, C)
        assert isinstance(comp, RustComposition)
        assert comp.kappa == pytest.approx(expansion_coefficient(comp.r_h, C))


class TestFaraday:
    def test_penetration_rate_one_ua(self):
        # 1 uA/cm2 corresponds to about 11.6 um/year of steel loss
        rate = faraday_penetration_rate(1 * UA_CM2, C) * SECONDS_PER_YEAR
        assert rate == pytest.approx(11.6e-6, rel=5e-3)

    def test_flux_one_a_per_m2(self):
        assert faraday_flux(1.0, C) == pytest.approx(1.0 / (2 * 96485.33212), rel=1e-14)
        assert faraday_flux(1e-2, C) == pytest.approx(5.18e-8, rel=1e-3)

    def test_linear_in_current(self):
        assert faraday_flux(3.0, C) == pytest.approx(3.0 * faraday_flux(1.0, C), rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            faraday_penetration_rate(-1.0, C)


class TestFluxReduction:
    comp = composition(1 * UA_CM2, C)
    D = 1e-11 / 0.26

    def test_bare_bar_saturated(self):
        assert flux_reduction(0.0, 1.0, self.comp, C, self.D) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("t_r", [1e-6, 5e-6, 2e-5, 1e-4])
    def test_against_high_precision(self, t_r):
        got = flux_reduction(t_r, 0.8, self.comp, C, self.D)
        assert got == pytest.approx(kf_oracle(t_r, 0.8, self.comp.k_II_o, C, self.D), rel=1e-10)

    def test_typical_value(self):
        # 10 um of rust at the reference current removes roughly a quarter of the flux
        k = flux_reduction(1e-5, 1.0, self.comp, C, self.D)
        assert k == pytest.approx(kf_oracle(1e-5, 1.0, self.comp.k_II_o, C, self.D), rel=1e-10)
        assert 0.6 < k < 0.9

    def test_monotone_and_vanishing(self):
        t = np.linspace(0.0, 1e-4, 400)
        k = np.array([flux_reduction(x, 1.0, self.comp, C, self.D) for x in t])
        assert np.all(np.diff(k) < 0.0)
        assert flux_reduction(1e-2, 1.0, self.comp, C, self.D) < 1e-6

    def test_dry_concrete_blocks(self):
        assert flux_reduction(1e-6, 0.0, self.comp, C, self.D) == 0.0

    def test_invalid_saturation(self):
        with pytest.raises(DomainError):
            flux_reduction(1e-6, 1.5, self.comp, C, self.D)


class TestBoxOracle:
    @pytest.mark.parametrize("i_uA", [1, 10, 100])
    def test_closed_form(self, i_uA):
        # both paths drain c_II; every Fe3+ ends as hydroxy-oxide
        comp = composition(i_uA * UA_CM2, C)
        k_ox = C.k_II_III * C.c_ox
        frac = k_ox * C.M_h / (k_ox * C.M_h + comp.k_II_o * C.M_o)
        assert frac == pytest.approx(comp.r_h, rel=1e-12)

    @pytest.mark.parametrize("i_uA", [1, 10, 100])
    def test_ode_matches_fit(self, i_uA):
        comp = composition(i_uA * UA_CM2, C)
        assert box_reaction_fraction(comp.k_II_o, C) == pytest.approx(comp.r_h, rel=1e-6)

    def test_printed_form_misses_target(self):
        printed = C.with_(oxide_rate_form="printed")
        r_h = hydroxide_mass_fraction(100 * UA_CM2, C)
        got = box_reaction_fraction(oxide_rate_constant(r_h, printed), printed)
        assert abs(got - r_h) / r_h > 0.02
        assert math.isfinite(got)
