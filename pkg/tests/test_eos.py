import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transonic_ep.eos import FlowPoint, PressureLaw, Regime, momentum_flux, regime, sonic_density
from transonic_ep.errors import DomainError, UsageError


def test_sonic_density_closed_forms():
    # gamma law: rho^2 * k*gamma*rho^(gamma-1) = J^2  =>  rho_s = (J^2/(k gamma))^(1/(gamma+1))
    law = PressureLaw.gamma_law(1.0, 2.0)
    assert sonic_density(law, 1.0) == pytest.approx(0.5 ** (1.0 / 3.0), rel=1e-14)
    law = PressureLaw.gamma_law(0.7, 5.0 / 3.0)
    expect = (2.0 ** 2 / (0.7 * 5.0 / 3.0)) ** (1.0 / (8.0 / 3.0))
    assert sonic_density(law, 2.0) == pytest.approx(expect, rel=1e-13)
    assert sonic_density(PressureLaw.isothermal(4.0), 1.0) == pytest.approx(0.5, rel=1e-15)


@given(k=st.floats(0.1, 10.0), gamma=st.floats(1.0, 4.0), J=st.floats(0.05, 5.0))
@settings(max_examples=60, deadline=None)
def test_sonic_density_solves_sonic_condition(k, gamma, J):
    law = PressureLaw.gamma_law(k, gamma)
    rs = sonic_density(law, J)
    assert float(law.dp(rs)) == pytest.approx(J * J / rs ** 2, rel=1e-10)
    # minimum of the momentum flux
    assert momentum_flux(law, rs, J) <= momentum_flux(law, rs * (1 + 1e-4), J)
    assert momentum_flux(law, rs, J) <= momentum_flux(law, rs * (1 - 1e-4), J)


def test_regime_classification():
    law = PressureLaw.gamma_law(1.0, 2.0)
    rs = sonic_density(law, 1.0)
    assert regime(law, FlowPoint(0.4, 0.0, 1.0)) is Regime.SUPERSONIC
    assert regime(law, FlowPoint(1.4, 0.0, 1.0)) is Regime.SUBSONIC
    assert regime(law, FlowPoint(rs, 0.0, 1.0)) is Regime.SONIC


def test_isothermal_flagged_relaxed_origin():
    assert PressureLaw.isothermal(1.0).relaxed_origin
    assert not PressureLaw.gamma_law(1.0, 2.0).relaxed_origin


@pytest.mark.parametrize("kwargs", [dict(kind="bad", k=1.0), dict(kind="gamma_law", k=-1.0, gamma=2.0),
                                    dict(kind="gamma_law", k=1.0, gamma=0.5)])
def test_invalid_law(kwargs):
    with pytest.raises(UsageError):
        PressureLaw(**kwargs)


def test_domain_errors():
    with pytest.raises(DomainError):
        FlowPoint(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        sonic_density(PressureLaw.gamma_law(1.0, 2.0), 0.0)


@given(gamma=st.sampled_from([1.0, 1.4, 5.0 / 3.0, 2.0, 3.0]), rho=st.floats(0.2, 3.0),
       z=st.floats(-0.5, 0.5))
@settings(max_examples=100, deadline=None)
def test_pressure_remainder_matches_direct_difference(gamma, rho, z):
    law = PressureLaw.gamma_law(1.3, gamma)
    y = z * rho
    direct = law.p(rho + y) - law.p(rho) - law.dp(rho) * y
    rem = float(law.remainder(rho, y))
    assert rem == pytest.approx(direct, abs=1e-13 * law.p(rho), rel=1e-9)


def test_remainder_small_argument_keeps_relative_accuracy():
    law = PressureLaw.gamma_law(1.0, 1.4)
    y = 1e-9
    exact = 0.5 * law.d2p(1.0) * y * y  # leading term; next term is O(y^3)
    assert float(law.remainder(1.0, y)) == pytest.approx(exact, rel=1e-8)
    assert math.isfinite(float(np.sum(law.remainder(np.ones(3), np.zeros(3)))))
