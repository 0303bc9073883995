import math

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from transonic_ep.eos import FlowPoint, PressureLaw, momentum_flux, sonic_density
from transonic_ep.errors import DegenerateJump, DomainError
from transonic_ep.jump import (conjugate_derivative, conjugate_state, is_entropy_admissible, shock_speed,
                               steady_jump)


def test_closed_form_conjugates():
    assert conjugate_state(PressureLaw.isothermal(1.0), 1.0, 0.5) == pytest.approx(2.0, abs=1e-10)
    expect = (-1.0 + math.sqrt(33.0)) / 4.0
    assert conjugate_state(PressureLaw.gamma_law(1.0, 2.0), 1.0, 0.5) == pytest.approx(expect, abs=1e-10)


@given(rho=st.floats(0.05, 0.79))
@settings(max_examples=50, deadline=None)
def test_gamma2_conjugate_matches_closed_form(rho):
    law = PressureLaw.gamma_law(1.0, 2.0)
    if rho >= sonic_density(law, 1.0):
        return
    assert conjugate_state(law, 1.0, rho) == pytest.approx(oracles.conjugate_gamma2(rho), rel=1e-12)


@given(family=st.sampled_from(["gamma", "iso"]), k=st.floats(0.2, 5.0), gamma=st.floats(1.05, 3.0),
       J=st.floats(0.1, 3.0), frac=st.floats(0.05, 0.98))
@settings(max_examples=100, deadline=None)
def test_conjugate_flux_identity_and_entropy(family, k, gamma, J, frac):
    law = PressureLaw.isothermal(k) if family == "iso" else PressureLaw.gamma_law(k, gamma)
    rs = sonic_density(law, J)
    rho = frac * rs
    s = conjugate_state(law, J, rho)
    f = momentum_flux(law, rho, J)
    assert abs(momentum_flux(law, s, J) - f) <= 1e-12 * f
    assert s > rs
    pair = steady_jump(law, J, FlowPoint(rho, 0.3, J))
    assert is_entropy_admissible(law, pair.upstream, pair.downstream, pair.shock_speed)
    mass, mom, field = pair.residuals(law)
    assert mass == 0.0 and abs(mom) <= 1e-12 * f and field == 0.0


def test_conjugate_is_involutive_on_gamma_law():
    law = PressureLaw.gamma_law(2.0, 1.4)
    # flux is convex in rho with its minimum at the sonic state; pairs are swapped by the map's inverse
    rho = 0.3 * sonic_density(law, 1.0)
    s = conjugate_state(law, 1.0, rho)
    assert momentum_flux(law, s, 1.0) == pytest.approx(momentum_flux(law, rho, 1.0), rel=1e-13)


def test_conjugate_derivative_against_finite_difference():
    law = PressureLaw.gamma_law(1.0, 2.0)
    h = 1e-6
    fd = (conjugate_state(law, 1.0, 0.4 + h) - conjugate_state(law, 1.0, 0.4 - h)) / (2 * h)
    assert conjugate_derivative(law, 1.0, 0.4) == pytest.approx(fd, rel=1e-7)
    assert conjugate_derivative(law, 1.0, 0.4) < 0.0


def test_subsonic_input_rejected():
    with pytest.raises(DomainError):
        conjugate_state(PressureLaw.gamma_law(1.0, 2.0), 1.0, 1.2)


def test_sonic_input_maps_to_itself():
    law = PressureLaw.gamma_law(1.0, 2.0)
    rs = sonic_density(law, 1.0)
    assert conjugate_state(law, 1.0, rs) == pytest.approx(rs, rel=1e-7)


def test_shock_speed_and_degenerate_jump():
    law = PressureLaw.gamma_law(1.0, 2.0)
    s, mismatch = shock_speed(law, FlowPoint(0.5, 0.0, 1.0), FlowPoint(1.0, 0.0, 0.5))
    assert s == pytest.approx(-1.0)
    with pytest.raises(DegenerateJump):
        shock_speed(law, FlowPoint(0.5, 0.0, 1.0), FlowPoint(0.5, 0.0, 0.7))


def test_expansion_shock_is_inadmissible():
    law = PressureLaw.gamma_law(1.0, 2.0)
    s = conjugate_state(law, 1.0, 0.5)
    assert not is_entropy_admissible(law, FlowPoint(s, 0.0, 1.0), FlowPoint(0.5, 0.0, 1.0), 0.0)
