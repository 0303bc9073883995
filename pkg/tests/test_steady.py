import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from transonic_ep.eos import FlowPoint, PressureLaw, Regime, sonic_density
from transonic_ep.errors import SonicSingularity, UsageError
from transonic_ep.steady import (BackgroundCharge, IntegrateOptions, integrate, perturbation_growth,
                                 rhs)

LAW = PressureLaw.gamma_law(1.0, 2.0)
B = BackgroundCharge.constant(0.5, 1.0)


def test_constant_equilibrium_is_exact():
    prof = integrate(LAW, 1.0, B, 0.0, 1.0, FlowPoint(0.5, 0.0, 1.0))
    assert prof.regime is Regime.SUPERSONIC
    assert np.all(prof.rho == 0.5) and np.all(prof.E == 0.0)
    assert prof.poisson_residual() == 0.0


def test_supersonic_profile_against_rk4_oracle():
    prof = integrate(LAW, 1.0, B, 0.0, 0.7, FlowPoint(0.4, 0.2, 1.0), IntegrateOptions(tol=1e-12))
    rho, E = oracles.rk4_steady(0.4, 0.2, 0.0, 0.7, 4000)
    assert prof.rho[-1] == pytest.approx(rho, rel=1e-11)
    assert prof.E[-1] == pytest.approx(E, rel=1e-11)
    # E > 0 and rho > b: the field keeps decreasing density along the supersonic branch
    assert np.all(np.diff(prof.rho) < 0.0)


def test_backward_integration_retraces_forward():
    opts = IntegrateOptions(tol=1e-12)
    fwd = integrate(LAW, 1.0, B, 0.4, 1.0, FlowPoint(1.4, 0.15, 1.0), opts)
    back = integrate(LAW, 1.0, B, 1.0, 0.4, FlowPoint(fwd.rho[-1], fwd.E[-1], 1.0), opts)
    assert back.xs[0] == pytest.approx(0.4) and back.xs[-1] == 1.0
    assert back.rho[0] == pytest.approx(1.4, rel=1e-10)
    assert back.E[0] == pytest.approx(0.15, abs=1e-10)


def test_sonic_guard_stops_before_singularity():
    # negative field drives a supersonic state towards the sonic density
    with pytest.raises(SonicSingularity) as exc:
        integrate(LAW, 1.0, B, 0.0, 5.0, FlowPoint(0.6, -1.0, 1.0))
    assert 0.0 < exc.value.x < 5.0


def test_sonic_initial_state_rejected():
    rs = sonic_density(LAW, 1.0)
    with pytest.raises(SonicSingularity):
        integrate(LAW, 1.0, B, 0.0, 1.0, FlowPoint(rs, 0.1, 1.0))


def test_empty_interval_rejected():
    with pytest.raises(UsageError):
        integrate(LAW, 1.0, B, 0.3, 0.3, FlowPoint(0.4, 0.0, 1.0))


def test_rhs_matches_system():
    d = rhs(LAW, 1.0, 0.5, FlowPoint(1.4, 0.2, 1.0))
    gap = 2 * 1.4 - 1 / 1.4 ** 2
    assert d[0] == pytest.approx(1.4 * 0.2 / gap, rel=1e-14)
    assert d[1] == pytest.approx(0.9, rel=1e-14)


@pytest.mark.parametrize("spec, at, expect", [
    ({"kind": "constant", "value": 0.3}, 0.7, 0.3),
    ({"kind": "polynomial", "coefficients": [0.1, 0.2, 0.3]}, 0.5, 0.1 + 0.1 + 0.075),
    ({"kind": "fourier", "a0": 0.4, "cos": [0.1], "period": 1.0}, 0.25, 0.4),
    ({"kind": "samples", "x": [0.0, 1.0], "values": [0.2, 0.4]}, 0.5, 0.3),
])
def test_background_kinds(spec, at, expect):
    assert float(BackgroundCharge.from_spec(spec, 1.0)(at)) == pytest.approx(expect, rel=1e-14)


def test_background_errors():
    with pytest.raises(UsageError):
        BackgroundCharge.from_spec({"kind": "nope"}, 1.0)
    with pytest.raises(UsageError):
        BackgroundCharge.from_samples([0.0, 0.0], [1.0, 2.0])


@given(shape=st.sampled_from(["offset", "bump", "sinusoid"]), eps=st.floats(1e-6, 1e-1))
@settings(max_examples=30, deadline=None)
def test_perturbation_sup_norm(shape, eps):
    pb = B.perturbed(shape, eps)
    xs = np.linspace(0.0, 1.0, 4001)
    dev = np.max(np.abs(pb(xs) - B(xs)))
    assert dev == pytest.approx(eps, rel=1e-5)


def test_perturbation_growth_requires_shared_grid():
    a = integrate(LAW, 1.0, B, 0.0, 0.5, FlowPoint(0.4, 0.2, 1.0))
    c = integrate(LAW, 1.0, B, 0.0, 0.4, FlowPoint(0.4, 0.2, 1.0))
    with pytest.raises(UsageError):
        perturbation_growth(a, c)
    assert perturbation_growth(a, a) == (0.0, 0.0)
