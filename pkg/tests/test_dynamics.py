import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transonic_ep.dynamics import (DynamicsOptions, PerturbationState, SubsonicDynamics, Transform,
                                   bump_initial, evolve_and_measure, fit_log_decay, step)
from transonic_ep.errors import StateInvalid, UsageError
from transonic_ep.linear import LinearOperator, rk4


@pytest.fixture(scope="module")
def dyn(bench_base):
    return SubsonicDynamics(bench_base)


@given(x0=st.floats(0.05, 0.6), length=st.floats(0.1, 1.0), sigma=st.floats(-0.04, 0.04))
@settings(max_examples=50, deadline=None)
def test_transform_identities(x0, length, sigma):
    tr = Transform(x0, x0 + length)
    assert tr.q1(x0, 0.0) == pytest.approx(1.0)
    assert tr.q1(tr.L, sigma) == 0.0
    assert tr.q2(0.0) == 1.0
    assert float(tr.physical(x0, sigma)) == pytest.approx(x0 + sigma)
    assert float(tr.physical(tr.L, sigma)) == pytest.approx(tr.L)


def test_flux_at_zero_perturbation(dyn, bench_base):
    b = bench_base
    f = dyn.nonlinear_flux(0.0, 0.0, b.xs)
    np.testing.assert_allclose(f, b.law.p(b.rho) + b.J ** 2 / b.rho, rtol=1e-14)


def test_flux_linearization_reproduces_tables(dyn, bench_base):
    b, h = bench_base, 1e-6
    idx = np.arange(0, b.n + 1, 8)
    x = b.xs[idx]
    dYx = (dyn.nonlinear_flux(0.0, h, x) - dyn.nonlinear_flux(0.0, -h, x)) / (2 * h)
    dYt = (dyn.nonlinear_flux(h, 0.0, x) - dyn.nonlinear_flux(-h, 0.0, x)) / (2 * h)
    np.testing.assert_allclose(dYx, b.a[idx], rtol=1e-6)
    np.testing.assert_allclose(dYt, -2.0 * b.u[idx], rtol=1e-6)


@given(yx=st.floats(-0.3, 0.3), p=st.floats(-0.3, 0.3))
@settings(max_examples=50, deadline=None)
def test_flux_increment_equals_flux_difference(dyn, bench_base, yx, p):
    b = bench_base
    x = b.xs[::10]
    direct = dyn.nonlinear_flux(p, yx, x) - dyn.nonlinear_flux(0.0, 0.0, x)
    inc = dyn.flux_increment(b.rho[::10], yx, p)
    np.testing.assert_allclose(inc, direct, atol=1e-13)


def test_vacuum_detected(dyn, bench_base):
    with pytest.raises(StateInvalid):
        dyn.nonlinear_flux(0.0, -10.0, bench_base.xs[:3])


def test_zero_state_is_fixed_point(dyn, bench_base):
    z = np.zeros(bench_base.n + 1)
    s = step(PerturbationState(0.0, z, z.copy()), dyn.stable_dt(), dyn)
    assert np.all(s.Y == 0.0) and np.all(s.Yt == 0.0)
    assert s.sigma == 0.0 and s.sigma_dot == 0.0


def test_cfl_violation(dyn, bench_base):
    z = np.zeros(bench_base.n + 1)
    with pytest.raises(UsageError):
        step(PerturbationState(0.0, z, z.copy()), 2.0 * dyn.stable_dt(), dyn)


def test_small_amplitude_follows_linear_scheme(dyn, bench_base):
    amp = 1e-6
    init = bump_initial(bench_base, amp)
    Y = dyn.project(init.Y, init.Yt)
    state = dyn.state_from(0.0, Y, init.Yt.copy())
    dt = dyn.stable_dt()
    op = LinearOperator(bench_base)
    x = np.concatenate([Y, init.Yt])
    for _ in range(100):
        state = step(state, dt, dyn)
        x = rk4(op.rhs, x, dt)
    Yl, Vl = op.split(x)
    scale = np.max(np.abs(Yl)) + np.max(np.abs(Vl))
    err = np.max(np.abs(state.Y - Yl)) + np.max(np.abs(state.Yt - Vl))
    assert err / scale <= 1e-4


def test_wave_part_time_reversal(bench_base):
    dyn = SubsonicDynamics(bench_base, DynamicsOptions(wave_only=True))
    init = bump_initial(bench_base, 1e-2)
    errs = []
    for k in (1, 2):
        dt = dyn.stable_dt() / k
        s = PerturbationState(0.0, init.Y.copy(), init.Yt.copy())
        for _ in range(40 * k):
            s = step(s, dt, dyn)
        for _ in range(40 * k):
            s = step(s, -dt, dyn)
        errs.append(np.max(np.abs(s.Y - init.Y)) / np.max(np.abs(init.Y)))
    assert errs[0] < 1e-6
    assert errs[1] <= errs[0] / 4 + 1e-15


def test_sigma_slaved_to_boundary_value(dyn, bench_base):
    res = evolve_and_measure(bump_initial(bench_base, 1e-3), 1.0, dyn)
    assert res.slaving_error <= 1e-12
    sh = dyn.shock
    assert res.final.sigma == pytest.approx(sh.A3(float(res.final.Y[0])), abs=1e-15)
    # the shock moves opposite to the potential at the shock
    assert np.sign(res.column("sigma")[0]) == -np.sign(bump_initial(bench_base, 1e-3).Y[0])


def test_zero_initial_data_gives_flat_trajectory(dyn, bench_base):
    z = np.zeros(bench_base.n + 1)
    res = evolve_and_measure(PerturbationState(0.0, z, z.copy()), 0.5, dyn)
    assert np.all(res.trajectory[:, 1:] == 0.0)
    assert np.isnan(res.lambda_fit)


def test_fit_log_decay_exact_exponential():
    t = np.linspace(0.0, 5.0, 51)
    lam, r2 = fit_log_decay(t, 3.0 * np.exp(-0.7 * t))
    assert lam == pytest.approx(0.7, rel=1e-12) and r2 == pytest.approx(1.0)


def test_decay_rate_converges_under_refinement(bench_solution):
    from transonic_ep.base import SubsonicBase
    lams = []
    for n in (64, 128):
        base = SubsonicBase(bench_solution, n)
        d = SubsonicDynamics(base)
        lams.append(evolve_and_measure(bump_initial(base, 1e-3), 10.0, d).lambda_fit)
    assert abs(lams[1] - lams[0]) <= 0.02 * abs(lams[1])
