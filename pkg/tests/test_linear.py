import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transonic_ep.eos import PressureLaw
from transonic_ep.errors import NormDegenerate, UsageError
from transonic_ep.linear import (EnergyLedger, LinearOperator, LinearOptions, characteristic_transform,
                                 contraction_window, evolve_linear, fit_decay_rate, generator_eigenvalues,
                                 observability_check, project_initial, smooth_random_data,
                                 solution_operator_spectrum, x_norm_matrix)


@pytest.fixture(scope="module")
def op(bench_base):
    return LinearOperator(bench_base)


def test_zero_data_gives_zero_ledger(op):
    z = np.zeros(op.n + 1)
    run = evolve_linear(op, z, z, 0.5)
    led = run.ledger
    for arr in (*led.phi, led.D0_cumulative, led.Dvisc_cumulative, led.identity_residual):
        assert np.all(arr == 0.0)


def test_energy_matrix_represents_energy(op):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(op.size)
    assert x @ op.energy_matrix() @ x == pytest.approx(op.energy(*op.split(x)), rel=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_semidiscrete_energy_balance_is_exact(op, seed):
    # d/dt phi0 = -(boundary rate + viscous rate) for every state: the scheme mimics the identity
    x = np.random.default_rng(seed).standard_normal(op.size)
    Q = op.energy_matrix()
    dphi = 2.0 * x @ Q @ op.rhs(x)
    bnd, visc = op.dissipation_rates(*op.split(x))
    assert dphi == pytest.approx(-(bnd + visc), rel=1e-9, abs=1e-9 * (x @ Q @ x))


def test_ledger_monotone_and_nonnegative(op):
    h1, h2 = smooth_random_data(op, 3)
    h1 = project_initial(op, h1, h2)
    led = evolve_linear(op, h1, h2, 2.0).ledger
    assert np.all(np.diff(led.D0_cumulative) >= 0.0)
    assert all(np.all(p >= 0.0) for p in led.phi)
    # O(dt^2) time-quadrature error only; the order itself is checked in the acceptance suite
    assert np.max(np.abs(led.identity_residual)) <= 1e-4 * led.phi[0][0]


def test_projection_imposes_boundary_relations(op):
    h1, h2 = smooth_random_data(op, 5)
    h1 = project_initial(op, h1, h2)
    h = op.h
    slope0 = (-3 * h1[0] + 4 * h1[1] - h1[2]) / (2 * h)
    slopeL = (3 * h1[-1] - 4 * h1[-2] + h1[-3]) / (2 * h)
    assert slope0 == pytest.approx(op.boundary_slope(h1, h2), abs=1e-10)
    assert abs(slopeL) <= 1e-10


def test_cfl_and_sampling_errors(op):
    z = np.zeros(op.n + 1)
    with pytest.raises(UsageError):
        evolve_linear(op, z, z, 1.0, dt=2 * op.stable_dt(0.5))
    with pytest.raises(UsageError):
        evolve_linear(op, z, z, 0.123)
    with pytest.raises(UsageError):
        evolve_linear(op, z[:-1], z, 1.0)


def test_synthetic_exponential_ledger():
    t = np.linspace(0.0, 10.0, 201)
    phi = np.exp(-2.0 * t)
    z = np.zeros_like(t)
    led = EnergyLedger(t, [phi, 0.5 * phi], z, z, z)
    fit = fit_decay_rate(led, window=1.0)
    assert fit.lambda0 == pytest.approx(2.0, abs=1e-6)
    assert fit.alpha0_per_window == pytest.approx([math.exp(-2.0)] * 10, rel=1e-10)
    assert not fit.unstable


def test_growing_ledger_is_flagged():
    t = np.linspace(0.0, 5.0, 51)
    z = np.zeros_like(t)
    fit = fit_decay_rate(EnergyLedger(t, [np.exp(0.3 * t)], z, z, z))
    assert fit.unstable and fit.lambda0 < 0


def test_dominant_pair_of_generator(bench_base200):
    op = LinearOperator(bench_base200)
    lam = generator_eigenvalues(op)[0]
    assert lam.real == pytest.approx(-0.98478, abs=1e-4)
    assert abs(lam.imag) == pytest.approx(0.75921, abs=1e-4)
    assert contraction_window(op) == pytest.approx(math.pi / abs(lam.imag))


def test_short_time_operator_is_near_identity(op):
    rep = solution_operator_spectrum(op, 1e-3, max_iter=5)
    assert abs(rep.dominant_modulus - 1.0) <= 1e-3


def test_indefinite_norm_requires_shift(unstable_base):
    op = LinearOperator(unstable_base)
    with pytest.raises(NormDegenerate):
        x_norm_matrix(op)
    Q, shifted = x_norm_matrix(op, shift=True)
    assert shifted
    np.linalg.cholesky(Q)


def test_characteristic_frame_on_benchmark(bench_base):
    fr = characteristic_transform(bench_base)
    assert fr.zeta[0] == 0.0 and np.all(np.diff(fr.zeta) > 0)
    assert np.all(fr.N > 0)
    c1, c2 = fr.conditions()
    assert np.all(c1 > 0) and np.all(c2 > 0)
    assert abs(fr.zeta_L - fr.zeta_L_refined) <= 1e-10


def test_characteristic_frame_constant_base():
    law = PressureLaw.gamma_law(1.0, 2.0)
    rho = 1.2
    stub = SimpleNamespace(law=law, J=1.0, x0=0.0, L=1.0, n=64,
                           profile=lambda x: (rho + 0 * x, 0 * x, 0 * x))
    fr = characteristic_transform(stub)
    assert np.all(fr.M == 0.0)
    u, c = 1.0 / rho, math.sqrt(2 * rho)
    assert fr.zeta_L == pytest.approx(0.5 * (1 / (u + c) + 1 / (c - u)), rel=1e-13)


def test_observability_zero_data_and_short_window(op, bench_base):
    fr = characteristic_transform(bench_base)
    z = np.zeros(op.n + 1)
    run = evolve_linear(op, z, z, 2.0)
    res = observability_check(run, fr, 2.0)
    assert res.zero_data and res.ratio == 1.0
    with pytest.raises(UsageError):
        observability_check(run, fr, fr.zeta_L)
