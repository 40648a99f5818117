from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsekit.model import ModelParams, kappa1_field, solve_background
from pulsekit.spectral import (EtdRk4, LinearizedEtdRk4, SpectralState,
                               grid_fields, hermitian_defect, resymmetrize,
                               state_from_grid, steps_for, to_full, to_half,
                               track_pulse, translate, u_field, u_rms,
                               wrap_delta)


def test_grid_roundtrip():
    rng = np.random.default_rng(0)
    u = rng.normal(size=64)
    v = rng.normal(size=64)
    st_ = state_from_grid(u, v)
    u2, v2 = grid_fields(st_)
    np.testing.assert_allclose(u2, u, atol=1e-13)
    np.testing.assert_allclose(v2, v, atol=1e-13)
    assert hermitian_defect(st_) < 1e-14


def test_half_full_inverse():
    rng = np.random.default_rng(1)
    z_half = rng.normal(size=(2, 33)) + 1j * rng.normal(size=(2, 33))
    z_half[:, 0] = z_half[:, 0].real
    z_half[:, -1] = z_half[:, -1].real
    np.testing.assert_allclose(to_half(to_full(z_half)), z_half, atol=1e-14)


def test_translate_is_exact_shift(pulse56):
    sol, params = pulse56
    L, n = params.domain_length, params.n_modes
    shifted = translate(sol.state, 3 * L / n, L)
    u0 = u_field(sol.state)
    u1 = u_field(shifted)
    np.testing.assert_allclose(u1, np.roll(u0, 3), atol=1e-11)
    assert u_rms(shifted) == pytest.approx(u_rms(sol.state), rel=1e-13)


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_translate_composes(s1, s2):
    z = np.zeros((2, 17), dtype=complex)
    z[0, 2] = 1.0 + 0.5j
    z[1, 5] = -0.25j
    state = SpectralState(coeffs=to_full(z), time=0.0)
    a = translate(translate(state, s1, 1.0), s2, 1.0)
    b = translate(state, s1 + s2, 1.0)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)


@given(st.floats(-5.0, 5.0))
def test_wrap_delta_bounds(dp):
    w = wrap_delta(dp, 1.4)
    assert -0.7 <= w <= 0.7
    # congruent modulo the domain
    assert abs((dp - w) / 1.4 - round((dp - w) / 1.4)) < 1e-9


def make_stepper(params, dt=2e-3):
    return EtdRk4(params, kappa1_field(params), dt)


def test_background_is_fixed_point(background_state):
    state, params, u_bar = background_state
    stepper = make_stepper(params)
    out = stepper.flow_state(state, 0.2)
    np.testing.assert_allclose(u_field(out), u_bar, atol=1e-12)


def test_step_equivariance_under_translation(pulse56):
    # stepping commutes with translation: no hidden grid anchoring
    sol, params = pulse56
    stepper = make_stepper(params)
    shift = 0.1234
    a = stepper.flow_state(translate(sol.state, shift, params.domain_length),
                           0.05)
    b = translate(stepper.flow_state(sol.state, 0.05), shift,
                  params.domain_length)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-10)


def test_pulse_is_discrete_equilibrium(pulse56):
    # converged Newton solution is a fixed point of the full time stepper
    sol, params = pulse56
    stepper = make_stepper(params, dt=1e-3)
    moved = stepper.flow_state(sol.state, 0.5)
    drift = np.max(np.abs(u_field(moved) - u_field(sol.state)))
    assert drift < 1e-8


def test_etdrk4_fourth_order(pulse56):
    # strong smooth transient: nonlinear terms dominate, spatial error absent
    _, params = pulse56
    n = params.n_modes
    bg = solve_background(params, params.kappa1_base).u_bar
    rng = np.random.default_rng(0)
    c = np.zeros(n, complex)
    c[1:6] = rng.normal(size=5) + 1j * rng.normal(size=5)
    u = bg + np.real(np.fft.ifft(c)) * n / 5
    start = state_from_grid(u, np.full(n, bg))
    T = 0.2

    def final(dt):
        return u_field(make_stepper(params, dt).flow_state(start, T))

    ref = final(5e-4)
    errs = [np.max(np.abs(final(dt) - ref)) for dt in (2e-2, 1e-2, 5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() > 3.6, (errs, orders)


def test_with_kappa1_shares_weights(pulse56):
    sol, params = pulse56
    base = make_stepper(params)
    mod = base.with_kappa1(kappa1_field(params) + 0.001)
    assert mod.E is base.E  # exponential tables reused
    a = u_field(base.flow_state(sol.state, 0.01))
    b = u_field(mod.flow_state(sol.state, 0.01))
    assert np.max(np.abs(a - b)) > 1e-7  # forcing change is felt


def test_linearized_matches_finite_difference(pulse56):
    sol, params = pulse56
    base = make_stepper(params, dt=1e-3)
    zh = to_half(sol.state.coeffs)
    lin = LinearizedEtdRk4(base, zh[0])
    rng = np.random.default_rng(3)
    d = rng.normal(size=zh.shape) + 1j * rng.normal(size=zh.shape)
    d[:, 0] = d[:, 0].real
    d[:, -1] = d[:, -1].real
    d *= 1e-6 / np.max(np.abs(d))
    n_steps = steps_for(0.05, base.dt)
    jv = lin.run(d.copy(), n_steps)
    plus = base.run((zh + d).copy(), n_steps)
    minus = base.run((zh - d).copy(), n_steps)
    fd = (plus - minus) / 2.0
    rel = np.max(np.abs(jv - fd)) / np.max(np.abs(jv))
    assert rel < 1e-6


def test_track_pulse_follows_translation(pulse56):
    sol, params = pulse56
    u_bar = solve_background(params, params.kappa1_base).u_bar
    p0, _ = track_pulse(sol.state, params, u_bar)
    p1, _ = track_pulse(translate(sol.state, 0.07, params.domain_length),
                        params, u_bar)
    assert wrap_delta(p1 - p0, params.domain_length) == pytest.approx(
        0.07, abs=1e-9)


def test_steps_for_rounding():
    assert steps_for(1.0, 1e-3) == 1000
    assert steps_for(0.9999999999, 1e-3) == 1000
    with pytest.raises(ValueError):
        steps_for(1e-9, 1e-3)  # below one step
    with pytest.raises(ValueError):
        steps_for(1.0005, 1e-3)  # not a near-multiple


def test_resymmetrize_cleans_defect():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(2, 32)) + 1j * rng.normal(size=(2, 32))
    state = SpectralState(coeffs=z, time=0.0)
    cleaned = resymmetrize(state)
    assert hermitian_defect(cleaned) < 1e-15
