from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from pulsekit import continuation, shooting
from pulsekit.errors import NoConvergence, SingularPhaseCondition
from pulsekit.model import ModelParams
from pulsekit.shooting import (STEADY, STEADY_TRAVELING, TIME_PERIODIC,
                               PERIODIC_TRAVELING, ShootingTarget,
                               pack_coeffs, unpack_coeffs)
from pulsekit.spectral import state_from_grid, to_half, u_field

# frozen from the closed-form uniform-state analysis (independent root solve)
OMEGA_C = 45.00351493050912
K1_HOPF = -0.0758462608046371
K1_PITCHFORK = -0.07550510984564132
HOPF_FREQ = 0.021107665110046695


@pytest.fixture(scope="module")
def params56() -> ModelParams:
    return ModelParams(kappa1_base=-0.1, tau=3.35, domain_length=0.56,
                       n_modes=256)


# ---------------------------------------------------------------- packing

def test_pack_unpack_round_trip():
    rng = np.random.default_rng(3)
    n = 64
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    z = to_half(state_from_grid(u, v).coeffs)
    z[:, -1] = 0.0  # Nyquist is pinned by the stepper
    y = pack_coeffs(z, n)
    assert y.shape == (2 + 4 * (n // 2 - 1),)
    z2 = unpack_coeffs(y, n)
    assert np.allclose(z2, z, atol=1e-13)


def test_pack_is_linear():
    rng = np.random.default_rng(4)
    n = 32
    a = rng.standard_normal((2, n // 2 + 1)) + 1j * rng.standard_normal((2, n // 2 + 1))
    b = rng.standard_normal((2, n // 2 + 1)) + 1j * rng.standard_normal((2, n // 2 + 1))
    lhs = pack_coeffs(a + 2.0 * b, n)
    rhs = pack_coeffs(a, n) + 2.0 * pack_coeffs(b, n)
    assert np.allclose(lhs, rhs, atol=1e-14)


# ---------------------------------------------------------------- targets

def test_target_validation():
    with pytest.raises(ValueError):
        ShootingTarget(kind="Wobbly")
    with pytest.raises(ValueError):
        ShootingTarget(kind=STEADY, eta=0.0)
    with pytest.raises(ValueError):
        ShootingTarget(kind=STEADY, t_probe=-1.0)
    with pytest.raises(ValueError):
        ShootingTarget(kind=TIME_PERIODIC)  # missing period guess
    with pytest.raises(ValueError):
        ShootingTarget(kind=STEADY, beta=1.0)  # period on a steady class
    with pytest.raises(ValueError):
        ShootingTarget(kind=TIME_PERIODIC, beta=1.0, U=1e-4)  # speed unknown
    ShootingTarget(kind=PERIODIC_TRAVELING, beta=2.0, U=1e-4)


# ------------------------------------------------------- uniform-state forms

def test_critical_wavenumber_frozen(params56):
    wc = shooting.critical_wavenumber(params56)
    assert abs(wc - OMEGA_C) < 1e-9 * OMEGA_C
    # interior maximum of the growth symbol
    a = lambda w: shooting.dispersion_a(params56, K1_HOPF, w)
    assert a(wc) > a(wc * 0.98)
    assert a(wc) > a(wc * 1.02)


def test_onset_values_frozen(params56):
    k1_h = shooting.hopf_onset(params56)
    k1_p = shooting.pitchfork_onset(params56)
    assert abs(k1_h - K1_HOPF) < 1e-10
    assert abs(k1_p - K1_PITCHFORK) < 1e-10
    # oscillatory onset sits below the stationary one for this parameter set
    assert k1_h < k1_p


def test_spectrum_at_onsets(params56):
    lam = shooting.linearized_trivial_spectrum(params56, K1_HOPF, OMEGA_C)
    assert abs(lam[0].real) < 1e-12 and abs(lam[1].real) < 1e-12
    assert abs(abs(lam[0].imag) - HOPF_FREQ) < 1e-12
    lam_p = shooting.linearized_trivial_spectrum(params56, K1_PITCHFORK, OMEGA_C)
    assert min(abs(lam_p[0]), abs(lam_p[1])) < 1e-12


def test_background_stable_below_onsets(params56):
    grid = np.linspace(0.0, 3.0 * OMEGA_C, 181)
    worst = max(max(l.real for l in
                    shooting.linearized_trivial_spectrum(params56, -0.1, w))
                for w in grid)
    assert worst < -1e-4


# ---------------------------------------------------------------- pulses

def test_cached_pulse_certificate(pulse56):
    sol, params = pulse56
    assert sol.kind == STEADY
    assert sol.residual < 1e-10
    u = u_field(sol.state)
    assert u.max() - u.min() > 0.5  # localized, not the uniform state
    probes = shooting.verify_solution(sol, params)
    assert all(v < 1e-10 for v in probes.values())


def test_translation_mode_identities(pulse56):
    sol, params = pulse56
    at_drift = replace(params, tau=1.0 / params.kappa3)
    rep = shooting.goldstone_check(sol, at_drift)
    assert rep.goldstone_residual < 1e-6
    assert rep.propagator_residual < 1e-6
    assert rep.adjoint_residual < 1e-6
    assert abs(rep.adjoint_pairing) < 1e-8  # pairing degenerates at the drift point

    rep2 = shooting.goldstone_check(sol, params)
    expect = 0.5 * (1.0 - params.kappa3 * params.tau)
    assert abs(rep2.adjoint_pairing - expect) < 1e-10


def test_drift_speed_estimate(pulse56):
    sol, params = pulse56
    assert shooting.estimate_drift_speed(sol, replace(params, tau=3.0)) == 0.0
    u_est = shooting.estimate_drift_speed(sol, params)
    assert 1e-4 < u_est < 1e-3


def test_traveling_solve_and_stability_offset(pulse56):
    sol, params = pulse56
    seed, u0 = shooting.traveling_seed(sol, params)
    target = ShootingTarget(kind=STEADY_TRAVELING, U=u0)
    trav = shooting.solve(seed, target, params)
    assert trav.residual < 1e-10
    assert trav.U > 0.0
    assert abs(trav.U - u0) < 0.25 * u0

    spec_s = shooting.stability(sol, params)
    spec_t = shooting.stability(trav, params)
    n_s = continuation.count_unstable(spec_s.eigenvalues)
    n_t = continuation.count_unstable(spec_t.eigenvalues)
    assert n_s == n_t + 1  # the walking mode is the only extra instability
    # both spectra carry a translation mode pinned at zero
    assert min(abs(l) for l in spec_s.eigenvalues) < 1e-6
    assert min(abs(l) for l in spec_t.eigenvalues) < 1e-6


# ---------------------------------------------------------------- failures

def test_singular_phase_conditions(background_state):
    state, params, _ = background_state
    with pytest.raises(SingularPhaseCondition):
        shooting.solve(state, ShootingTarget(kind=STEADY_TRAVELING), params)
    with pytest.raises(SingularPhaseCondition):
        shooting.solve(state, ShootingTarget(kind=TIME_PERIODIC, beta=1.0), params)


def test_no_convergence_reports_iterations(pulse56):
    sol, params = pulse56
    rng = np.random.default_rng(11)
    u = u_field(sol.state) + 0.2 * rng.standard_normal(params.n_modes)
    bad = state_from_grid(u, u.copy())
    target = ShootingTarget(kind=STEADY, eta=1e-12)
    with pytest.raises(NoConvergence):
        shooting.solve(bad, target, params, max_iter=1)
