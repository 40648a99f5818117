from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pulsekit import reduced
from pulsekit.errors import TailTooShort, TauOutOfRange
from pulsekit.model import ModelParams, solve_background
from pulsekit.reduced import (SADDLE, _bisect_change, build_reduced,
                              critical_points, forcing_zeros, hat_coefficients,
                              integrate, kind_from_hats,
                              nonsaddle_threshold_landmarks, pulse_orbit)

# frozen constants of the reduced system at L=2.8, n=2048, tau=3.35, d=0.05
C1_REF = 54.805342784637091
C2_REF = 168236.42703946764
TAU_HAT_REF = 0.016666666666666607
ALPHA_PLUS_REF = 0.0012762519927552078
FREE_SPEED_REF = 0.00038287559782656237
PEN_BOUND_REF = 0.0059125126051601667
M0_REF = 0.8872551224856613
TAIL_A_REF = -17.214113762533721
TAIL_B_REF = 43.155363407645858
ZERO_SPACING_REF = 0.072797270270077152

ADMISSIBLE = (-0.035866, 0.012)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------- scalars

def test_frozen_scalars(system28):
    s = system28
    assert s.C1 > 0 and s.C2 > 0
    assert rel(s.C1, C1_REF) < 1e-10
    assert rel(s.C2, C2_REF) < 1e-10
    assert rel(s.tau_hat, TAU_HAT_REF) < 1e-12
    assert rel(s.alpha_plus, ALPHA_PLUS_REF) < 1e-10
    assert rel(s.free_speed(), FREE_SPEED_REF) < 1e-10
    assert rel(s.pen_bound(), PEN_BOUND_REF) < 1e-10
    assert rel(s.M0, M0_REF) < 1e-10
    assert rel(s.tail.a, TAIL_A_REF) < 1e-8
    assert rel(s.tail.b, TAIL_B_REF) < 1e-8
    assert rel(s.tail.zero_spacing(), ZERO_SPACING_REF) < 1e-8


def test_profile_derivative_orthogonality(system28, pulse28):
    _, params = pulse28
    n = params.n_modes
    u = np.roll(system28.u_profile[:-1], -(n // 2))
    z = np.fft.rfft(u)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=params.domain_length / n)
    ux = np.fft.irfft(1j * k * z, n=n)
    uxx = np.fft.irfft(-(k * k) * z, n=n)
    num = abs(float(np.mean(ux * uxx)))
    den = float(np.sqrt(np.mean(ux * ux) * np.mean(uxx * uxx)))
    assert num / den < 1e-10


def test_tail_matches_spatial_eigenvalue_quartic(system28, pulse28):
    _, params = pulse28
    u_bar = solve_background(params, params.kappa1_base).u_bar
    c = params.kappa2 - 3.0 * u_bar ** 2 - params.kappa3
    # (Du l^2 + c)(1 - Dw l^2) - kappa4 = 0 governs the far-field decay
    roots = np.roots([-params.Du * params.Dw, 0.0,
                      params.Du - c * params.Dw, 0.0, c - params.kappa4])
    lam = [r for r in roots if r.real < 0 and r.imag > 0][0]
    assert system28.tail.a < 0
    assert rel(system28.tail.b, lam.imag) < 0.02
    assert rel(system28.tail.a, lam.real) < 0.12


# ---------------------------------------------------------------- forcing

def test_forcing_odd_and_bounded(system28):
    s = system28
    p = np.linspace(-s.f_cut, s.f_cut, 4001)
    odd_defect = np.max(np.abs(s.f(p) + s.f(-p)))
    assert odd_defect < 1e-8 * np.max(np.abs(s.f_table))
    assert np.max(np.abs(s.f_table)) < 2.0 * s.M0
    assert np.all(s.f(np.array([1.5 * s.f_cut, -2.0 * s.f_cut])) == 0.0)


@given(st.floats(min_value=0.001, max_value=1.3))
def test_forcing_odd_property(system28, p):
    s = system28
    scale = float(np.max(np.abs(s.f_table)))
    assert abs(float(s.f(p)) + float(s.f(-p))) < 1e-8 * scale


def test_zero_ladder_structure(system28):
    zeros = forcing_zeros(system28, (-system28.f_cut, system28.f_cut))
    assert len(zeros) > 20
    assert np.min(np.abs(zeros)) < 1e-10  # odd forcing pins a zero at 0
    # mirror symmetry of the ladder
    assert np.max(np.abs(np.sort(zeros) + np.sort(-zeros)[::-1])) < 1e-8
    # spacing locks onto the tail half-wavelength away from the center
    gaps = np.diff(zeros)
    far = gaps[np.abs(zeros[:-1]) > 0.2]
    assert rel(np.median(far), ZERO_SPACING_REF) < 0.02


# ------------------------------------------------------------ critical points

def test_rhs_vanishes_at_critical_points(system28):
    for tau in (3.4, 4.5, 6.0):
        s = system28.with_tau(tau)
        for eps in (2e-4, -2e-4):
            rhs = s.rhs(eps)
            for c in critical_points(s, eps):
                dp, da = rhs(0.0, (c.p, 0.0))
                assert abs(dp) < 1e-11 and abs(da) < 1e-11


def test_tau_window_guard(system28):
    with pytest.raises(TauOutOfRange):
        critical_points(system28.with_tau(3.0), 1e-4)
    with pytest.raises(TauOutOfRange):
        critical_points(system28.with_tau(7.0), 1e-4)


def test_saddle_alternation_and_symmetry(system28):
    for eps, saddle_parity in ((1e-4, 1), (-1e-4, 0)):
        pts = {c.index: c for c in critical_points(system28, eps)}
        for idx in range(-6, 7):
            want_saddle = (abs(idx) % 2) == saddle_parity
            assert (pts[idx].kind == SADDLE) == want_saddle
        for idx in (1, 2, 3, 4, 5):
            assert abs(pts[idx].p + pts[-idx].p) < 1e-8


def test_saddle_quantity_positive_on_grid(system28):
    eps_grid = np.linspace(ADMISSIBLE[0], ADMISSIBLE[1], 100)
    eps_grid = eps_grid[np.abs(eps_grid) > 1e-6]
    for eps in eps_grid:
        for c in critical_points(system28, float(eps)):
            if c.kind == SADDLE:
                assert c.saddle_quantity > 0.0


def test_classification_matches_direct_jacobian(system28):
    for eps in np.linspace(-3e-3, 3e-3, 13):
        if abs(eps) < 1e-7:
            continue
        for c in critical_points(system28, float(eps)):
            J = system28.jacobian_at(float(eps), c.p)
            tr, det = float(np.trace(J)), float(np.linalg.det(J))
            disc = tr * tr - 4.0 * det
            assert kind_from_hats(tr, det, disc) == c.kind
            w = np.linalg.eigvals(J)
            got = sorted(c.eigenvalues, key=lambda z: (z.real, z.imag))
            ref = sorted(w.astype(complex), key=lambda z: (z.real, z.imag))
            for g, r in zip(got, ref):
                assert abs(g - r) < 1e-10 * max(1.0, abs(r))


def test_hat_coefficients_match_eigenvalues(system28):
    for eps in (2e-4, -8e-4):
        for c in critical_points(system28, eps):
            b_hat, c_hat, delta = hat_coefficients(
                c.eps_hat, system28.tau_hat, system28.C1, system28.kappa3)
            lam = c.eigenvalues
            assert abs((lam[0] + lam[1]) - b_hat) < 1e-12 * max(1.0, abs(b_hat))
            assert abs((lam[0] * lam[1]).real - c_hat) < 1e-12 * max(1.0, abs(c_hat))
            assert abs(delta - (b_hat * b_hat - 4.0 * c_hat)) < 1e-15


def test_nonsaddle_landmarks_closed_forms(system28):
    lm = nonsaddle_threshold_landmarks(system28.C1, system28.kappa3)
    assert rel(lm["delta_zero_at_tau0"], 4.0 * system28.C1 * system28.kappa3) < 1e-6
    eps_t, tau_t = lm["tangency"]
    assert rel(eps_t, system28.C1 * system28.kappa3) < 1e-6
    assert rel(tau_t, 1.0 / system28.kappa3) < 1e-6


# ---------------------------------------------------------------- dynamics

def test_pulse_orbit_penetrates_at_tiny_height(system28):
    traj = pulse_orbit(system28, 1e-5)
    assert traj.p[-1] > 0.9 * system28.f_cut
    assert abs(traj.alpha[-1] - system28.alpha_plus) < 0.05 * system28.alpha_plus


def test_pulse_orbit_rebounds_in_the_reflecting_band(system28):
    traj = pulse_orbit(system28, -1e-3)
    assert traj.p[-1] < 0.0
    assert traj.alpha[-1] < -0.5 * system28.alpha_plus


def test_pulse_orbit_pins_at_large_negative_height(system28):
    traj = pulse_orbit(system28, -6e-3)
    assert abs(traj.p[-1]) < system28.f_cut
    assert abs(traj.alpha[-1]) < 1e-6 * system28.alpha_plus


def test_integrate_rejects_wild_alpha(system28):
    with pytest.raises(ValueError):
        integrate(system28, 1e-4, (0.0, 1.0), 10.0)


def test_manifold_launch_geometry(system28):
    eps = -6e-4
    pts = {c.index: c for c in critical_points(system28, eps)}
    cur = reduced.manifold(system28, eps, pts[0], "ru", arclength_budget=5.0)
    assert cur.saddle_index == 0 and cur.which == "ru"
    assert np.hypot(cur.points[0, 0] - pts[0].p, cur.points[0, 1]) < 1e-6
    assert cur.points[:, 0].max() > pts[0].p + 1e-3  # leaves to the right
    assert cur.omega_limit != "Unresolved" or cur.arclength >= 5.0


def test_discrete_bisection_handles_either_order():
    f = lambda x: x > 0.3
    assert abs(_bisect_change(f, 0.0, 1.0, 1e-9) - 0.3) < 1e-8
    assert abs(_bisect_change(f, 1.0, 0.0, 1e-9) - 0.3) < 1e-8
    with pytest.raises(ValueError):
        _bisect_change(f, 0.5, 1.0, 1e-9)


# ---------------------------------------------------------------- rebuilds

def test_short_domain_tail_is_rejected(pulse56):
    sol, params = pulse56
    with pytest.raises(TailTooShort):
        build_reduced(sol, params, d=0.05)


def test_with_d_matches_fresh_build(system28, pulse28):
    sol, params = pulse28
    fresh = build_reduced(sol, params, d=0.02)
    swapped = system28.with_d(0.02)
    p = np.linspace(-1.0, 1.0, 801)
    assert np.max(np.abs(fresh.f(p) - swapped.f(p))) < 1e-12
    assert rel(swapped.tail.amplitude, fresh.tail.amplitude) < 1e-12
