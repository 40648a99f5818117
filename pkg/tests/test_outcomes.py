"""Collision-outcome classifier and phase-diagram helpers."""
from __future__ import annotations

import json
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from pulsekit import outcomes
from pulsekit.errors import NoMatch
from pulsekit.model import HeterogeneityBump
from pulsekit.outcomes import (ADMISSIBLE_EPSILON, OSC, PEN, REB, STA,
                               UNRESOLVED, ClassifyThresholds, classify,
                               classify_reduced, concordance,
                               match_asymptote_to_hiop, ode_outcome,
                               phase_diagram, transition_sequence)
from pulsekit.spectral import Trajectory, state_from_grid

TH = ClassifyThresholds(window=0.5, free_speed=1e-3)


def orbit(t, p):
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    return SimpleNamespace(t=t, p=p, alpha=np.zeros_like(p))


# ------------------------------------------------------- synthetic reduced

def test_penetration_needs_free_exit_speed():
    t = np.linspace(0.0, 1400.0, 1401)
    out = classify(orbit(t, -0.6 + 1e-3 * t), None, TH)
    assert out.kind == PEN
    assert out.evidence["exit_velocity"] == pytest.approx(1e-3, rel=1e-6)
    # 20 percent too fast on exit is not a clean pass-through
    out2 = classify(orbit(t, -0.6 + 1.2e-3 * t), None, TH)
    assert out2.kind == UNRESOLVED
    assert "off the free speed" in out2.evidence["note"]


def test_rebound_records_apex_and_reversal():
    t = np.linspace(0.0, 1100.0, 2201)
    apex, t_apex = 0.3, 450.0
    p = apex - 5e-2 * ((t - t_apex) / 100.0) ** 2
    out = classify(orbit(t, p), None, TH)
    assert out.kind == REB
    assert out.evidence["max_penetration"] == pytest.approx(apex, abs=1e-3)
    assert out.evidence["reversal_time"] == pytest.approx(t_apex, abs=1.0)
    assert out.evidence["crossing_time"] > t_apex


def test_transient_overshoot_does_not_count_as_exit():
    # dips out of the window, comes back, then leaves for good
    t = np.linspace(0.0, 1200.0, 2401)
    p = np.full_like(t, 0.1)
    p[(t > 300) & (t < 350)] = -0.55
    leave = t > 800
    p[leave] = 0.1 - 2e-3 * (t[leave] - 800.0)
    out = classify(orbit(t, p), None, TH)
    assert out.kind == REB
    assert out.evidence["crossing_time"] > 800.0


def test_settled_position_is_sta():
    t = np.linspace(0.0, 500.0, 2001)
    p = 0.02 + 0.1 * np.exp(-t / 30.0)
    p[t > 300.0] = 0.02
    out = classify(orbit(t, p), None, TH)
    assert out.kind == STA
    assert out.pin_location == pytest.approx(0.02, abs=1e-6)


def test_short_residence_is_unresolved():
    t = np.linspace(0.0, 100.0, 401)
    out = classify(orbit(t, np.full_like(t, 0.1)), None, TH)
    assert out.kind == UNRESOLVED
    assert "t_settle" in out.evidence["note"]


def test_sustained_oscillation_is_osc():
    t = np.linspace(0.0, 500.0, 5001)
    p = 0.05 + 0.2 * np.sin(2 * np.pi * t / 50.0)
    out = classify(orbit(t, p), None, TH)
    assert out.kind == OSC
    assert out.period == pytest.approx(50.0, rel=0.02)
    assert out.pin_location == pytest.approx(0.05, abs=5e-3)


def test_decaying_ringdown_is_not_osc():
    t = np.linspace(0.0, 500.0, 5001)
    p = 0.05 + 0.2 * np.exp(-t / 100.0) * np.sin(2 * np.pi * t / 50.0)
    out = classify(orbit(t, p), None, TH)
    assert out.kind == UNRESOLVED
    assert "not settled" in out.evidence["note"]


def test_never_entering_window_is_unresolved():
    t = np.linspace(0.0, 300.0, 301)
    out = classify(orbit(t, 1.0 + 0.1 * t), None, TH)
    assert out.kind == UNRESOLVED
    assert "never entered" in out.evidence["note"]


def test_empty_trajectory_is_unresolved():
    out = classify(orbit([], []), None, TH)
    assert out.kind == UNRESOLVED


# ------------------------------------------------------------ pde tracks

def make_track(t, pos, L):
    t = np.asarray(t, dtype=float)
    pos = np.asarray(pos, dtype=float)
    vel = np.gradient(pos, t)
    return Trajectory(t=t, position=pos, velocity=vel, domain_length=L,
                      sample_dt=float(t[1] - t[0]))


def test_pde_track_recentered_on_bump():
    L = 2.0
    t = np.linspace(0.0, 2000.0, 2001)
    track = make_track(t, 0.2 + 1e-3 * t, L)
    out = classify(track, HeterogeneityBump(epsilon=1e-4, d=0.05), TH,
                   domain_length=L)
    assert out.kind == PEN


def test_pde_track_wraps_across_domain_seam():
    # starting just left of the bump via the periodic seam still reads as an
    # approach from -W
    L = 2.0
    t = np.linspace(0.0, 1600.0, 1601)
    track = make_track(t, 2.1 + 1e-3 * t, L)
    out = classify(track, None, TH)
    assert out.kind == PEN
    assert out.evidence["crossing_time"] < t[-1]


def test_pde_track_rebound():
    L = 2.0
    t = np.linspace(0.0, 1100.0, 2201)
    pos = 1.0 + 0.3 - 5e-2 * ((t - 450.0) / 100.0) ** 2
    out = classify(make_track(t, pos, L), None, TH)
    assert out.kind == REB


def test_inconsistent_tracker_velocity_is_unresolved():
    # position leaves through -W but the tracker reports forward motion;
    # that contradiction must not be sold as a rebound
    L = 2.0
    t = np.linspace(0.0, 1100.0, 2201)
    pos = 1.0 + 0.3 - 5e-2 * ((t - 450.0) / 100.0) ** 2
    track = Trajectory(t=t, position=pos,
                       velocity=np.full_like(t, 1e-3), domain_length=L,
                       sample_dt=0.5)
    out = classify(track, None, TH)
    assert out.kind == UNRESOLVED
    assert "moving forward" in out.evidence["note"]


# ------------------------------------------------- live reduced outcomes

@pytest.fixture(scope="module")
def transitions(data_dir):
    return json.loads((data_dir / "transitions.json").read_text())


def test_live_outcomes_bracket_the_frozen_boundaries(system28, transitions):
    vals = transitions["values"]
    assert ode_outcome(system28, 0.5 * vals["pen_reb"]).kind == PEN
    assert ode_outcome(system28, 2.5 * vals["pen_reb"]).kind == REB


def test_live_pin_outcome(system28):
    out = ode_outcome(system28, -6e-3)
    assert out.kind == STA
    assert abs(out.pin_location) < system28.f_cut


def test_verdicts_stable_under_threshold_halving(system28):
    from pulsekit.reduced import pulse_orbit

    base = ClassifyThresholds(window=0.25 * 2 * system28.half_domain,
                              free_speed=system28.free_speed())
    half = ClassifyThresholds(window=0.5 * base.window,
                              free_speed=base.free_speed)
    for eps, want in ((-5e-5, PEN), (-1e-3, REB)):
        traj = pulse_orbit(system28, eps, t_end=1.2e5)
        assert classify(traj, None, base).kind == want
        assert classify(traj, None, half).kind == want


def test_sta_verdict_stable_under_longer_settle(system28):
    from pulsekit.reduced import pulse_orbit

    traj = pulse_orbit(system28, -6e-3, t_end=1.2e5)
    for t_settle in (200.0, 400.0):
        th = ClassifyThresholds(window=0.25 * 2 * system28.half_domain,
                                free_speed=system28.free_speed(),
                                t_settle=t_settle)
        assert classify(traj, None, th).kind == STA


# ------------------------------------------------------------ diagrams

def test_phase_diagram_rejects_bad_setups(system28):
    with pytest.raises(ValueError):
        phase_diagram("sde", [0.05], [1e-4])
    with pytest.raises(ValueError):
        phase_diagram("ode", [0.05], [1e-4])
    with pytest.raises(ValueError):
        phase_diagram("pde", [0.05], [1e-4])


def test_phase_diagram_refines_the_pen_reb_boundary(system28, transitions):
    ref = transitions["values"]["pen_reb"]
    diag = phase_diagram("ode", [system28.d], [-2e-4, -6e-4], sys=system28,
                         refine_tol=2e-5)
    kinds = {r["epsilon"]: r["outcome"] for r in diag["rows"]}
    assert kinds[-2e-4] == PEN and kinds[-6e-4] == REB
    assert len(diag["boundaries"]) == 1
    b = diag["boundaries"][0]
    # refinement walks the epsilon grid in ascending order
    assert b["from"] == REB and b["to"] == PEN
    assert b["epsilon"] == pytest.approx(ref, abs=3e-5)
    assert diag["admissible_epsilon"] == ADMISSIBLE_EPSILON


def test_transition_sequence_orders_and_dedups():
    rows = [{"d": 0.05, "epsilon": e, "outcome": k} for e, k in (
        (-1e-4, PEN), (-5e-4, REB), (-1e-3, REB), (-2.5e-3, OSC),
        (-4e-3, UNRESOLVED), (-6e-3, STA), (1e-4, PEN), (8e-4, OSC))]
    assert transition_sequence(rows, 0.05, "negative") == [PEN, REB, OSC, STA]
    assert transition_sequence(rows, 0.05, "positive") == [PEN, OSC]


def test_concordance_counts_matching_cells():
    grid = [-1e-4, -5e-4, -1e-3, -2e-3]
    rows_a = [{"d": 0.05, "epsilon": e, "outcome": k}
              for e, k in zip(grid, (PEN, REB, REB, OSC))]
    rows_b = [{"d": 0.05, "epsilon": e, "outcome": k}
              for e, k in zip(grid, (PEN, REB, OSC, OSC))]
    assert concordance(rows_a, rows_b, 0.05, grid) == pytest.approx(0.75)


def test_admissible_epsilon_span():
    assert ADMISSIBLE_EPSILON == (-0.035866, 0.012)


# -------------------------------------------------------- hiop matching

def gaussian_state(n=128, L=2.0, amp=1.0):
    x = np.arange(n) * (L / n)
    u = amp * np.exp(-80.0 * (x - 0.5 * L) ** 2)
    return state_from_grid(u, 0.5 * u)


def atlas_point(param, state, n_unstable=0, beta=None, mean_position=None):
    return SimpleNamespace(param=param, state=state, n_unstable=n_unstable,
                           beta=beta, mean_position=mean_position)


def test_sta_match_by_profile(system28):
    st = gaussian_state()
    outcome = outcomes.Outcome(STA, {}, pin_location=0.0, terminal_state=st)
    branch = SimpleNamespace(label="[I]S_0",
                             points=[atlas_point(-1.0e-3, st)])
    hit = match_asymptote_to_hiop(outcome, [branch], epsilon=-1.0e-3)
    assert hit["branch"] is branch
    assert hit["distance"] <= hit["tolerance"]


def test_sta_match_rejects_far_profiles():
    st = gaussian_state(amp=1.0)
    far = gaussian_state(amp=1.5)
    outcome = outcomes.Outcome(STA, {}, terminal_state=st)
    branch = SimpleNamespace(label="[I]S_0",
                             points=[atlas_point(-1.0e-3, far)])
    with pytest.raises(NoMatch, match="profile tolerance"):
        match_asymptote_to_hiop(outcome, [branch], epsilon=-1.0e-3)


def test_match_requires_stable_candidates():
    st = gaussian_state()
    outcome = outcomes.Outcome(STA, {}, terminal_state=st)
    branch = SimpleNamespace(label="[I]S_0",
                             points=[atlas_point(-1e-3, st, n_unstable=2)])
    with pytest.raises(NoMatch, match="no stable"):
        match_asymptote_to_hiop(outcome, [branch], epsilon=-1e-3)


def test_osc_match_by_period_and_center():
    st = gaussian_state()
    outcome = outcomes.Outcome(OSC, {}, pin_location=0.01, period=35.0,
                               terminal_state=st)
    good = atlas_point(-2.05e-3, st, beta=35.4, mean_position=0.012)
    branch = SimpleNamespace(label="osc_0", points=[good])
    hit = match_asymptote_to_hiop(outcome, [branch], epsilon=-2e-3)
    assert hit["point"] is good
    assert hit["period_error"] < 0.05
    far = atlas_point(-2.05e-3, st, beta=50.0, mean_position=0.012)
    with pytest.raises(NoMatch, match="period differs"):
        match_asymptote_to_hiop(outcome,
                                [SimpleNamespace(label="osc_1", points=[far])],
                                epsilon=-2e-3)


def test_outcome_kind_gate_for_matching():
    with pytest.raises(ValueError):
        match_asymptote_to_hiop(outcomes.Outcome(PEN, {}), [], epsilon=1e-3)
