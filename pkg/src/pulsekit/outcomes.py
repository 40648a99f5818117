"""Collision-outcome classification and (d, epsilon) phase diagrams.

A trajectory (PDE pulse track or reduced-ODE orbit) is sorted into
PEN / REB / OSC / STA / Unresolved using a window of half-width W around the
bump center: penetration and rebound are window exits with the right velocity
signature, pinning outcomes are settled or periodically oscillating positions
inside the window. The same classifier serves both dynamics so the phase
diagrams can be compared cell by cell.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import NoMatch
from .model import HeterogeneityBump
from .spectral import Trajectory, wrap_delta

__all__ = [
    "PEN", "REB", "OSC", "STA", "UNRESOLVED",
    "Outcome", "ClassifyThresholds", "classify", "classify_reduced",
    "ode_outcome", "phase_diagram", "transition_sequence",
    "match_asymptote_to_hiop", "concordance",
]

PEN = "PEN"
REB = "REB"
OSC = "OSC"
STA = "STA"
UNRESOLVED = "Unresolved"


@dataclass
class Outcome:
    kind: str
    evidence: dict
    pin_location: Optional[float] = None
    period: Optional[float] = None
    terminal_state: Optional[object] = None


@dataclass(frozen=True)
class ClassifyThresholds:
    """Operational definitions of the four labels.

    window: half-width W of the classification window around the bump center;
    free_speed: speed of the unperturbed traveling pulse at these parameters;
    velocity_tol: PEN exit speed must match free_speed within this fraction;
    sta_floor: STA velocity amplitude bound, as a fraction of free_speed;
    min_periods: OSC needs at least this many complete position oscillations;
    t_settle: minimum time inside the window before pinning labels apply.
    """

    window: float
    free_speed: float
    velocity_tol: float = 0.05
    sta_floor: float = 1e-6
    min_periods: int = 5
    t_settle: float = 200.0


def _oscillation_stats(t: np.ndarray, q: np.ndarray) -> Optional[dict]:
    """Period/center/amplitude of a sustained oscillation of q(t), else None."""
    center = float(np.mean(q))
    dev = q - center
    amp = 0.5 * (np.max(q) - np.min(q))
    if amp <= 0:
        return None
    up = np.nonzero((dev[:-1] < 0) & (dev[1:] >= 0))[0]
    if len(up) < 2:
        return None
    t_up = t[up] - dev[up] * (t[up + 1] - t[up]) / (dev[up + 1] - dev[up])
    periods = np.diff(t_up)
    period = float(np.median(periods))
    if period <= 0:
        return None
    # per-cycle amplitude trend: reject strongly decaying or growing envelopes
    amps = []
    for a, b in zip(up[:-1], up[1:]):
        seg = q[a:b + 1]
        amps.append(0.5 * (seg.max() - seg.min()))
    amps = np.asarray(amps)
    amps = amps[amps > 0]
    trend = 0.0
    if len(amps) >= 2:
        trend = abs(np.log(amps[-1] / amps[0])) / len(amps)
    return {"period": period, "center": center, "amplitude": amp,
            "n_periods": int(len(up) - 1), "envelope_trend_per_cycle": float(trend)}


def classify(traj: Union[Trajectory, "object"], bump: Optional[HeterogeneityBump],
             thresholds: ClassifyThresholds,
             domain_length: Optional[float] = None) -> Outcome:
    """Assign PEN / REB / OSC / STA / Unresolved to a single trajectory.

    PDE tracks carry absolute positions; they are re-centered on the bump.
    Reduced-ODE orbits already measure position from the bump center.
    """
    th = thresholds
    if isinstance(traj, Trajectory):
        t = np.asarray(traj.t)
        L = traj.domain_length
        center = bump.resolved_center(L) if bump is not None else 0.5 * L
        # positions are unwrapped; the offset at t=0 fixes the branch
        rel0 = wrap_delta(traj.position[0] - center, L)
        rel = rel0 + (traj.position - traj.position[0])
        vel = np.asarray(traj.velocity)
        terminal = traj.final_state
    else:  # reduced-ODE orbit
        t = np.asarray(traj.t)
        rel = np.asarray(traj.p)
        vel = np.gradient(rel, t) if len(t) > 2 else np.zeros_like(rel)
        terminal = (float(rel[-1]), float(traj.alpha[-1])) if len(rel) else None

    if len(t) == 0:
        return Outcome(UNRESOLVED, {"note": "empty trajectory"})
    W = th.window
    inside = np.abs(rel) <= W
    if not np.any(inside):
        return Outcome(UNRESOLVED, {"note": "never entered the window"},
                       terminal_state=terminal)
    i_in = int(np.argmax(inside))

    if not inside[-1]:
        # exited: classify by the final outside segment (approach trajectories
        # begin outside, and transient window overshoots do not count)
        i_exit = len(rel) - 1
        while i_exit > i_in and not inside[i_exit - 1]:
            i_exit -= 1
        t_exit = float(t[i_exit])
        if rel[i_exit] > 0:
            # penetration: must recover the free speed past the bump
            tail_v = vel[i_exit:]
            v_exit = float(tail_v[np.argmax(np.abs(tail_v))])
            if abs(v_exit - th.free_speed) <= th.velocity_tol * th.free_speed:
                return Outcome(PEN, {"crossing_time": t_exit,
                                     "exit_velocity": v_exit},
                               terminal_state=terminal)
            return Outcome(UNRESOLVED, {"crossing_time": t_exit,
                                        "exit_velocity": v_exit,
                                        "note": "exited +W off the free speed"},
                           terminal_state=terminal)
        v_exit = float(vel[i_exit])
        if v_exit < 0:
            i_rev = i_in + int(np.argmax(rel[i_in:i_exit + 1]))
            return Outcome(REB, {"crossing_time": t_exit,
                                 "reversal_time": float(t[i_rev]),
                                 "max_penetration": float(rel[i_rev])},
                           terminal_state=terminal)
        return Outcome(UNRESOLVED, {"crossing_time": t_exit,
                                    "note": "exited -W moving forward"},
                       terminal_state=terminal)

    # ends inside the window: need at least t_settle of residence
    t, rel, vel = t[i_in:], rel[i_in:], vel[i_in:]
    if (t[-1] - t[0]) < th.t_settle:
        return Outcome(UNRESOLVED, {"note": "residence shorter than t_settle"},
                       terminal_state=terminal)
    floor = th.sta_floor * th.free_speed
    # trailing windows: last 10% for settledness, last 60% for oscillation
    i_sta = np.searchsorted(t, t[-1] - 0.1 * (t[-1] - t[0]))
    if np.max(np.abs(vel[i_sta:])) < floor and np.ptp(rel[i_sta:]) < max(
            1e-9, 1e-3 * W):
        pin = float(np.mean(rel[i_sta:]))
        return Outcome(STA, {"position": pin, "t_settled": float(t[i_sta])},
                       pin_location=pin, terminal_state=terminal)
    i_osc = np.searchsorted(t, t[-1] - 0.6 * (t[-1] - t[0]))
    stats = _oscillation_stats(t[i_osc:], rel[i_osc:])
    if stats is not None and stats["n_periods"] >= th.min_periods and \
            np.max(np.abs(vel[i_osc:])) > floor and \
            stats["envelope_trend_per_cycle"] < 0.01:
        return Outcome(OSC, stats, pin_location=stats["center"],
                       period=stats["period"], terminal_state=terminal)
    note = "no sustained oscillation resolved"
    if stats is not None:
        note = (f"oscillation not settled: {stats['n_periods']} periods, "
                f"trend {stats['envelope_trend_per_cycle']:.2e}/cycle")
    return Outcome(UNRESOLVED, {"note": note}, terminal_state=terminal)


# ------------------------------------------------------------- reduced driver

def classify_reduced(sys, traj, thresholds: Optional[ClassifyThresholds] = None
                     ) -> Outcome:
    """Classifier bound to a ReducedSystem's window and free speed."""
    if thresholds is None:
        thresholds = ClassifyThresholds(window=0.5 * sys.half_domain,
                                        free_speed=sys.free_speed())
    return classify(traj, None, thresholds)


def ode_outcome(sys, epsilon: float, *, t_end: Optional[float] = None,
                max_t: float = 4e6,
                thresholds: Optional[ClassifyThresholds] = None) -> Outcome:
    """Pulse-orbit outcome at one epsilon, extending the horizon until resolved."""
    from .reduced import pulse_orbit

    speed = max(sys.free_speed(), 1e-12)
    horizon = t_end if t_end is not None else 20.0 * sys.f_cut / speed
    while True:
        traj = pulse_orbit(sys, epsilon, t_end=horizon)
        out = classify_reduced(sys, traj, thresholds)
        if out.kind != UNRESOLVED or horizon >= max_t:
            return out
        horizon = min(4.0 * horizon, max_t)


# --------------------------------------------------------------- phase diagram

ADMISSIBLE_EPSILON = (-0.035866, 0.012)


def _refine_boundary(outcome_of: Callable[[float], str], lo: float, hi: float,
                     tol: float) -> float:
    k_lo = outcome_of(lo)
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if outcome_of(mid) == k_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_diagram(dynamics: str, d_grid: Sequence[float],
                  epsilon_grid: Sequence[float], *,
                  sys=None, pde_runner: Optional[Callable] = None,
                  refine: bool = True, refine_tol: float = 1e-6,
                  t_end: Optional[float] = None) -> dict:
    """Outcome table over (d, epsilon) for either dynamics.

    For `ode`, pass a ReducedSystem (re-derived per d). For `pde`, pass a
    runner: pde_runner(d, epsilon) -> Outcome, wrapping the collision pipeline;
    the caller owns its cost/caching policy.
    """
    if dynamics not in ("ode", "pde"):
        raise ValueError("dynamics must be 'ode' or 'pde'")
    if dynamics == "ode" and sys is None:
        raise ValueError("ode diagrams need a ReducedSystem")
    if dynamics == "pde" and pde_runner is None:
        raise ValueError("pde diagrams need a pde_runner callable")

    rows = []
    boundaries = []
    for d in d_grid:
        if dynamics == "ode":
            sys_d = sys if abs(sys.d - d) < 1e-15 else sys.with_d(d)
            outcome_of = lambda e: ode_outcome(sys_d, e, t_end=t_end)
        else:
            outcome_of = lambda e: pde_runner(d, e)
        cache: dict[float, Outcome] = {}

        def kind_of(e: float) -> str:
            if e not in cache:
                cache[e] = outcome_of(e)
            return cache[e].kind

        for e in epsilon_grid:
            out = cache.setdefault(float(e), outcome_of(float(e)))
            rows.append({"d": float(d), "epsilon": float(e), "outcome": out.kind,
                         "pin_location": out.pin_location, "period": out.period})
        if refine:
            es = sorted(float(e) for e in epsilon_grid)
            for e0, e1 in zip(es[:-1], es[1:]):
                k0, k1 = kind_of(e0), kind_of(e1)
                if k0 == k1 or UNRESOLVED in (k0, k1):
                    continue
                ec = _refine_boundary(kind_of, e0, e1, refine_tol)
                boundaries.append({"d": float(d), "epsilon": float(ec),
                                   "from": k0, "to": k1})
    return {"rows": rows, "boundaries": boundaries,
            "admissible_epsilon": ADMISSIBLE_EPSILON}


def transition_sequence(rows: Sequence[dict], d: float,
                        side: str = "negative") -> list[str]:
    """Ordered outcome kinds moving away from epsilon = 0 on one sign."""
    sel = [r for r in rows if abs(r["d"] - d) < 1e-15]
    if side == "negative":
        sel = sorted((r for r in sel if r["epsilon"] < 0),
                     key=lambda r: -r["epsilon"])
    else:
        sel = sorted((r for r in sel if r["epsilon"] > 0),
                     key=lambda r: r["epsilon"])
    seq = []
    for r in sel:
        k = r["outcome"]
        if k != UNRESOLVED and (not seq or seq[-1] != k):
            seq.append(k)
    return seq


def concordance(rows_a: Sequence[dict], rows_b: Sequence[dict], d: float,
                epsilon_grid: Sequence[float]) -> float:
    """Fraction of shared grid points with identical outcome kinds."""
    def lookup(rows, e):
        best = min(rows, key=lambda r: abs(r["epsilon"] - e) + abs(r["d"] - d) * 1e6)
        return best["outcome"]

    hits = sum(lookup(rows_a, e) == lookup(rows_b, e) for e in epsilon_grid)
    return hits / len(epsilon_grid)


# ------------------------------------------------------------- HIOP matching

def _profile_distance(u_a: np.ndarray, u_b: np.ndarray) -> float:
    return float(np.linalg.norm(u_a - u_b))


def match_asymptote_to_hiop(outcome: Outcome, atlas: Sequence, *,
                            epsilon: float, resolve: Optional[Callable] = None,
                            profile_rtol: float = 1e-3,
                            period_rtol: float = 0.05) -> dict:
    """Find the atlas branch point the trajectory settled onto.

    STA outcomes match by L2 profile distance < profile_rtol * ||u|| after
    re-solving the nearest stable stationary branch point at the exact epsilon
    (the `resolve` callback does that refinement when supplied). OSC outcomes
    match the time-periodic branch whose period and mean position agree.
    Raises NoMatch when nothing qualifies: that is a genuine coverage failure.
    """
    from .spectral import u_field

    if outcome.kind not in (STA, OSC):
        raise ValueError("only STA/OSC outcomes have asymptotic HIOP states")
    candidates = []
    for branch in atlas:
        for pt in branch.points:
            if pt.n_unstable is not None and pt.n_unstable > 0:
                continue
            if outcome.kind == STA and getattr(pt, "beta", None):
                continue
            if outcome.kind == OSC and not getattr(pt, "beta", None):
                continue
            candidates.append((branch, pt))
    if not candidates:
        raise NoMatch(f"atlas has no stable {outcome.kind} branch points")

    if outcome.kind == STA:
        u_term = u_field(outcome.terminal_state)
        best = None
        for branch, pt in sorted(candidates,
                                 key=lambda bp: abs(bp[1].param - epsilon)):
            if abs(pt.param - epsilon) > 0.2 * abs(epsilon if epsilon else 1e-3):
                continue
            state = pt.state if resolve is None else resolve(pt, epsilon)
            if state is None:
                continue
            u_b = u_field(state)
            dist = _profile_distance(u_term, u_b)
            tol = profile_rtol * float(np.linalg.norm(u_b))
            if dist < tol:
                return {"branch": branch, "point": pt, "distance": dist,
                        "tolerance": tol}
            if best is None or dist < best[0]:
                best = (dist, tol, branch, pt)
        detail = "" if best is None else (f"; closest distance {best[0]:.3e} "
                                          f"vs tolerance {best[1]:.3e} on "
                                          f"{best[2].label}")
        raise NoMatch(f"no stable stationary branch point within profile "
                      f"tolerance at epsilon={epsilon}{detail}")

    # OSC: period + mean position against time-periodic branch points
    best = None
    for branch, pt in candidates:
        if abs(pt.param - epsilon) > max(2e-4, 0.1 * abs(epsilon)):
            continue
        period_err = abs(pt.beta - outcome.period) / outcome.period
        mean_err = abs((pt.mean_position or 0.0) - (outcome.pin_location or 0.0))
        score = period_err + mean_err
        if best is None or score < best[0]:
            best = (score, period_err, mean_err, branch, pt)
    if best is None:
        raise NoMatch(f"no time-periodic branch point near epsilon={epsilon}")
    score, period_err, mean_err, branch, pt = best
    if period_err > period_rtol:
        raise NoMatch(f"closest periodic branch point period differs by "
                      f"{period_err:.1%} at epsilon={epsilon}")
    return {"branch": branch, "point": pt, "period_error": period_err,
            "mean_position_error": mean_err}
