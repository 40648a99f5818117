"""Branch continuation, branch switching, barcode labels, and the HIOP atlas.

Natural-parameter continuation in kappa1 (homogeneous snaking / isolas) or in
the bump height epsilon (heterogeneity-induced branches), with the tip
solution as the next initial guess. Folds are rounded by swapping to
norm-parameterized steps where the parameter joins the unknowns and a fixed
increment of ||u|| is imposed. Stability runs at every accepted point; events
(saddle-node, pitchfork, Hopf, homoclinic asymptote) are recorded and refined
by bisection.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import shooting
from .errors import BlowUp, DeadEnd, FellBack, NoConvergence
from .model import HeterogeneityBump, ModelParams, kappa1_field, solve_background
from .shooting import (ConvergedSolution, ShootingTarget, StabilitySpectrum,
                       pack_coeffs, unpack_coeffs, _newton_gmres, _state_dim,
                       STEADY, STEADY_TRAVELING, TIME_PERIODIC,
                       PERIODIC_TRAVELING, U_SCALE)
from .spectral import (EtdRk4, SpectralState, half_translate, steps_for,
                       to_full, to_half, u_field, u_rms)

__all__ = [
    "StepControl", "StopRules", "BranchPoint", "Event", "Barcode", "Branch",
    "branch_norm", "continue_branch", "branch_switch",
    "continue_periodic_fixed_period", "periodic_attractor", "label_barcode",
    "hiop_atlas", "shifted_pulse_seeds", "multi_peak_seed", "find_hubs",
]

EIG_ZERO_TOL = 1e-5          # |Re lambda| below this counts as neutral
PARAM_SCALE_FLOOR = 1e-2     # parameter scaling floor inside augmented solves


@dataclass
class StepControl:
    initial: float = 2e-4
    min: float = 1e-7
    max: float = 1e-3
    grow: float = 1.3
    shrink: float = 0.5
    norm_fraction: float = 1.0   # fold-rounding norm step = fraction * last |dnorm|


@dataclass
class StopRules:
    param_range: tuple[float, float] = (-np.inf, np.inf)
    max_points: int = 2000
    stop_on_closure: bool = True
    closure_min_points: int = 12
    predicate: Optional[Callable[["BranchPoint"], bool]] = None
    wall_clock: Optional[float] = None


@dataclass
class BranchPoint:
    param: float
    solution: ConvergedSolution
    norm: float
    eigenvalues: Optional[np.ndarray]
    n_unstable: Optional[int]

    @property
    def state(self) -> SpectralState:
        return self.solution.state

    @property
    def U(self) -> float:
        return self.solution.U

    @property
    def beta(self) -> Optional[float]:
        return self.solution.beta

    @property
    def stable(self) -> Optional[bool]:
        return None if self.n_unstable is None else self.n_unstable == 0


@dataclass
class Event:
    kind: str                   # saddle-node | pitchfork | Hopf | homoclinic-asymptote
    param: float
    point_index: int
    eigenvalue: complex = 0.0
    mode: Optional[np.ndarray] = None
    note: str = ""


@dataclass
class Barcode:
    pattern: str                 # e.g. "I", "Ii", "IIII"
    shift_index: Optional[Fraction]
    kind: str                    # "S" or "T"
    ambiguous: bool = False

    def render(self) -> str:
        pat = self.pattern
        if len(pat) > 1 and len(set(pat)) == 1:
            pat = f"{pat[0]}^{len(pat)}"
        out = f"[{pat}]{self.kind}"
        if self.shift_index is not None:
            n = self.shift_index
            out += f"_{int(n)}" if n.denominator == 1 else f"_{n.numerator}/{n.denominator}"
        return out


@dataclass
class Branch:
    points: list[BranchPoint]
    kind: str
    parameter: str               # "kappa1" | "epsilon" | "beta"
    label: str = ""
    barcode: Optional[str] = None
    events: list[Event] = field(default_factory=list)
    closed: bool = False
    meta: dict = field(default_factory=dict)

    def to_rows(self) -> list[dict]:
        ev_at = {}
        for e in self.events:
            ev_at.setdefault(e.point_index, []).append(e.kind)
        rows = []
        for i, pt in enumerate(self.points):
            rows.append({
                "param": pt.param, "norm": pt.norm, "U": pt.U,
                "beta": pt.beta if pt.beta is not None else "",
                "n_unstable": pt.n_unstable if pt.n_unstable is not None else "",
                "barcode": self.barcode or "",
                "event": ";".join(ev_at.get(i, [])),
            })
        return rows


def branch_norm(sol: Union[ConvergedSolution, SpectralState],
                params: ModelParams) -> float:
    state = sol.state if isinstance(sol, ConvergedSolution) else sol
    return u_rms(state) * np.sqrt(params.domain_length)


# ------------------------------------------------------------- parameter glue

def make_param_field(parameter: str, params: ModelParams,
                     bump: Optional[HeterogeneityBump]) -> Callable[[float], object]:
    """Maps a parameter value to the kappa1 forcing handed to the steppers."""
    if parameter == "kappa1":
        return lambda v: float(v)
    if parameter == "epsilon":
        if bump is None:
            raise ValueError("epsilon continuation needs a bump template")
        return lambda v: kappa1_field(params, replace(bump, epsilon=float(v)))
    raise ValueError(f"unknown continuation parameter {parameter!r}")


def _target_like(sol: ConvergedSolution, eta: float = 1e-10,
                 t_probe: float = 0.1) -> ShootingTarget:
    return ShootingTarget(kind=sol.kind, U=sol.U, beta=sol.beta,
                          t_probe=t_probe, eta=eta)


def _leading_spectrum(sol: ConvergedSolution, params: ModelParams, kap,
                      n_eig: int, horizon: float) -> StabilitySpectrum:
    return shooting.stability(sol, params, kappa1=kap, n_requested=n_eig,
                              horizon=horizon, tol=1e-9, ncv=max(24, 3 * n_eig))


def count_unstable(eigenvalues: np.ndarray, tol: float = EIG_ZERO_TOL) -> int:
    return int(np.sum(eigenvalues.real > tol))


# -------------------------------------------------------- fold rounding solve

def _norm_step_solve(prev: ConvergedSolution, params: ModelParams,
                     field_of: Callable[[float], object], param_prev: float,
                     norm_target: float, *, dt_hint: float = 5e-3,
                     eta: float = 1e-10, max_iter: int = 25) -> tuple[ConvergedSolution, float]:
    """One norm-parameterized step: parameter unknown, ||u|| pinned.

    Returns the certified solution (re-solved through the standard path at the
    found parameter) and the parameter value.
    """
    n = params.n_modes
    L = params.domain_length
    traveling = prev.kind == STEADY_TRAVELING
    z_prev = to_half(prev.state.coeffs)
    y_state0 = pack_coeffs(z_prev, n)
    p_scale = max(abs(param_prev), PARAM_SCALE_FLOOR)
    dim = _state_dim(n)

    t_probe = 0.1
    n_steps = max(2, int(round(t_probe / dt_hint)))
    dt = t_probe / n_steps
    base = EtdRk4(params, field_of(param_prev), dt)
    # translation phase anchor from the previous profile
    k = base.k_half
    ux_prev = np.fft.irfft(1j * k * z_prev[0], n=n)
    nrm = np.linalg.norm(ux_prev)
    ux_prev = ux_prev / (nrm / np.sqrt(n)) if nrm > 0 else ux_prev
    norm_scale = max(norm_target, 1e-3)

    def split(y):
        if traveling:
            return y[:dim], float(y[dim]) * U_SCALE, float(y[-1]) * p_scale
        return y[:dim], 0.0, float(y[-1]) * p_scale

    def F(y):
        ys, U, pv = split(y)
        z = to_half(to_full(unpack_coeffs(ys, n)))
        stepper = base.with_kappa1(field_of(pv))
        zt = stepper.run(z.copy(), n_steps)
        if traveling:
            zt = half_translate(zt, -U * t_probe, L)
        res = pack_coeffs(zt, n) - ys
        rows = [res]
        if traveling:
            du = np.fft.irfft(z[0] - z_prev[0], n=n) * n
            rows.append(np.array([np.mean(ux_prev * du)]))
        un = u_rms(SpectralState(to_full(z), 0.0)) * np.sqrt(L)
        rows.append(np.array([(un - norm_target) / norm_scale * 1e1]))
        return np.concatenate(rows)

    parts = [y_state0]
    if traveling:
        parts.append([prev.U / U_SCALE])
    parts.append([param_prev / p_scale])
    y0 = np.concatenate([np.asarray(p, dtype=float) for p in parts])
    y_fin, _res, iters = _newton_gmres(F, y0, eta=10 * eta, max_iter=max_iter,
                                       gmres_rtol=1e-3, restart=300)
    ys, U, pv = split(y_fin)
    state = SpectralState(to_full(unpack_coeffs(ys, n)), 0.0)
    target = ShootingTarget(kind=prev.kind, U=U if traveling else 0.0,
                            beta=None, t_probe=t_probe, eta=eta)
    sol = shooting.solve(state, target, params, kappa1=field_of(pv),
                         parameter_tag=pv, dt_hint=dt_hint)
    return sol, pv


# ----------------------------------------------------------- main continuation

def continue_branch(start: ConvergedSolution, parameter: str,
                    params: ModelParams, *, start_param: float,
                    direction: float = 1.0,
                    step: Optional[StepControl] = None,
                    stop: Optional[StopRules] = None,
                    bump: Optional[HeterogeneityBump] = None,
                    n_eig: int = 6, stability_horizon: float = 1.0,
                    with_stability: bool = True,
                    refine_events: bool = True,
                    dt_hint: float = 5e-3,
                    log: Optional[Callable[[str], None]] = None) -> Branch:
    """Natural-parameter continuation with fold rounding and event detection."""
    step = step or StepControl()
    stop = stop or StopRules()
    field_of = make_param_field(parameter, params, bump)
    t_start = time.time()

    def say(msg):
        if log:
            log(msg)

    def solve_at(seed_sol: ConvergedSolution, pv: float) -> ConvergedSolution:
        return shooting.solve(seed_sol.state, _target_like(seed_sol), params,
                              kappa1=field_of(pv), parameter_tag=pv,
                              dt_hint=dt_hint)

    def make_point(sol: ConvergedSolution, pv: float) -> BranchPoint:
        eigs = None
        nuns = None
        if with_stability:
            spec = _leading_spectrum(sol, params, field_of(pv), n_eig,
                                     stability_horizon)
            eigs = spec.eigenvalues
            nuns = count_unstable(eigs)
            make_point.last_modes = spec.eigenmodes
        return BranchPoint(param=pv, solution=sol,
                           norm=branch_norm(sol, params),
                           eigenvalues=eigs, n_unstable=nuns)
    make_point.last_modes = None

    pts: list[BranchPoint] = [make_point(start, start_param)]
    events: list[Event] = []
    h = abs(step.initial) * (1.0 if direction >= 0 else -1.0)
    lo, hi = stop.param_range
    closed = False
    dead_end = None

    while len(pts) < stop.max_points:
        if stop.wall_clock and (time.time() - t_start) > stop.wall_clock:
            say("wall clock budget reached")
            break
        cur = pts[-1]
        if stop.predicate and stop.predicate(cur):
            say(f"stop predicate at param={cur.param:.6g}")
            break
        p_try = cur.param + h
        p_try = min(max(p_try, lo), hi)
        if p_try == cur.param:
            say(f"parameter range endpoint reached at {cur.param:.6g}")
            break
        try:
            sol = solve_at(cur.solution, p_try)
            pt = make_point(sol, p_try)
        except (NoConvergence, BlowUp):
            if abs(h) * step.shrink >= step.min:
                h *= step.shrink
                continue
            # minimum step failed: suspect a fold if an eigenvalue is near zero
            near_zero = cur.eigenvalues is None or np.min(
                np.abs(cur.eigenvalues.real)) < 1e-2
            rounded = False
            if near_zero:
                try:
                    dn = pts[-1].norm - pts[-2].norm if len(pts) >= 2 else 0.0
                    if dn == 0.0:
                        dn = 1e-4 * max(pts[-1].norm, 1e-2)
                    dn *= step.norm_fraction
                    seed_sol, pv_prev = cur.solution, cur.param
                    target_norm = cur.norm
                    fold_params = [cur.param]
                    dpv = 0.0
                    for _ in range(8):
                        target_norm += dn
                        sol, pv = _norm_step_solve(seed_sol, params, field_of,
                                                   pv_prev, target_norm,
                                                   dt_hint=dt_hint)
                        pt = make_point(sol, pv)
                        pts.append(pt)
                        say(f"fold step: param={pv:.8g} norm={pt.norm:.6g} "
                            f"n_unstable={pt.n_unstable}")
                        dpv = pv - pv_prev
                        fold_params.append(pv)
                        seed_sol, pv_prev = sol, pv
                        # stop once the parameter clearly moves back out
                        if np.sign(dpv) == -np.sign(h) and abs(dpv) >= step.min:
                            break
                    turn = (max(fold_params) if h > 0 else min(fold_params))
                    events.append(Event(kind="saddle-node", param=turn,
                                        point_index=len(pts) - 1,
                                        note="parameter turning point"))
                    say(f"fold rounded near param={turn:.8g}")
                    if dpv != 0.0:
                        h = np.sign(dpv) * min(max(abs(dpv), 10 * step.min),
                                               step.max)
                    else:
                        h = -h
                    rounded = True
                    continue
                except (NoConvergence, BlowUp):
                    pass
            if not rounded:
                dead_end = DeadEnd(
                    f"continuation stuck at param={cur.param:.6g}: "
                    f"natural and norm-parameterized steps both failed")
                say(str(dead_end))
                break
        else:
            if sol.iterations <= 2:
                h = np.sign(h) * min(abs(h) * step.grow, step.max)
        # branch invariant: norm continuity
        pts.append(pt)
        say(f"point {len(pts) - 1}: param={pt.param:.8g} norm={pt.norm:.6g} "
            f"U={pt.U:.3e} n_unstable={pt.n_unstable} h={h:.2e}")
        # event detection on stability change
        if with_stability and pts[-2].n_unstable is not None and \
                pt.n_unstable is not None and pt.n_unstable != pts[-2].n_unstable:
            ev = _classify_stability_event(pts[-2], pt, solve_at, params,
                                           field_of, n_eig, stability_horizon,
                                           refine=refine_events)
            ev.point_index = len(pts) - 1
            events.append(ev)
            say(f"event: {ev.kind} at param={ev.param:.8g}")
        # isola closure
        if stop.stop_on_closure and len(pts) > stop.closure_min_points:
            p0, n0 = pts[0].param, pts[0].norm
            dp = abs(pt.param - p0)
            dnorm = abs(pt.norm - n0)
            if dp < 2 * abs(h) and dnorm < max(2 * abs(pt.norm - pts[-2].norm),
                                               1e-8):
                zdist = np.max(np.abs(pt.state.coeffs - pts[0].state.coeffs))
                if zdist < 1e-4 * max(1.0, np.max(np.abs(pts[0].state.coeffs))):
                    closed = True
                    say("closed branch: returned to start")
                    break
    br = Branch(points=pts, kind=start.kind, parameter=parameter,
                events=events, closed=closed)
    if dead_end is not None:
        br.meta["dead_end"] = str(dead_end)
    return br


def _classify_stability_event(before: BranchPoint, after: BranchPoint,
                              solve_at, params, field_of, n_eig, horizon,
                              refine: bool = True) -> Event:
    """Name the eigenvalue crossing between two consecutive branch points."""
    # the crossing eigenvalue: on the side it just moved to, nearest the axis
    new_unstable = after.n_unstable > before.n_unstable
    pool = [ev for ev in after.eigenvalues
            if (ev.real > EIG_ZERO_TOL) == new_unstable]
    lam = min(pool, key=lambda ev: abs(ev.real)) if pool else 0.0
    is_complex = abs(np.imag(lam)) > 10 * EIG_ZERO_TOL
    # folds are caught by the norm-parameterized path; a stability flip with
    # monotone parameter is a pitchfork (real crossing) or Hopf (complex pair)
    kind = "Hopf" if is_complex else "pitchfork"
    p_lo, p_hi = before.param, after.param
    if refine:
        tol = 1e-4 * max(abs(p_lo), abs(p_hi), 0.01)
        n_lo = before.n_unstable
        seed = before.solution
        while abs(p_hi - p_lo) > tol:
            mid = 0.5 * (p_lo + p_hi)
            try:
                sol_mid = solve_at(seed, mid)
            except (NoConvergence, BlowUp):
                break
            spec = _leading_spectrum(sol_mid, params, field_of(mid), n_eig,
                                     horizon)
            if count_unstable(spec.eigenvalues) == n_lo:
                p_lo, seed = mid, sol_mid
            else:
                p_hi = mid
    return Event(kind=kind, param=0.5 * (p_lo + p_hi), point_index=-1,
                 eigenvalue=complex(lam))


# -------------------------------------------------------------- branch switch

def branch_switch(branch: Branch, event: Event, params: ModelParams, *,
                  weight: float = 0.02, bump: Optional[HeterogeneityBump] = None,
                  dt_hint: float = 5e-3) -> ConvergedSolution:
    """Seed and converge the bifurcating branch at a pitchfork event."""
    field_of = make_param_field(branch.parameter, params, bump)
    anchor = branch.points[min(event.point_index, len(branch.points) - 1)]
    mode = event.mode
    if mode is None:
        spec = shooting.stability(anchor.solution, params,
                                  kappa1=field_of(anchor.param),
                                  n_requested=6, horizon=1.0, tol=1e-9, ncv=24)
        # pick the mode whose exponent is closest to the event eigenvalue
        j = int(np.argmin(np.abs(spec.eigenvalues - event.eigenvalue)))
        mode = spec.eigenmodes[j]
    z = anchor.state.coeffs
    znorm = np.linalg.norm(z)
    w = weight
    while True:
        mv = np.real(mode)
        mv = mv / max(np.linalg.norm(mv), 1e-300)
        seed = SpectralState(z + w * znorm * mv, 0.0)
        sol = shooting.solve(seed, _target_like(anchor.solution), params,
                             kappa1=field_of(anchor.param),
                             parameter_tag=anchor.param, dt_hint=dt_hint)
        dist = np.linalg.norm(sol.state.coeffs - z) / max(znorm, 1e-300)
        if dist > 1e-5:
            return sol
        if w >= 0.10:
            raise FellBack(f"branch switch kept landing on the parent branch "
                           f"(weight up to {w:.2f})")
        w = min(2.0 * w, 0.10)


# ---------------------------------------------- period-stepped periodic branch

def continue_periodic_fixed_period(start: ConvergedSolution, params: ModelParams,
                                   *, start_param: float,
                                   parameter: str = "epsilon",
                                   bump: Optional[HeterogeneityBump] = None,
                                   beta_step: float = 0.05,
                                   beta_factor_max: float = 0.25,
                                   divergence_factor: float = 50.0,
                                   epsilon_locked_tol: float = 1e-8,
                                   max_points: int = 400,
                                   n_steps_flow: int = 40,
                                   dt_cap: float = 5e-3,
                                   eta: float = 1e-9,
                                   log: Optional[Callable[[str], None]] = None
                                   ) -> Branch:
    """Continuation of a time-periodic branch with beta stepped, epsilon free.

    Emits period-vs-epsilon data; flags a homoclinic/heteroclinic asymptote
    when beta exceeds divergence_factor times the starting period while the
    epsilon increment per step collapses below epsilon_locked_tol.
    """
    if start.kind not in (TIME_PERIODIC, PERIODIC_TRAVELING):
        raise ValueError("start must be a time-periodic solution")
    field_of = make_param_field(parameter, params, bump)
    n = params.n_modes
    L = params.domain_length
    traveling = start.kind == PERIODIC_TRAVELING
    dim = _state_dim(n)
    beta0 = float(start.beta)

    def say(msg):
        if log:
            log(msg)

    def solve_at_beta(seed_state: SpectralState, beta: float, pv_guess: float,
                      U_guess: float) -> tuple[ConvergedSolution, float]:
        p_scale = max(abs(pv_guess), PARAM_SCALE_FLOOR * 1e-1)
        n_flow = max(n_steps_flow, int(np.ceil(beta / dt_cap)))
        dt = beta / n_flow
        base = EtdRk4(params, field_of(pv_guess), dt)
        z_seed = to_half(seed_state.coeffs)
        anchor = base.with_kappa1(field_of(pv_guess)).rhs(z_seed)
        anchor_packed = pack_coeffs(anchor, n)
        anorm = np.linalg.norm(anchor_packed)
        if anorm < 1e-14:
            raise NoConvergence(0, anorm)
        anchor_packed /= anorm
        y_seed = pack_coeffs(z_seed, n)
        k = base.k_half
        ux_seed = np.fft.irfft(1j * k * z_seed[0], n=n)
        ux_seed /= max(np.linalg.norm(ux_seed) / np.sqrt(n), 1e-300)

        def split(y):
            if traveling:
                return y[:dim], float(y[dim]) * U_SCALE, float(y[-1]) * p_scale
            return y[:dim], 0.0, float(y[-1]) * p_scale

        def F(y):
            ys, U, pv = split(y)
            z = to_half(to_full(unpack_coeffs(ys, n)))
            stepper = base.with_kappa1(field_of(pv))
            zt = stepper.run(z.copy(), n_flow)
            if traveling:
                zt = half_translate(zt, -U * beta, L)
            rows = [pack_coeffs(zt, n) - ys,
                    np.array([np.dot(anchor_packed, ys - y_seed)])]
            if traveling:
                du = np.fft.irfft(z[0] - z_seed[0], n=n) * n
                rows.append(np.array([np.mean(ux_seed * du)]))
            return np.concatenate(rows)

        parts = [y_seed]
        if traveling:
            parts.append([U_guess / U_SCALE])
        parts.append([pv_guess / p_scale])
        y0 = np.concatenate([np.asarray(p, dtype=float) for p in parts])
        y_fin, res, iters = _newton_gmres(F, y0, eta=eta, max_iter=25,
                                          gmres_rtol=1e-3, restart=300)
        ys, U, pv = split(y_fin)
        state = SpectralState(to_full(unpack_coeffs(ys, n)), 0.0)
        sol = ConvergedSolution(state=state, kind=start.kind,
                                U=U if traveling else 0.0, beta=beta,
                                residual=res, parameter_tag=pv,
                                iterations=iters,
                                probes={"mode": "beta-stepped"})
        return sol, pv

    pts = [BranchPoint(param=start_param, solution=start,
                       norm=branch_norm(start, params), eigenvalues=None,
                       n_unstable=None)]
    events: list[Event] = []
    h = beta_step * beta0
    beta = beta0
    pv = start_param
    U_g = start.U
    while len(pts) < max_points:
        beta_try = beta + h
        try:
            sol, pv_new = solve_at_beta(pts[-1].state, beta_try, pv, U_g)
        except (NoConvergence, BlowUp):
            if abs(h) < 1e-4 * beta0:
                pts_branch = Branch(points=pts, kind=start.kind,
                                    parameter="beta", events=events,
                                    meta={"dead_end": f"beta step failed at "
                                                      f"beta={beta:.6g}"})
                return pts_branch
            h *= 0.5
            continue
        dpv = pv_new - pv
        beta = beta_try
        pv = pv_new
        U_g = sol.U
        pts.append(BranchPoint(param=pv, solution=sol,
                               norm=branch_norm(sol, params),
                               eigenvalues=None, n_unstable=None))
        say(f"beta={beta:.6g} epsilon={pv:.10g} depsilon={dpv:.2e} "
            f"iters={sol.iterations}")
        h = min(h * 1.3, beta_factor_max * beta)
        if beta > divergence_factor * beta0 and abs(dpv) < epsilon_locked_tol:
            events.append(Event(kind="homoclinic-asymptote", param=pv,
                                point_index=len(pts) - 1,
                                note=f"beta={beta:.4g} > "
                                     f"{divergence_factor}*beta0, epsilon "
                                     f"locked to {pv:.10g}"))
            break
    return Branch(points=pts, kind=start.kind, parameter="beta", events=events,
                  meta={"beta0": beta0, "beta_final": beta})


def periodic_attractor(initial: SpectralState, params: ModelParams, kappa1, *,
                       u_bar: float, t_transient: float = 2000.0,
                       t_observe: float = 4000.0, dt: float = 2e-3,
                       sample_dt: float = 0.5) -> dict:
    """Period and mean position of a stable oscillation by direct simulation.

    Used where Newton on the period map is impractical (periods of hundreds of
    time units); the returned snapshot/period feed the periodic-branch records
    in attractor mode.
    """
    from .spectral import run_collision

    stepper = EtdRk4(params, kappa1, dt)
    z = to_half(initial.coeffs).copy()
    z = stepper.run(z, steps_for(t_transient, dt), t0=initial.time)
    state = SpectralState(to_full(z), initial.time + t_transient)
    traj = run_collision(state, params, None, t_observe, sample_dt,
                         stepper=stepper)
    p = traj.position
    t = traj.t
    center = float(np.mean(p))
    dev = p - center
    up = np.nonzero((dev[:-1] < 0) & (dev[1:] >= 0))[0]
    period = None
    if len(up) >= 3:
        t_up = t[up] - dev[up] * (t[up + 1] - t[up]) / (dev[up + 1] - dev[up])
        period = float(np.median(np.diff(t_up)))
    return {"period": period, "mean_position": center,
            "amplitude": 0.5 * float(np.ptp(p)), "final_state": traj.final_state,
            "trajectory": traj}


# ------------------------------------------------------------------- barcodes

def label_barcode(sol: ConvergedSolution, params: ModelParams, *,
                  tail_b: float, bump_center: Optional[float] = None,
                  kappa1_base: Optional[float] = None) -> Barcode:
    """Peak-structure label: I/i pattern plus tail-offset shift index."""
    kb = params.kappa1_base if kappa1_base is None else kappa1_base
    u_bar = solve_background(params, kb).u_bar
    u = u_field(sol.state)
    n = params.n_modes
    L = params.domain_length
    dev = u - u_bar
    mx = float(np.max(dev))
    if mx <= 0:
        return Barcode(pattern="", shift_index=None,
                       kind="T" if abs(sol.U) > 0 else "S")
    left = np.roll(dev, 1)
    right = np.roll(dev, -1)
    idx = np.nonzero((dev > left) & (dev >= right) & (dev > 0.05 * mx))[0]
    if len(idx) == 0:
        return Barcode(pattern="", shift_index=None,
                       kind="T" if abs(sol.U) > 0 else "S")
    pos = idx * (L / n)
    # order around the circle starting after the widest empty gap
    order = np.argsort(pos)
    pos = pos[order]
    idx = idx[order]
    gaps = np.diff(np.concatenate([pos, [pos[0] + L]]))
    start = (int(np.argmax(gaps)) + 1) % len(pos)
    pos = np.concatenate([pos[start:], pos[:start] + L])
    idx = np.concatenate([idx[start:], idx[:start]])
    heights = dev[idx]
    pattern = "".join("I" if hgt >= 0.25 * mx else "i" for hgt in heights)
    ambiguous = bool(np.any(np.abs(heights - 0.25 * mx) < 0.05 * 0.25 * mx))
    kind = "T" if abs(sol.U) > 1e-9 else "S"
    shift: Optional[Fraction] = None
    if bump_center is not None:
        half_wave = np.pi / tail_b
        offs = (pos - bump_center + 0.5 * L) % L - 0.5 * L
        ints = [int(np.rint(o / half_wave)) for o in offs]
        shift = Fraction(sum(ints), len(ints))
    return Barcode(pattern=pattern, shift_index=shift, kind=kind,
                   ambiguous=ambiguous)


# ----------------------------------------------------------------- HIOP atlas

def shifted_pulse_seeds(pulse: ConvergedSolution, params: ModelParams,
                        zero_offsets: Sequence[float],
                        indices: Sequence[int] = (0, -1, -2, -3, -4),
                        center: Optional[float] = None
                        ) -> list[tuple[str, SpectralState]]:
    """Fourier-shift the centered one-peak pulse to the forcing zeros.

    zero_offsets maps shift index n -> pinning offset p_n (zeros of f); the
    pulse peak is moved to bump_center + p_n.
    """
    n = params.n_modes
    L = params.domain_length
    z = to_half(pulse.state.coeffs)
    u = np.fft.irfft(z[0], n=n)
    x_peak = float(np.argmax(u)) * (L / n)
    c = 0.5 * L if center is None else center
    offsets = dict(zip(indices, zero_offsets)) if not isinstance(
        zero_offsets, dict) else zero_offsets
    seeds = []
    for ni in indices:
        p_n = offsets[ni]
        shift = (c + p_n) - x_peak
        zs = half_translate(z, shift, L)
        seeds.append((f"[I]S_{ni}", SpectralState(to_full(zs), 0.0)))
    return seeds


def multi_peak_seed(pulse: ConvergedSolution, params: ModelParams,
                    peak_positions: Sequence[float], u_bar: float
                    ) -> SpectralState:
    """Superpose shifted copies of the pulse deviation on the background."""
    n = params.n_modes
    L = params.domain_length
    z = to_half(pulse.state.coeffs)
    u = np.fft.irfft(z[0], n=n)
    x_peak = float(np.argmax(u)) * (L / n)
    acc = None
    for px in peak_positions:
        zs = half_translate(z, px - x_peak, L)
        acc = zs if acc is None else acc + zs
    # remove the extra copies of the uniform background (mode 0 of u and v)
    extra = len(peak_positions) - 1
    acc[0, 0] -= extra * u_bar * n
    acc[1, 0] -= extra * u_bar * n
    return SpectralState(to_full(acc), 0.0)


def find_hubs(branch: Branch, params: ModelParams, tail_b: float,
              spacing_rtol: float = 0.10) -> list[dict]:
    """Zero-epsilon crossings of an atlas branch, marked footprint or not.

    A crossing is a sign change of the parameter; the crossing state's peak
    spacings are compared with the tail half-wavelength pi/b: uniform spacing
    within spacing_rtol marks a snaking footprint.
    """
    hubs = []
    pts = branch.points
    n = params.n_modes
    L = params.domain_length
    half_wave = np.pi / tail_b
    for i in range(len(pts) - 1):
        a, b = pts[i].param, pts[i + 1].param
        if a == 0.0 or a * b >= 0:
            continue
        pt = pts[i] if abs(a) <= abs(b) else pts[i + 1]
        u_bar = solve_background(params, params.kappa1_base).u_bar
        dev = u_field(pt.state) - u_bar
        mx = float(np.max(dev))
        left = np.roll(dev, 1)
        right = np.roll(dev, -1)
        idx = np.nonzero((dev > left) & (dev >= right) & (dev > 0.25 * mx))[0]
        pos = np.sort(idx * (L / n))
        footprint = None
        spacings = []
        if len(pos) >= 2:
            gaps = np.diff(np.concatenate([pos, [pos[0] + L]]))
            interior = np.sort(gaps)[:-1]  # drop the wraparound empty gap
            spacings = list(interior)
            footprint = bool(np.all(np.abs(interior / half_wave -
                                           np.rint(interior / half_wave))
                                    < spacing_rtol))
        hubs.append({"point_index": i, "param": pt.param,
                     "n_peaks": int(len(pos)), "peak_positions": pos,
                     "spacings": spacings, "footprint": footprint})
    return hubs


def hiop_atlas(params: ModelParams, seeds: Sequence[tuple[str, SpectralState]],
               epsilon_range: tuple[float, float], *, bump_d: float = 0.05,
               bump_gamma: float = 100.0, eps_seed: float = 1e-5,
               step: Optional[StepControl] = None,
               stop_extra: Optional[StopRules] = None,
               tail_b: Optional[float] = None,
               n_eig: int = 6, with_stability: bool = True,
               dt_hint: float = 5e-3,
               log: Optional[Callable[[str], None]] = None) -> dict:
    """Continue every seed across the epsilon range; collect branches and hubs.

    Each seed is Newton-corrected at a small positive epsilon, then continued
    to both range endpoints. Per-branch DeadEnd is recorded, not fatal.
    """
    bump = HeterogeneityBump(epsilon=eps_seed, d=bump_d, gamma=bump_gamma)
    lo, hi = epsilon_range
    branches = []
    failures = {}
    for label, seed_state in seeds:
        try:
            target = ShootingTarget(kind=STEADY)
            sol0 = shooting.solve(
                seed_state, target, params,
                kappa1=kappa1_field(params, bump), parameter_tag=eps_seed,
                dt_hint=dt_hint)
        except (NoConvergence, BlowUp) as exc:
            failures[label] = f"seed correction failed: {exc}"
            continue
        for direction, bound in ((+1.0, hi), (-1.0, lo)):
            stop = StopRules(param_range=(lo, hi) if direction > 0 else (lo, hi),
                             max_points=(stop_extra.max_points
                                         if stop_extra else 400),
                             stop_on_closure=True,
                             wall_clock=(stop_extra.wall_clock
                                         if stop_extra else None))
            try:
                br = continue_branch(sol0, "epsilon", params,
                                     start_param=eps_seed,
                                     direction=direction, step=step, stop=stop,
                                     bump=bump, n_eig=n_eig,
                                     with_stability=with_stability,
                                     dt_hint=dt_hint, log=log)
            except DeadEnd as exc:
                failures[f"{label}:{direction:+.0f}"] = str(exc)
                continue
            br.label = f"{label}:{'up' if direction > 0 else 'down'}"
            if tail_b is not None and br.points:
                mid = br.points[len(br.points) // 2]
                br.barcode = label_barcode(
                    mid.solution, params, tail_b=tail_b,
                    bump_center=bump.resolved_center(params.domain_length)
                ).render()
            branches.append(br)
    atlas = {"branches": branches, "failures": failures, "hubs": []}
    if tail_b is not None:
        for br in branches:
            atlas["hubs"].extend(
                {"branch": br.label, **hub}
                for hub in find_hubs(br, params, tail_b))
    return atlas
