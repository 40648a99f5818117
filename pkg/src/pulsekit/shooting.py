"""Matrix-free Newton-Krylov shooting for pulses, plus Arnoldi stability tools.

Solution classes and their unknowns/criteria:

  Steady            flow(z, t) = z for probe times t          unknowns: z
  SteadyTraveling   shift(flow(z, t), -U t) = z               unknowns: z, U
  TimePeriodic      flow(z, beta) = z                         unknowns: z, beta
  PeriodicTraveling shift(flow(z, beta), -U beta) = z         unknowns: z, U, beta

Traveling classes are closed by the translation phase condition
<du_seed/dx, u - u_seed> = 0 and periodic classes by the time-phase anchor
<rhs(z_seed), z - z_seed> = 0. The Newton direction comes from GMRES with
Jacobian action by forward differencing of the flow map. Unknown vectors pack
the Hermitian half-spectrum (n-normalized coefficients, Nyquist pinned to zero)
so the Euclidean norm of a state block is its grid rms.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs, gmres

from .errors import (ArnoldiBreakdown, BlowUp, NoConvergence, NoFiniteWavenumber,
                     SingularPhaseCondition)
from .model import ModelParams, kappa1_field, solve_background, grid_x
from .spectral import (EtdRk4, LinearizedEtdRk4, SpectralState, half_translate,
                       state_from_grid, to_full, to_half)

__all__ = [
    "STEADY", "STEADY_TRAVELING", "TIME_PERIODIC", "PERIODIC_TRAVELING",
    "ShootingTarget", "ConvergedSolution", "StabilitySpectrum", "GoldstoneReport",
    "solve", "verify_solution", "stability", "goldstone_check",
    "linearized_trivial_spectrum", "dispersion_a", "critical_wavenumber",
    "hopf_onset", "pitchfork_onset",
    "make_pulse_seed", "find_stationary_pulse", "traveling_seed",
    "estimate_drift_speed", "drift_eigenvalue", "drift_bifurcation_tau",
    "pack_coeffs", "unpack_coeffs",
]

STEADY = "Steady"
STEADY_TRAVELING = "SteadyTraveling"
TIME_PERIODIC = "TimePeriodic"
PERIODIC_TRAVELING = "PeriodicTraveling"
_CLASSES = (STEADY, STEADY_TRAVELING, TIME_PERIODIC, PERIODIC_TRAVELING)
_TRAVELING = (STEADY_TRAVELING, PERIODIC_TRAVELING)
_PERIODIC = (TIME_PERIODIC, PERIODIC_TRAVELING)

U_SCALE = 1e-3  # typical pulse speeds are a few 1e-4; scales the packed U unknown

_GMRES_TOL_KW = "rtol" if "rtol" in inspect.signature(gmres).parameters else "tol"


def _gmres(A, b, rtol: float, restart: int, maxiter: int, x0=None):
    kw = {_GMRES_TOL_KW: rtol, "atol": 0.0, "restart": restart, "maxiter": maxiter}
    return gmres(A, b, x0=x0, **kw)


# ---------------------------------------------------------------- packing

def pack_coeffs(z_half: np.ndarray, n: int) -> np.ndarray:
    """Real unknown vector from raw half-spectrum coefficients (normalized by n).

    Keeps Re of mode 0, Re and Im of modes 1..n/2-1; the Nyquist bin is dropped
    (pinned to zero everywhere in the stepper). Euclidean norm of the result is
    the grid rms of the two fields combined (up to a fixed factor sqrt(1/2)).
    """
    z = z_half / n
    return np.concatenate([z[:, 0].real, z[:, 1:-1].real.ravel(),
                           z[:, 1:-1].imag.ravel()])


def unpack_coeffs(y: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pack_coeffs; returns raw half-spectrum coefficients."""
    nh = n // 2 + 1
    m = nh - 2
    z = np.zeros((2, nh), dtype=complex)
    z[:, 0] = y[:2]
    z[:, 1:-1] = y[2:2 + 2 * m].reshape(2, m) + 1j * y[2 + 2 * m:2 + 4 * m].reshape(2, m)
    return z * n


def _state_dim(n: int) -> int:
    return 2 + 4 * (n // 2 - 1)


# ---------------------------------------------------------------- targets

@dataclass
class ShootingTarget:
    """Requested solution class with initial guesses for its free unknowns.

    U and beta double as initial guesses going in and are read back from the
    ConvergedSolution; only the unknowns of the chosen class may be set.
    """

    kind: str
    U: float = 0.0
    beta: Optional[float] = None
    t_probe: float = 0.1
    eta: float = 1e-10

    def __post_init__(self) -> None:
        if self.kind not in _CLASSES:
            raise ValueError(f"unknown solution class {self.kind!r}; "
                             f"expected one of {_CLASSES}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.t_probe <= 0:
            raise ValueError("t_probe must be positive")
        if self.kind in _PERIODIC:
            if self.beta is None or self.beta <= 0:
                raise ValueError("periodic classes need a positive beta guess")
        elif self.beta is not None:
            raise ValueError(f"{self.kind} has no period unknown")
        if self.kind not in _TRAVELING and self.U != 0.0:
            raise ValueError(f"{self.kind} has no velocity unknown")


@dataclass
class ConvergedSolution:
    state: SpectralState
    kind: str
    U: float
    beta: Optional[float]
    residual: float
    parameter_tag: float
    iterations: int = 0
    probes: dict = field(default_factory=dict)


@dataclass
class StabilitySpectrum:
    eigenvalues: np.ndarray   # generator exponents log(mu)/T, sorted by Re desc
    multipliers: np.ndarray   # flow-map eigenvalues mu over horizon T
    eigenmodes: np.ndarray    # (k, 2, n_modes) full-spectrum coefficient vectors
    n_requested: int
    horizon: float


# ---------------------------------------------------------------- newton core

def _newton_gmres(F, y0: np.ndarray, eta: float, max_iter: int,
                  gmres_rtol: float, restart: int, jac_step: float = 1e-7):
    """Inexact Newton with forward-difference Jacobian actions and backtracking."""
    y = np.asarray(y0, dtype=float).copy()
    r = F(y)
    rn = float(np.linalg.norm(r))
    dim = len(y)
    for it in range(max_iter):
        if rn < eta:
            return y, rn, it
        h0 = jac_step * max(float(np.linalg.norm(y)), 1e-2)

        def matvec(v, _y=y, _r=r, _h0=h0):
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                return np.zeros_like(v)
            h = _h0 / nv
            return (F(_y + h * v) - _r) / h

        A = LinearOperator((dim, dim), matvec=matvec, dtype=float)
        d, _info = _gmres(A, -r, rtol=gmres_rtol, restart=min(restart, dim),
                          maxiter=1)
        if not np.all(np.isfinite(d)) or np.linalg.norm(d) == 0.0:
            raise NoConvergence(it, rn)
        # backtracking keeps the iteration inside the basin on hard steps
        step = 1.0
        accepted = False
        for _ in range(6):
            y_try = y + step * d
            try:
                r_try = F(y_try)
                rn_try = float(np.linalg.norm(r_try))
            except BlowUp:
                rn_try = np.inf
                r_try = None
            if rn_try < rn or rn_try < eta:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NoConvergence(it + 1, rn)
        y, r, rn = y_try, r_try, rn_try
    if rn < eta:
        return y, rn, max_iter
    raise NoConvergence(max_iter, rn)


# ---------------------------------------------------------------- residual maps

class _ShootingProblem:
    """Assembles the packed unknown vector and Table-style residual per class."""

    def __init__(self, seed: SpectralState, target: ShootingTarget,
                 params: ModelParams, kappa1, dt_hint: float):
        self.params = params
        self.target = target
        self.n = params.n_modes
        self.L = params.domain_length
        self.kind = target.kind
        self.kappa1 = kappa1
        z_seed = to_half(seed.coeffs)
        z_seed[:, -1] = 0.0
        self.z_seed = z_seed
        self.y_seed_state = pack_coeffs(z_seed, self.n)
        self.has_U = self.kind in _TRAVELING
        self.has_beta = self.kind in _PERIODIC
        self.dim = _state_dim(self.n) + int(self.has_U) + int(self.has_beta)
        self.beta_seed = target.beta if self.has_beta else None

        if self.has_beta:
            self.n_steps = max(int(round(target.beta / dt_hint)), 2)
            self._stepper_cache: dict[float, EtdRk4] = {}
        else:
            self.n_steps = max(int(round(target.t_probe / dt_hint)), 1)
            self.t_flow = target.t_probe
            self.stepper = EtdRk4(params, kappa1, target.t_probe / self.n_steps)

        if self.has_U:
            ux = np.fft.irfft(1j * self._k() * z_seed[0], n=self.n)
            nux = float(np.sqrt(np.mean(ux * ux)))
            if nux < 1e-12:
                raise SingularPhaseCondition(
                    "seed u profile is constant; translation phase condition is singular")
            self._anchor_ux = ux / nux
            self._u_seed = np.fft.irfft(z_seed[0], n=self.n)
        if self.has_beta:
            rhs_seed = EtdRk4(params, kappa1, dt_hint).rhs(z_seed)
            y_rhs = pack_coeffs(rhs_seed, self.n)
            nr = float(np.linalg.norm(y_rhs))
            if nr < 1e-14:
                raise SingularPhaseCondition(
                    "seed is an equilibrium; time-phase anchor is singular")
            self._anchor_rhs = y_rhs / nr

    def _k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.L / self.n)

    def _stepper_for(self, beta: float) -> EtdRk4:
        dt = beta / self.n_steps
        sp = self._stepper_cache.get(dt)
        if sp is None:
            sp = EtdRk4(self.params, self.kappa1, dt)
            if len(self._stepper_cache) > 8:
                self._stepper_cache.clear()
            self._stepper_cache[dt] = sp
        return sp

    def initial_vector(self) -> np.ndarray:
        parts = [self.y_seed_state]
        if self.has_U:
            parts.append([self.target.U / U_SCALE])
        if self.has_beta:
            parts.append([1.0])  # beta packed relative to its seed value
        return np.concatenate(parts)

    def split(self, y: np.ndarray):
        ns = _state_dim(self.n)
        z = unpack_coeffs(y[:ns], self.n)
        i = ns
        U = 0.0
        beta = None
        if self.has_U:
            U = float(y[i]) * U_SCALE
            i += 1
        if self.has_beta:
            beta = float(y[i]) * self.beta_seed
        return z, U, beta

    def residual(self, y: np.ndarray) -> np.ndarray:
        z, U, beta = self.split(y)
        if self.has_beta:
            if beta <= 0:
                return np.full(self.dim, 1e3)
            stepper = self._stepper_for(beta)
            t_flow = beta
        else:
            stepper = self.stepper
            t_flow = self.t_flow
        out = stepper.run(z.copy(), self.n_steps, check_every=10 ** 9)
        if self.has_U and U != 0.0:
            out = half_translate(out, -U * t_flow, self.L)
        res = [pack_coeffs(out, self.n) - y[:len(self.y_seed_state)]]
        if self.has_U:
            u = np.fft.irfft(z[0], n=self.n)
            res.append([float(np.mean(self._anchor_ux * (u - self._u_seed)))])
        if self.has_beta:
            res.append([float(np.dot(self._anchor_rhs,
                                     y[:len(self.y_seed_state)] - self.y_seed_state))])
        return np.concatenate(res)


def solve(seed: SpectralState, target: ShootingTarget, params: ModelParams,
          kappa1=None, *, parameter_tag: Optional[float] = None,
          dt_hint: float = 5e-3, max_iter: int = 25, gmres_rtol: float = 1e-3,
          gmres_restart: int = 300, certify: bool = True) -> ConvergedSolution:
    """Newton-Krylov solve for the requested solution class from a nearby seed.

    The returned residual is re-evaluated independently of the solver loop
    (fresh integration; halved step for non-periodic classes) and must pass
    target.eta, else NoConvergence is raised.
    """
    if kappa1 is None:
        kappa1 = params.kappa1_base
    prob = _ShootingProblem(seed, target, params, kappa1, dt_hint)
    y, rn, iters = _newton_gmres(prob.residual, prob.initial_vector(), target.eta,
                                 max_iter, gmres_rtol, gmres_restart)
    z, U, beta = prob.split(y)
    sol = ConvergedSolution(state=SpectralState(to_full(z), 0.0), kind=target.kind,
                            U=U, beta=beta, residual=rn,
                            parameter_tag=(parameter_tag if parameter_tag is not None
                                           else params.kappa1_base),
                            iterations=iters)
    if certify:
        probes = verify_solution(sol, params, kappa1, target=target, dt_hint=dt_hint)
        sol.probes = probes
        sol.residual = max(probes.values())
        if sol.residual >= target.eta:
            raise NoConvergence(iters, sol.residual)
    return sol


def verify_solution(sol: ConvergedSolution, params: ModelParams, kappa1=None, *,
                    target: Optional[ShootingTarget] = None,
                    dt_hint: float = 5e-3) -> dict:
    """Independent re-integration residuals for the solution's class criterion.

    Non-periodic classes are probed at t_probe, t_probe/2 and t_probe/10 with a
    halved time step; periodic classes are probed over one full period with the
    solve-time step count (the orbit is a fixed point of that discrete flow).
    Values are grid-rms residual norms.
    """
    if kappa1 is None:
        kappa1 = params.kappa1_base
    n = params.n_modes
    L = params.domain_length
    z0 = to_half(sol.state.coeffs)
    y0 = pack_coeffs(z0, n)
    out: dict[str, float] = {}
    if sol.kind in _PERIODIC:
        beta = sol.beta
        n_steps = max(int(round(beta / dt_hint)), 2)
        stepper = EtdRk4(params, kappa1, beta / n_steps)
        zt = stepper.run(z0.copy(), n_steps, check_every=10 ** 9)
        if sol.kind == PERIODIC_TRAVELING and sol.U != 0.0:
            zt = half_translate(zt, -sol.U * beta, L)
        out["beta"] = float(np.linalg.norm(pack_coeffs(zt, n) - y0))
        return out
    t_probe = target.t_probe if target is not None else 0.1
    for label, s in (("t_probe", t_probe), ("t_probe/2", t_probe / 2),
                     ("t_probe/10", t_probe / 10)):
        n_steps = max(int(round(s / (dt_hint / 2))), 1)
        dt = s / n_steps
        stepper = EtdRk4(params, kappa1, dt)
        zt = stepper.run(z0.copy(), n_steps, check_every=10 ** 9)
        if sol.kind == STEADY_TRAVELING and sol.U != 0.0:
            zt = half_translate(zt, -sol.U * s, L)
        out[label] = float(np.linalg.norm(pack_coeffs(zt, n) - y0))
    return out


# ---------------------------------------------------------------- stability

def _mode_to_full(vec: np.ndarray, n: int) -> np.ndarray:
    """Full-spectrum complex eigenmode from a packed (possibly complex) vector."""
    zr = unpack_coeffs(np.real(vec), n) / n
    zi = unpack_coeffs(np.imag(vec), n) / n
    return to_full(zr) + 1j * to_full(zi)


def stability(sol: ConvergedSolution, params: ModelParams, kappa1=None, *,
              n_requested: int = 8, horizon: float = 0.1, dt_hint: float = 5e-3,
              tol: float = 1e-10, ncv: Optional[int] = None,
              seed_vector: Optional[np.ndarray] = None) -> StabilitySpectrum:
    """Leading linear-stability spectrum via Arnoldi on the time-T flow map.

    Steady and traveling classes use the exact linearized (comoving) integrator
    about the frozen profile over horizon T; periodic classes use forward
    differencing of the nonlinear period map. Eigenvalues are returned as
    generator exponents log(mu)/T sorted by descending real part.
    """
    if kappa1 is None:
        kappa1 = params.kappa1_base
    n = params.n_modes
    dim = _state_dim(n)
    k = min(n_requested, dim - 2)
    z0 = to_half(sol.state.coeffs)

    if sol.kind in _PERIODIC:
        T = float(sol.beta)
        n_steps = max(int(round(T / dt_hint)), 2)
        stepper = EtdRk4(params, kappa1, T / n_steps)
        base = stepper.run(z0.copy(), n_steps, check_every=10 ** 9)
        if sol.kind == PERIODIC_TRAVELING and sol.U != 0.0:
            base = half_translate(base, -sol.U * T, params.domain_length)
        y_base = pack_coeffs(base, n)
        y0 = pack_coeffs(z0, n)
        h0 = 1e-7 * max(float(np.linalg.norm(y0)), 1e-2)

        def matvec(v):
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                return np.zeros_like(v)
            h = h0 / nv
            zp = unpack_coeffs(y0 + h * v, n)
            out = stepper.run(zp, n_steps, check_every=10 ** 9)
            if sol.kind == PERIODIC_TRAVELING and sol.U != 0.0:
                out = half_translate(out, -sol.U * T, params.domain_length)
            return (pack_coeffs(out, n) - y_base) / h
    else:
        T = float(horizon)
        n_steps = max(int(round(T / dt_hint)), 1)
        base_stepper = EtdRk4(params, kappa1, T / n_steps)
        lin = LinearizedEtdRk4(base_stepper, z0[0], advect=sol.U)

        def matvec(v):
            d = unpack_coeffs(v, n)
            return pack_coeffs(lin.run(d, n_steps), n)

    A = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    rng = np.random.default_rng(7)
    v0 = seed_vector if seed_vector is not None else rng.standard_normal(dim)
    if np.iscomplexobj(v0):
        v0 = np.ascontiguousarray(v0.real) + np.ascontiguousarray(v0.imag)
    mu = modes = None
    for attempt in range(2):
        try:
            mu, modes = eigs(A, k=k, which="LM", tol=tol, v0=v0, ncv=ncv)
            break
        except (ArpackNoConvergence, ArpackError):
            if attempt == 1:
                raise ArnoldiBreakdown("Arnoldi iteration failed twice on the "
                                       "flow-map operator")
            v0 = rng.standard_normal(dim)
    lam = np.log(mu.astype(complex)) / T
    order = np.argsort(-lam.real)
    lam, mu = lam[order], mu[order]
    modes = modes[:, order]
    full_modes = np.array([_mode_to_full(modes[:, j], n) for j in range(k)])
    return StabilitySpectrum(eigenvalues=lam, multipliers=mu, eigenmodes=full_modes,
                             n_requested=n_requested, horizon=T)


# ---------------------------------------------------------------- closed forms

def dispersion_a(params: ModelParams, kappa1: float, omega: float) -> float:
    """Background growth symbol a(kappa1, omega) of the u-equation linearization."""
    u_bar = solve_background(params, kappa1).u_bar
    return (-params.Du * omega ** 2 + params.kappa2 - 3.0 * u_bar ** 2
            - params.kappa4 / (1.0 + params.Dw * omega ** 2))


def linearized_trivial_spectrum(params: ModelParams, kappa1: float,
                                omega: float) -> tuple[complex, complex]:
    """Closed-form eigenvalue pair of the uniform state at wavenumber omega."""
    a = dispersion_a(params, kappa1, omega)
    tau = params.tau
    half_tr = 0.5 * (a - 1.0 / tau)
    disc = (a - 1.0 / tau) ** 2 - 4.0 * (params.kappa3 - a) / tau
    root = 0.5 * np.sqrt(complex(disc))
    return (complex(half_tr + root), complex(half_tr - root))


def critical_wavenumber(params: ModelParams) -> float:
    """Wavenumber maximizing the growth symbol a over omega."""
    rad = (np.sqrt(params.kappa4 * params.Du * params.Dw) - params.Du) / (
        params.Du * params.Dw)
    if rad <= 0.0:
        raise NoFiniteWavenumber(
            "growth symbol has no interior maximum: sqrt(kappa4*Du*Dw) <= Du")
    return float(np.sqrt(rad))


def hopf_onset(params: ModelParams, omega: Optional[float] = None,
               bracket: tuple[float, float] = (-0.75, -1e-9)) -> float:
    """kappa1 where the uniform state's eigenvalue pair crosses the imaginary axis."""
    if omega is None:
        omega = critical_wavenumber(params)
    f = lambda k1: dispersion_a(params, k1, omega) - 1.0 / params.tau
    return float(brentq(f, bracket[0], bracket[1], xtol=1e-14))


def pitchfork_onset(params: ModelParams, omega: Optional[float] = None,
                    bracket: tuple[float, float] = (-0.75, -1e-9)) -> float:
    """kappa1 where one uniform-state eigenvalue hits zero (stationary wavetrain)."""
    if omega is None:
        omega = critical_wavenumber(params)
    f = lambda k1: dispersion_a(params, k1, omega) - params.kappa3
    return float(brentq(f, bracket[0], bracket[1], xtol=1e-14))


# ---------------------------------------------------------------- goldstone

@dataclass
class GoldstoneReport:
    goldstone_residual: float   # ||D G|| / ||G||
    propagator_residual: float  # ||D P - G|| / ||G||
    adjoint_pairing: float      # <G*, G> / ||G||^2
    adjoint_residual: float     # ||D* G*|| / ||G*||


def goldstone_check(sol: ConvergedSolution, params: ModelParams) -> GoldstoneReport:
    """Residuals of the translation mode identities at the drift point.

    With G = (u_x, u_x), P = (0, -u_x/kappa3) and D the linearization at the
    stationary pulse, checks D G = 0 and D P = G (exact at tau = 1/kappa3), and
    the adjoint pairing <G*, G> with G* = (u_x, -kappa3 tau u_x).
    """
    n = params.n_modes
    z0 = to_half(sol.state.coeffs)
    base = EtdRk4(params, params.kappa1_base, 1e-3)
    lin = LinearizedEtdRk4(base, z0[0])
    k = base.k_half
    ux = 1j * k * z0[0]
    G = np.vstack([ux, ux])
    P = np.vstack([np.zeros_like(ux), -ux / params.kappa3])
    nG = float(np.linalg.norm(pack_coeffs(G, n)))
    dG = float(np.linalg.norm(pack_coeffs(lin.rhs(G), n)))
    dP = float(np.linalg.norm(pack_coeffs(lin.rhs(P) - G, n)))
    # adjoint of [[Mu, -k3], [1/tau, -1/tau]] swaps the couplings (Mu self-adjoint)
    Gs = np.vstack([ux, -params.kappa3 * params.tau * ux])
    w0, w1 = Gs[0], Gs[1]
    mu_w0 = lin.Ldiag[0] * w0 + lin._mult_hat(w0)
    adj = np.vstack([mu_w0 + w1 / params.tau,
                     -params.kappa3 * w0 - w1 / params.tau])
    nGs = float(np.linalg.norm(pack_coeffs(Gs, n)))
    dGs = float(np.linalg.norm(pack_coeffs(adj, n)))
    pair = float(np.dot(pack_coeffs(Gs, n), pack_coeffs(G, n)))
    return GoldstoneReport(goldstone_residual=dG / nG,
                           propagator_residual=dP / nG,
                           adjoint_pairing=pair / nG ** 2,
                           adjoint_residual=dGs / nGs)


# ---------------------------------------------------------------- seeds

def make_pulse_seed(params: ModelParams, center: Optional[float] = None,
                    amplitude: float = 1.0, width: float = 0.02) -> SpectralState:
    """Background plus a narrow positive hump (v = u), a robust relaxation seed."""
    if center is None:
        center = 0.5 * params.domain_length
    u_bar = solve_background(params, params.kappa1_base).u_bar
    x = grid_x(params)
    L = params.domain_length
    s = (x - center + 0.5 * L) % L - 0.5 * L
    u = u_bar + amplitude / np.cosh(s / width) ** 2
    return state_from_grid(u, u.copy())


def find_stationary_pulse(params: ModelParams, *, relax_time: float = 120.0,
                          relax_dt: float = 2e-3, seed: Optional[SpectralState] = None,
                          eta: float = 1e-10, t_probe: float = 0.1,
                          kappa1=None) -> ConvergedSolution:
    """Relax a hump seed to the localized pulse, then Newton-polish it.

    Relaxation runs at tau = 3.0 (below the drift point, where the pulse is
    attracting); the converged equilibrium is tau-independent so the Newton
    polish runs at the requested parameters.
    """
    if kappa1 is None:
        kappa1 = params.kappa1_base
    relax_params = replace(params, tau=3.0)
    if seed is None:
        seed = make_pulse_seed(relax_params)
    stepper = EtdRk4(relax_params, kappa1, relax_dt)
    zh = to_half(seed.coeffs)
    zh = stepper.run(zh, int(round(relax_time / relax_dt)))
    relaxed = SpectralState(to_full(zh), 0.0)
    target = ShootingTarget(kind=STEADY, t_probe=t_probe, eta=eta)
    return solve(relaxed, target, params, kappa1)


def estimate_drift_speed(stationary: ConvergedSolution, params: ModelParams) -> float:
    """Leading-order speed of the traveling pulse born at the drift point.

    From the pulse-position reduction: U = kappa3 * sqrt(kappa3 (tau - 1/kappa3)
    * C1 / C2) with C1, C2 the squared L2 norms of u_x and u_xx.
    """
    tau_hat = params.tau - 1.0 / params.kappa3
    if tau_hat <= 0.0:
        return 0.0
    z = to_half(stationary.state.coeffs)
    n = params.n_modes
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=params.domain_length / n)
    ux = np.fft.irfft(1j * k * z[0], n=n)
    uxx = np.fft.irfft(-k * k * z[0], n=n)
    c1, c2 = float(np.mean(ux * ux)), float(np.mean(uxx * uxx))
    return params.kappa3 * float(np.sqrt(params.kappa3 * tau_hat * c1 / c2))


def traveling_seed(stationary: ConvergedSolution, params: ModelParams,
                   U0: Optional[float] = None) -> tuple[SpectralState, float]:
    """Comoving ansatz from a stationary pulse: v is slaved through (1 - tau U d/dx).

    For a profile moving at speed U the v component satisfies -tau U v' = u - v,
    i.e. v_hat = u_hat / (1 - i k tau U). The O(U) difference from the stationary
    state biases Newton toward the traveling root rather than back to U = 0.
    Returns the seed state and the speed guess used.
    """
    if U0 is None:
        U0 = estimate_drift_speed(stationary, params)
    z = to_half(stationary.state.coeffs).copy()
    n = params.n_modes
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=params.domain_length / n)
    z[1] = z[0] / (1.0 - 1j * k * params.tau * U0)
    return SpectralState(to_full(z), 0.0), U0


# ---------------------------------------------------------------- drift point

def drift_eigenvalue(sol: ConvergedSolution, params: ModelParams, *,
                     kappa1=None, n_requested: int = 4, horizon: float = 1.0,
                     tol: float = 1e-9, ncv: int = 40) -> float:
    """Largest real part among non-Goldstone leading eigenvalues of a pulse."""
    spec = stability(sol, params, kappa1, n_requested=n_requested, horizon=horizon,
                     tol=tol, ncv=ncv)
    lam = spec.eigenvalues
    goldstone = int(np.argmin(np.abs(lam)))
    rest = np.delete(lam, goldstone)
    return float(np.max(rest.real))


def drift_bifurcation_tau(sol: ConvergedSolution, params: ModelParams, *,
                          kappa1=None, lo: float = 3.0, hi: float = 3.7,
                          rel_tol: float = 1e-3) -> float:
    """Bisect tau where the stationary pulse's drift eigenvalue changes sign.

    The equilibrium profile does not depend on tau, so the converged state is
    reused at every tau; only the linearization changes.
    """
    f = lambda tau: drift_eigenvalue(sol, replace(params, tau=tau), kappa1=kappa1)
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0.0 < f_hi):
        raise ValueError(f"drift eigenvalue does not change sign on [{lo}, {hi}]: "
                         f"{f_lo:.3e}, {f_hi:.3e}")
    while (hi - lo) > rel_tol * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
