"""Reduced two-dimensional pulse-position dynamics and its phase-plane analysis.

The PDE pulse interaction with the bump collapses to an ODE for the pulse
position p and internal mode amplitude alpha:

    dp/dt     = kappa3 * alpha - (eps/C1) * f(p, d)
    dalpha/dt = kappa3^2 * tau_hat * alpha - kappa3 * (C2/C1) * alpha^3
                - (eps/C1) * f(p, d)

with tau_hat = tau - 1/kappa3, C1 = ||u_x||^2, C2 = ||u_xx||^2 (integrals over
the domain) and the forcing f(p, d) = u(d/2 - p) - u(-d/2 - p) built from the
stationary pulse profile at the drift point. Critical points sit on alpha = 0
at zeros of f and are classified through the characteristic polynomial
lambda^2 - b_hat lambda + c_hat with b_hat = kappa3^2 tau_hat - eps_hat/C1 and
c_hat = (kappa3 eps_hat-free form below); eps_hat = eps * f'(zero).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import TailTooShort, TauOutOfRange
from .model import ModelParams, solve_background
from .shooting import ConvergedSolution
from .spectral import to_half

__all__ = [
    "TailAsymptotics", "ReducedSystem", "CriticalPoint", "OdeTrajectory",
    "ManifoldCurve", "build_reduced", "integrate", "pulse_orbit",
    "critical_points", "classify_nonsaddle_sweep", "manifold",
    "transition_scan", "basin_boundary", "reconnection_epsilon",
    "ladder_reconnection_epsilon", "order_exchange_epsilon",
    "pulse_height_at", "gate_height_at",
    "homoclinic_epsilon", "kind_from_hats",
    "hat_coefficients", "nonsaddle_threshold_landmarks",
]

SADDLE = "Saddle"
UNSTABLE_NODE = "UnstableNode"
UNSTABLE_SPIRAL = "UnstableSpiral"
STABLE_SPIRAL = "StableSpiral"
STABLE_NODE = "StableNode"


@dataclass
class TailAsymptotics:
    """Oscillatory tail description: deviation ~ K e^{a|x|} cos(b|x| - theta)."""

    a: float           # decay rate, negative
    b: float           # tail wavenumber
    phi: float         # phase of the forcing asymptote, sin(phi) = A/amplitude
    amplitude: float   # sqrt(A^2 + B^2) of the width-d difference kernel
    K: float = 0.0     # fitted tail prefactor of the profile itself
    theta: float = 0.0  # fitted tail phase of the profile

    def zero_spacing(self) -> float:
        return np.pi / self.b


@dataclass
class CriticalPoint:
    index: int
    p: float
    D: float                    # f'(p) at the zero
    eps_hat: float              # eps * D
    kind: str
    eigenvalues: tuple[complex, complex]
    saddle_quantity: Optional[float] = None  # trace b_hat, saddles only


@dataclass
class OdeTrajectory:
    t: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    terminal_classification: Optional[object] = None
    alpha_exceeded: bool = False
    events: dict = field(default_factory=dict)


@dataclass
class ManifoldCurve:
    which: str                   # 'ls', 'rs', 'lu', 'ru'
    saddle_index: int
    points: np.ndarray           # (N, 2) of (p, alpha), from the saddle outward
    omega_limit: Union[int, str]  # critical-point index, 'T+inf', 'T-inf',
    #                               'limit-cycle', or 'Unresolved'
    arclength: float = 0.0


class ReducedSystem:
    """Immutable bundle of the profile-derived quantities driving the ODE."""

    def __init__(self, xs: np.ndarray, u_profile: np.ndarray, u_bar: float,
                 C1: float, C2: float, kappa3: float, tau: float, d: float,
                 tail: TailAsymptotics, M0: float, x_env: float):
        self.xs = xs                    # ascending, [-L/2, L/2], periodic closure
        self.u_profile = u_profile      # even pulse profile, peak at 0
        self.u_bar = u_bar
        self.C1 = C1
        self.C2 = C2
        self.kappa3 = kappa3
        self.tau = tau
        self.d = d
        self.tail = tail
        self.M0 = M0
        self.half_domain = xs[-1]
        self.x_env = x_env              # support radius of the tail envelope
        # |p| beyond which f is treated as exactly 0
        self.f_cut = min(x_env + 0.5 * d, self.half_domain)
        self._spline = CubicSpline(xs, u_profile, bc_type="periodic")
        # dense forcing table for zero scans
        self.p_table = np.linspace(-self.half_domain, self.half_domain, 16385)
        self.f_table = self.f(self.p_table)

    # -- derived scalars ---------------------------------------------------
    @property
    def tau_hat(self) -> float:
        return self.tau - 1.0 / self.kappa3

    @property
    def alpha_plus(self) -> float:
        th = self.tau_hat
        return float(np.sqrt(self.kappa3 * th * self.C1 / self.C2)) if th > 0 else 0.0

    def free_speed(self) -> float:
        return self.kappa3 * self.alpha_plus

    def pen_bound(self) -> float:
        """Height below which penetration is guaranteed (margin ALPHA+/2)."""
        delta = 0.5 * self.alpha_plus
        return self.kappa3 * self.C1 * (self.alpha_plus - delta) / (2.0 * self.M0)

    def with_tau(self, tau: float) -> "ReducedSystem":
        out = object.__new__(ReducedSystem)
        out.__dict__.update(self.__dict__)
        out.tau = tau
        return out

    def with_d(self, d: float) -> "ReducedSystem":
        """Same profile, different bump width: forcing and tail phase rebuilt."""
        a, b = self.tail.a, self.tail.b
        A = 2.0 * np.cosh(a * d / 2.0) * np.sin(b * d / 2.0)
        B = 2.0 * np.sinh(a * d / 2.0) * np.cos(b * d / 2.0)
        tail = TailAsymptotics(a=a, b=b, phi=float(np.arctan2(A, B)),
                               amplitude=float(np.hypot(A, B)),
                               K=self.tail.K, theta=self.tail.theta)
        return ReducedSystem(xs=self.xs, u_profile=self.u_profile,
                             u_bar=self.u_bar, C1=self.C1, C2=self.C2,
                             kappa3=self.kappa3, tau=self.tau, d=d, tail=tail,
                             M0=self.M0, x_env=self.x_env)

    # -- forcing -----------------------------------------------------------
    def profile(self, x) -> np.ndarray:
        """Pulse profile at wrapped positions."""
        L = 2.0 * self.half_domain
        xw = (np.asarray(x) + self.half_domain) % L - self.half_domain
        return self._spline(xw)

    def f(self, p):
        """Forcing u(d/2 - p) - u(-d/2 - p); zero beyond the tail cutoff."""
        p = np.asarray(p, dtype=float)
        out = self.profile(0.5 * self.d - p) - self.profile(-0.5 * self.d - p)
        return np.where(np.abs(p) > self.f_cut, 0.0, out)

    def f_prime(self, p):
        p = np.asarray(p, dtype=float)
        L = 2.0 * self.half_domain
        wrap = lambda x: (x + self.half_domain) % L - self.half_domain
        der = self._spline.derivative()
        out = -der(wrap(0.5 * self.d - p)) + der(wrap(-0.5 * self.d - p))
        return np.where(np.abs(p) > self.f_cut, 0.0, out)

    # -- vector field --------------------------------------------------------
    def rhs(self, epsilon: float):
        k3, C1, C2 = self.kappa3, self.C1, self.C2
        th = self.tau_hat
        ffun = self.f

        def f_ode(_t, y):
            fp = ffun(y[0])
            force = (epsilon / C1) * fp
            return (k3 * y[1] - force,
                    k3 * k3 * th * y[1] - k3 * (C2 / C1) * y[1] ** 3 - force)
        return f_ode

    def jacobian_at(self, epsilon: float, p: float, alpha: float = 0.0) -> np.ndarray:
        k3, C1, C2 = self.kappa3, self.C1, self.C2
        g = (epsilon / C1) * float(self.f_prime(p))
        return np.array([
            [-g, k3],
            [-g, k3 * k3 * self.tau_hat - 3.0 * k3 * (C2 / C1) * alpha ** 2],
        ])


# --------------------------------------------------------------------- build

def _center_even_profile(z_half: np.ndarray, n: int, L: float) -> np.ndarray:
    """Half-spectrum of u re-centered so its peak sits at x = 0, evenized.

    The optimal shift minimizes the energy in the imaginary (odd) part; taking
    the real part afterwards projects exactly onto even functions.
    """
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    u = np.fft.irfft(z_half, n=n)
    i0 = int(np.argmax(u))
    um, u0, up = u[i0 - 1], u[i0], u[(i0 + 1) % n]
    frac = 0.5 * (um - up) / (um - 2.0 * u0 + up)
    dx = L / n
    guess = (i0 + frac) * dx

    def odd_energy(s):
        c = z_half * np.exp(-1j * k * (-s))  # shift profile left by s
        return float(np.sum(c.imag[1:] ** 2))

    res = minimize_scalar(odd_energy, bounds=(guess - dx, guess + dx),
                          method="bounded", options={"xatol": 1e-14})
    s = float(res.x)
    shifted = z_half * np.exp(-1j * k * (-s))
    return shifted.real.astype(complex)


def _fit_tail(xs: np.ndarray, dev: np.ndarray, d: float) -> TailAsymptotics:
    """Fit decay rate and wavenumber of the oscillatory tail on x > 0.

    Uses zero-crossing spacing for b and a log-linear regression of extremum
    magnitudes for a; raises TailTooShort when fewer than 6 oscillations stand
    above 1e-12.
    """
    half = xs[-1]
    mask = (xs > 0.06) & (xs < half - 0.02)
    x = xs[mask]
    y = dev[mask]
    sgn = np.sign(y)
    flips = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    zeros = x[flips] - y[flips] * (x[flips + 1] - x[flips]) / (y[flips + 1] - y[flips])
    # extrema between consecutive zeros
    ext_x, ext_y = [], []
    for i in range(len(flips) - 1):
        seg = slice(flips[i] + 1, flips[i + 1] + 1)
        if seg.stop - seg.start < 1:
            continue
        j = seg.start + int(np.argmax(np.abs(y[seg])))
        ext_x.append(x[j])
        ext_y.append(abs(y[j]))
    ext_x = np.asarray(ext_x)
    ext_y = np.asarray(ext_y)
    keep = ext_y > 1e-12
    if int(np.sum(keep)) < 6:
        raise TailTooShort(f"only {int(np.sum(keep))} tail oscillations above 1e-12; "
                           "need a longer domain")
    spacing = np.diff(zeros)
    spacing = spacing[(spacing > 0.2 * np.median(spacing)) &
                      (spacing < 5.0 * np.median(spacing))]
    b = np.pi / float(np.mean(spacing))
    coef = np.polyfit(ext_x[keep], np.log(ext_y[keep]), 1)
    a = float(coef[0])
    # phase and prefactor of dev ~ K e^{a x} cos(b x - theta): fit on the kept
    # window by linear least squares in (cos, sin) after peeling the envelope
    w = ext_y > 1e-12
    xw = x[(x >= ext_x[w][0]) & (x <= ext_x[w][-1])]
    yw = y[(x >= ext_x[w][0]) & (x <= ext_x[w][-1])]
    basis = np.column_stack([np.exp(a * xw) * np.cos(b * xw),
                             np.exp(a * xw) * np.sin(b * xw)])
    cc, ss = np.linalg.lstsq(basis, yw, rcond=None)[0]
    K = float(np.hypot(cc, ss))
    theta = float(np.arctan2(ss, cc))
    A = 2.0 * np.cosh(a * d / 2.0) * np.sin(b * d / 2.0)
    B = 2.0 * np.sinh(a * d / 2.0) * np.cos(b * d / 2.0)
    amp = float(np.hypot(A, B))
    phi = float(np.arctan2(A, B))
    return TailAsymptotics(a=a, b=b, phi=phi, amplitude=amp, K=K, theta=theta)


def build_reduced(pulse: ConvergedSolution, params: ModelParams, d: float,
                  tau: Optional[float] = None) -> ReducedSystem:
    """Assemble the reduced system from a converged stationary pulse.

    The profile is re-centered and evenized spectrally (so f is odd to machine
    precision), C1/C2 come from spectral quadrature, and the tail fit feeds the
    asymptotic zero structure.
    """
    n = params.n_modes
    L = params.domain_length
    z = to_half(pulse.state.coeffs)
    zc = _center_even_profile(z[0], n, L)
    u = np.fft.irfft(zc, n=n)
    u_bar = solve_background(params, params.kappa1_base).u_bar
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    ux = np.fft.irfft(1j * k * zc, n=n)
    uxx = np.fft.irfft(-(k * k) * zc, n=n)
    C1 = L * float(np.mean(ux * ux))
    C2 = L * float(np.mean(uxx * uxx))
    # reorder to ascending [-L/2, L/2] with periodic closure
    xs = np.concatenate([np.arange(-(n // 2), n // 2) * (L / n), [L / 2]])
    vals = np.roll(u, n // 2)
    vals = np.concatenate([vals, [vals[0]]])
    dev = vals - u_bar
    tail = _fit_tail(xs, dev, d)
    M0 = float(np.max(np.abs(dev)))
    # forcing support: where the deviation envelope falls below 1e-10 of max
    env = np.abs(dev[xs >= 0])
    xr = xs[xs >= 0]
    strong = env > 1e-10 * env.max()
    x_env = float(xr[strong][-1]) if np.any(strong) else L / 2
    return ReducedSystem(xs=xs, u_profile=vals, u_bar=u_bar, C1=C1, C2=C2,
                         kappa3=params.kappa3, tau=(params.tau if tau is None else tau),
                         d=d, tail=tail, M0=M0, x_env=x_env)


# --------------------------------------------------------------- integration

def integrate(sys: ReducedSystem, epsilon: float, initial: tuple[float, float],
              t_end: float, *, rtol: float = 1e-10, atol: float = 1e-13,
              t_eval: Optional[np.ndarray] = None,
              events: Optional[list] = None,
              max_samples: int = 200000) -> OdeTrajectory:
    """Adaptive RK45 integration of the reduced vector field."""
    if abs(initial[1]) > 10.0 * max(sys.alpha_plus, 1e-12):
        raise ValueError(f"initial alpha {initial[1]} is out of the modeled range")
    sol = solve_ivp(sys.rhs(epsilon), (0.0, t_end), np.asarray(initial, float),
                    method="RK45", rtol=rtol, atol=atol, t_eval=t_eval,
                    events=events, dense_output=False)
    t, y = sol.t, sol.y
    if len(t) > max_samples:
        stride = int(np.ceil(len(t) / max_samples))
        t, y = t[::stride], y[:, ::stride]
    traj = OdeTrajectory(t=t, p=y[0], alpha=y[1])
    traj.alpha_exceeded = bool(np.max(np.abs(y[1])) > 2.0 * sys.alpha_plus + 1e-15)
    if sol.t_events is not None:
        traj.events = {i: te for i, te in enumerate(sol.t_events) if len(te)}
    return traj


def _far_start(sys: ReducedSystem) -> float:
    fmax = float(np.max(np.abs(sys.f_table)))
    below = np.abs(sys.f_table) < 1e-10 * fmax
    # walk from the left end to the first position where f becomes significant
    idx = np.argmax(~below)  # first False
    return float(sys.p_table[max(idx - 1, 0)])


def pulse_orbit(sys: ReducedSystem, epsilon: float, t_end: Optional[float] = None,
                **kw) -> OdeTrajectory:
    """The distinguished orbit arriving from far left at the free pulse speed."""
    p0 = _far_start(sys)
    speed = sys.free_speed()
    if t_end is None:
        t_end = 40.0 * (2.0 * abs(p0)) / max(speed, 1e-12)
    right = -p0

    def escape_right(_t, y):
        return y[0] - right
    escape_right.terminal = True
    escape_right.direction = 1.0

    def escape_left(_t, y):
        return y[0] - 1.5 * p0
    escape_left.terminal = True
    escape_left.direction = -1.0

    return integrate(sys, epsilon, (p0, sys.alpha_plus), t_end,
                     events=[escape_right, escape_left], **kw)


# ------------------------------------------------------------ critical points

def kind_from_hats(b_hat: float, c_hat: float, delta: float) -> str:
    if c_hat < 0:
        return SADDLE
    if delta >= 0:
        return UNSTABLE_NODE if b_hat > 0 else STABLE_NODE
    return UNSTABLE_SPIRAL if b_hat > 0 else STABLE_SPIRAL


def _classify_zero(sys: ReducedSystem, epsilon: float, p: float,
                   index: int) -> CriticalPoint:
    k3, C1 = sys.kappa3, sys.C1
    th = sys.tau_hat
    D = float(sys.f_prime(p))
    eps_hat = epsilon * D
    b_hat = k3 * k3 * th - eps_hat / C1
    c_hat = (k3 * eps_hat / C1) * (1.0 - k3 * th)
    delta = b_hat * b_hat - 4.0 * c_hat
    root = np.sqrt(complex(delta))
    lam = (0.5 * (b_hat + root), 0.5 * (b_hat - root))
    kind = kind_from_hats(b_hat, c_hat, delta)
    return CriticalPoint(index=index, p=p, D=D, eps_hat=eps_hat, kind=kind,
                         eigenvalues=(complex(lam[0]), complex(lam[1])),
                         saddle_quantity=(b_hat if kind == SADDLE else None))


def forcing_zeros(sys: ReducedSystem, p_range: tuple[float, float]) -> np.ndarray:
    """All zeros of f in p_range from a sign-change scan plus root polishing."""
    lo, hi = p_range
    mask = (sys.p_table >= lo) & (sys.p_table <= hi)
    pg = sys.p_table[mask]
    fg = sys.f_table[mask]
    zeros = []
    sgn = np.sign(fg)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        zeros.append(float(brentq(lambda p: float(sys.f(p)), pg[i], pg[i + 1],
                                  xtol=1e-14)))
    # exact zeros landing on grid nodes (p = 0 by oddness)
    for i in np.nonzero(fg == 0.0)[0]:
        p = float(pg[i])
        if abs(p) <= sys.f_cut and (not zeros or min(abs(p - z) for z in zeros) > 1e-10):
            if 0 < i < len(pg) - 1 and sgn[i - 1] * sgn[i + 1] < 0:
                zeros.append(p)
    return np.array(sorted(zeros))


def critical_points(sys: ReducedSystem, epsilon: float,
                    p_range: Optional[tuple[float, float]] = None
                    ) -> list[CriticalPoint]:
    """Equilibria on alpha = 0, indexed with P0 nearest the bump center."""
    tau_c = 1.0 / sys.kappa3
    if not (tau_c < sys.tau < 2.0 * tau_c):
        raise TauOutOfRange(f"tau={sys.tau} outside ({tau_c}, {2 * tau_c}); "
                            "off-axis equilibria are not excluded there")
    if p_range is None:
        p_range = (-sys.f_cut, sys.f_cut)
    zeros = forcing_zeros(sys, p_range)
    if len(zeros) == 0:
        return []
    i0 = int(np.argmin(np.abs(zeros)))
    return [_classify_zero(sys, epsilon, float(p), i - i0)
            for i, p in enumerate(zeros)]


def classify_nonsaddle_sweep(sys: ReducedSystem, point_index: int,
                             epsilon_range: tuple[float, float], n_grid: int = 200
                             ) -> tuple[list[str], dict]:
    """Kind sequence of one zero as epsilon sweeps, with bisected thresholds."""
    pts = critical_points(sys, epsilon_range[0])
    target = [c for c in pts if c.index == point_index]
    if not target:
        raise ValueError(f"no critical point with index {point_index}")
    D = target[0].D
    k3, C1, th = sys.kappa3, sys.C1, sys.tau_hat

    def hats(eps):
        eh = eps * D
        b_hat = k3 * k3 * th - eh / C1
        c_hat = (k3 * eh / C1) * (1.0 - k3 * th)
        return b_hat, c_hat, b_hat * b_hat - 4.0 * c_hat

    grid = np.linspace(*epsilon_range, n_grid)
    kinds = [kind_from_hats(*hats(e)) for e in grid]
    thresholds = {}
    for name, fun in (("delta", lambda e: hats(e)[2]), ("b_hat", lambda e: hats(e)[0])):
        vals = np.array([fun(e) for e in grid])
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            root = brentq(fun, grid[i], grid[i + 1], xtol=1e-16, rtol=1e-15)
            thresholds.setdefault(name, []).append(float(root))
    return kinds, thresholds


def hat_coefficients(eps_hat: float, tau_hat: float, C1: float, kappa3: float
                     ) -> tuple[float, float, float]:
    """Trace, determinant and discriminant of a non-saddle's linearization."""
    b_hat = kappa3 * kappa3 * tau_hat - eps_hat / C1
    c_hat = (kappa3 * eps_hat / C1) * (1.0 - kappa3 * tau_hat)
    return b_hat, c_hat, b_hat * b_hat - 4.0 * c_hat


def nonsaddle_threshold_landmarks(C1: float, kappa3: float) -> dict:
    """Root-found landmarks of the node/spiral and stability boundaries.

    Returns the nontrivial zero of the discriminant on the tau_hat = 0 axis
    and the point where the discriminant's zero level meets the zero-trace
    curve tangentially, both located numerically in the (eps_hat, tau_hat)
    plane. Closed forms exist (4*C1*kappa3 and (C1*kappa3, 1/kappa3)); the
    numeric route keeps an independent check available.
    """
    scale = C1 * kappa3
    root0 = brentq(lambda eh: hat_coefficients(eh, 0.0, C1, kappa3)[2],
                   2.0 * scale, 6.0 * scale, xtol=1e-18, rtol=8.9e-16)

    # walk the zero-trace curve eps_hat = C1 kappa3^2 tau_hat; on it the
    # discriminant is -4 c_hat, vanishing where c_hat changes sign
    def disc_on_trace(tau_hat):
        return hat_coefficients(C1 * kappa3 ** 2 * tau_hat, tau_hat,
                                C1, kappa3)[2]

    tau_t = brentq(disc_on_trace, 0.5 / kappa3, 2.0 / kappa3,
                   xtol=1e-18, rtol=8.9e-16)
    return {"delta_zero_at_tau0": float(root0),
            "tangency": (float(C1 * kappa3 ** 2 * tau_t), float(tau_t))}


# ------------------------------------------------------------------ manifolds

def _saddle_eigvectors(sys: ReducedSystem, epsilon: float, point: CriticalPoint):
    J = sys.jacobian_at(epsilon, point.p)
    w, V = np.linalg.eig(J)
    order = np.argsort(w.real)
    w, V = w[order].real, V[:, order].real
    return (w[0], V[:, 0]), (w[1], V[:, 1])  # (stable), (unstable)


def manifold(sys: ReducedSystem, epsilon: float, point: CriticalPoint, which: str,
             arclength_budget: float = 1e3, t_cap: float = 5e5,
             offset_scale: float = 1e-8) -> ManifoldCurve:
    """Shoot one branch of a saddle's stable/unstable manifold.

    `which` is 'l'/'r' (branch leaves left/right in p) + 's'/'u'. Stable
    branches are integrated in reverse time. The omega limit is a critical
    point index, 'T+inf'/'T-inf' for escape onto the traveling states,
    'limit-cycle', or 'Unresolved' when the arclength budget runs out.
    """
    which = which.replace(",", "").replace(" ", "")
    if point.kind != SADDLE:
        raise ValueError("manifolds are shot from saddles only")
    (ls, vs), (lu, vu) = _saddle_eigvectors(sys, epsilon, point)
    stable = which[1] == "s"
    lam, vec = (ls, vs) if stable else (lu, vu)
    if (vec[0] > 0) != (which[0] == "r"):
        vec = -vec
    f_scale = max(float(np.max(np.abs(sys.f_table))), 1e-300)
    delta0 = offset_scale * f_scale
    y0 = np.array([point.p, 0.0]) + delta0 * vec / np.linalg.norm(vec)
    sign = -1.0 if stable else 1.0

    rhs = sys.rhs(epsilon)
    fun = (lambda t, y: [-v for v in rhs(t, y)]) if stable else rhs

    pts_all = [y0.copy()]
    arclength = 0.0
    zeros = forcing_zeros(sys, (-sys.f_cut, sys.f_cut))
    i0 = int(np.argmin(np.abs(zeros)))
    others = [(_classify_zero(sys, epsilon, float(p), i - i0))
              for i, p in enumerate(zeros)]
    alpha_esc = 2.5 * max(sys.alpha_plus, 1e-6)
    p_esc = sys.f_cut * 1.2
    omega: Union[int, str] = "Unresolved"
    y = y0
    t_done = 0.0
    # winding bookkeeping for spiral destinations
    wind_target: Optional[CriticalPoint] = None
    wind_angle = 0.0
    wind_last: Optional[float] = None
    wind_r_prev = None
    while arclength < arclength_budget and t_done < t_cap:
        chunk = min(5e3, t_cap - t_done)
        sol = solve_ivp(fun, (0.0, chunk), y, method="RK45", rtol=1e-10,
                        atol=1e-13, max_step=chunk)
        seg = sol.y.T
        t_done += sol.t[-1]
        dseg = np.diff(seg, axis=0)
        arclength += float(np.sum(np.hypot(dseg[:, 0], dseg[:, 1])))
        pts_all.append(seg[1:])
        y = seg[-1]
        # escape onto traveling states
        if abs(y[0]) > p_esc and abs(y[1] - sign * 0.0) >= 0.0:
            if (y[0] > 0 and y[1] > 0.3 * sys.alpha_plus) or \
               (y[0] < 0 and y[1] < -0.3 * sys.alpha_plus) or stable:
                omega = "T+inf" if y[0] > 0 else "T-inf"
                break
        if abs(y[1]) > alpha_esc:
            omega = "T+inf" if y[1] > 0 else "T-inf"
            break
        # convergence to a critical point
        done = False
        for c in others:
            r = np.hypot(y[0] - c.p, y[1])
            if r < 1e-9 and c.index != point.index:
                omega = c.index
                done = True
                break
            if r < 1e-11 and c.index == point.index:
                omega = c.index
                done = True
                break
        if done:
            break
        # spiral winding about the nearest non-saddle point
        cand = min(others, key=lambda c: np.hypot(y[0] - c.p, y[1]))
        if cand.kind != SADDLE:
            ang = float(np.arctan2(y[1], y[0] - cand.p))
            r_now = float(np.hypot(y[0] - cand.p, y[1]))
            if wind_target is not None and cand.index == wind_target.index:
                dang = ang - wind_last
                while dang > np.pi:
                    dang -= 2 * np.pi
                while dang < -np.pi:
                    dang += 2 * np.pi
                wind_angle += dang
                if abs(wind_angle) > 6.0 * np.pi and r_now < wind_r_prev:
                    omega = cand.index
                    break
            else:
                wind_target, wind_angle = cand, 0.0
                wind_r_prev = r_now
            wind_last = ang
    curve = np.vstack([np.atleast_2d(p) for p in pts_all])
    return ManifoldCurve(which=which, saddle_index=point.index, points=curve,
                         omega_limit=omega, arclength=arclength)


# -------------------------------------------------------- transitions & scans

def _bisect_change(fn: Callable[[float], object], lo: float, hi: float,
                   tol: float) -> float:
    """Bisect the parameter where a discrete-valued function changes value."""
    if hi < lo:
        lo, hi = hi, lo
    v_lo = fn(lo)
    v_hi = fn(hi)
    if v_lo == v_hi:
        raise ValueError(f"no change in ({lo}, {hi}): both {v_lo}")
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) == v_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def transition_scan(sys: ReducedSystem, epsilon_grid: Sequence[float], *,
                    refine_tol: float = 1e-8, t_end: Optional[float] = None
                    ) -> tuple[list[tuple[float, str]], list[dict]]:
    """Classify the pulse orbit on a grid and refine every outcome change."""
    from .outcomes import classify_reduced

    def outcome(eps: float) -> str:
        return classify_reduced(sys, pulse_orbit(sys, eps, t_end=t_end)).kind

    rows = [(float(e), outcome(float(e))) for e in epsilon_grid]
    events = []
    for (e0, k0), (e1, k1) in zip(rows[:-1], rows[1:]):
        if k0 == k1 or "Unresolved" in (k0, k1):
            continue
        ec = _bisect_change(outcome, e0, e1, refine_tol)
        events.append({"kind": f"{k0}-{k1}", "epsilon": float(ec),
                       "bracket": (e0, e1)})
    return rows, events


def reconnection_epsilon(sys: ReducedSystem, saddle_index: int, which: str,
                         lo: float, hi: float, tol: float = 1e-8) -> float:
    """Epsilon where the named manifold's reverse/forward destination changes."""
    def dest(eps: float):
        pts = {c.index: c for c in critical_points(sys, eps)}
        return manifold(sys, eps, pts[saddle_index], which).omega_limit

    return _bisect_change(dest, lo, hi, tol)


def _dest_rank(omega: Union[int, str]) -> int:
    """Total order on reverse destinations: point index, or far past everything."""
    if isinstance(omega, (int, np.integer)):
        return int(omega)
    return -10 ** 6  # escaped (or crawling) beyond the whole ladder


def ladder_reconnection_epsilon(sys: ReducedSystem, saddle_index: int, which: str,
                                to_index: int, lo: float, hi: float,
                                tol: float = 1e-8) -> float:
    """Epsilon where the reverse destination of a saddle manifold passes a rung.

    The destination of the named branch steps through the non-saddle points one
    by one as epsilon grows; at each hand-off the branch momentarily coincides
    with a manifold of the saddle it passes. Returns the epsilon where the
    destination first moves beyond `to_index`.
    """
    def before(eps: float) -> bool:
        pts = {c.index: c for c in critical_points(sys, eps)}
        om = manifold(sys, eps, pts[saddle_index], which).omega_limit
        return _dest_rank(om) > to_index

    return _bisect_change(before, lo, hi, tol)


def _first_positive_crossing(pp: np.ndarray, aa: np.ndarray, p_ref: float
                             ) -> Optional[float]:
    """alpha > 0 value at the first crossing of p = p_ref, linearly interpolated."""
    s = pp - p_ref
    for i in np.nonzero(s[:-1] * s[1:] < 0.0)[0]:
        w = -s[i] / (s[i + 1] - s[i])
        a = float(aa[i] + w * (aa[i + 1] - aa[i]))
        if a > 0.0:
            return a
    return None


def pulse_height_at(sys: ReducedSystem, epsilon: float, p_ref: float,
                    overshoot: float = 0.02) -> float:
    """Upper-plane height of the incoming pulse orbit over p = p_ref."""
    p0 = _far_start(sys)
    if p_ref <= p0:
        raise ValueError(f"reference position {p_ref} is outside the approach")

    def past(_t, y):
        return y[0] - (p_ref + overshoot)
    past.terminal = True
    past.direction = 1.0
    sol = solve_ivp(sys.rhs(epsilon), (0.0, 5e5), [p0, sys.alpha_plus],
                    method="RK45", rtol=1e-10, atol=1e-13, events=[past])
    a = _first_positive_crossing(sol.y[0], sol.y[1], p_ref)
    if a is None:
        raise ValueError(f"pulse orbit never reaches p = {p_ref} at "
                         f"epsilon = {epsilon}")
    return a


def gate_height_at(sys: ReducedSystem, epsilon: float, saddle_index: int,
                   which: str, p_ref: float) -> float:
    """Upper-plane height of a saddle-manifold branch over p = p_ref."""
    pts = {c.index: c for c in critical_points(sys, epsilon)}
    cur = manifold(sys, epsilon, pts[saddle_index], which)
    a = _first_positive_crossing(cur.points[:, 0], cur.points[:, 1], p_ref)
    if a is None:
        raise ValueError(f"manifold {which} of P{saddle_index} has no upper "
                         f"crossing of p = {p_ref} at epsilon = {epsilon}")
    return a


def order_exchange_epsilon(sys: ReducedSystem, saddle_index: int,
                           lo: float, hi: float, *, which: str = "rs",
                           ref_index: Optional[int] = None,
                           tol: float = 1e-7) -> float:
    """Epsilon where the pulse orbit and a saddle's gate manifold swap heights.

    Heights are alpha-coordinates over the non-saddle point next to the gate
    saddle (ref_index defaults to saddle_index + 1). The capture hand-off
    (rebound to pinned oscillation) is this exchange for the even saddle the
    incoming orbit has just passed.
    """
    if ref_index is None:
        ref_index = saddle_index + 1

    def pulse_above(eps: float) -> bool:
        pts = {c.index: c for c in critical_points(sys, eps)}
        p_ref = pts[ref_index].p
        return pulse_height_at(sys, eps, p_ref) > gate_height_at(
            sys, eps, saddle_index, which, p_ref)

    return _bisect_change(pulse_above, lo, hi, tol)


def homoclinic_epsilon(sys: ReducedSystem, saddle_index: int, lo: float, hi: float,
                       tol: float = 1e-9, side: str = "r") -> float:
    """Epsilon of the homoclinic loop at a saddle: its unstable branch returns.

    Uses the signed miss at the saddle section: follow W^{side,u}; the first
    crossing of p = p_saddle (moving back) happens above or below alpha = 0
    depending on which side of the loop epsilon sits.
    """
    def miss(eps: float) -> bool:
        pts = {c.index: c for c in critical_points(sys, eps)}
        sad = pts[saddle_index]
        cur = manifold(sys, eps, sad, side + "u")
        pp, aa = cur.points[:, 0], cur.points[:, 1]
        direction = 1.0 if side == "r" else -1.0
        started = (pp - sad.p) * direction > 1e-7
        if not np.any(started):
            return False
        first = int(np.argmax(started))
        back = np.nonzero(((pp[first:] - sad.p) * direction < 0.0))[0]
        if len(back) == 0:
            return False  # never returns across the saddle section
        return bool(aa[first + back[0]] > 0.0)

    return _bisect_change(miss, lo, hi, tol)


def basin_boundary(sys: ReducedSystem, epsilon: float,
                   region: tuple[tuple[float, float], tuple[float, float]],
                   resolution: tuple[int, int] = (41, 41),
                   saddle_index: Optional[int] = None,
                   t_end: Optional[float] = None) -> dict:
    """Stable-manifold boundary plus an outcome-labeled grid over the region."""
    from .outcomes import classify_reduced

    pts = critical_points(sys, epsilon)
    saddles = [c for c in pts if c.kind == SADDLE]
    if not saddles:
        raise ValueError("no saddle exists at this epsilon")
    if saddle_index is None:
        sad = min(saddles, key=lambda c: abs(c.p))
    else:
        sad = {c.index: c for c in pts}[saddle_index]
    left = manifold(sys, epsilon, sad, "ls")
    right = manifold(sys, epsilon, sad, "rs")

    (p_lo, p_hi), (a_lo, a_hi) = region
    n_p, n_a = resolution
    p_grid = np.linspace(p_lo, p_hi, n_p)
    a_grid = np.linspace(a_lo, a_hi, n_a)
    labels = np.empty((n_a, n_p), dtype=object)
    horizon = t_end if t_end is not None else 4.0 * sys.f_cut / max(sys.free_speed(), 1e-12)
    for i, a0 in enumerate(a_grid):
        for j, p0 in enumerate(p_grid):
            tr = integrate(sys, epsilon, (float(p0), float(a0)), horizon,
                           rtol=1e-8, atol=1e-11)
            labels[i, j] = classify_reduced(sys, tr).kind
    return {
        "saddle": sad,
        "boundary": {"ls": left, "rs": right},
        "reverse_destination": {"ls": left.omega_limit, "rs": right.omega_limit},
        "p_grid": p_grid,
        "alpha_grid": a_grid,
        "labels": labels,
    }
