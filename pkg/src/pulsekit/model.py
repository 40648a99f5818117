"""Model definition: parameters, background state, bump heterogeneity, nonlocal RHS.

The three-component reaction-diffusion model has kinetics

    u_t   = Du u_xx + kappa2 u - u^3 - kappa3 v - kappa4 w + kappa1(x)
    tau v_t = Dv v_xx + u - v
    theta w_t = Dw w_xx + u - w

In the regime theta = 0, Dv = 0 the w equation is algebraic, w = (1 - Dw Lap)^-1 u,
and the model reduces to a two-component system with a nonlocal u term. The inverse
Helmholtz operator is diagonal in Fourier space (mode k is multiplied by
1 / (1 + Dw k^2)), which is how every routine here applies it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigInvalid, SignConditionViolated

__all__ = [
    "ModelParams",
    "HeterogeneityBump",
    "BackgroundState",
    "wavenumbers",
    "grid_x",
    "helmholtz_multiplier",
    "linear_u_symbol",
    "solve_background",
    "bump_profile",
    "kappa1_field",
    "w_from_u",
    "rhs_nonlocal",
    "load_config",
    "params_to_dict",
]


@lru_cache(maxsize=128)
def wavenumbers(n_modes: int, domain_length: float) -> np.ndarray:
    """Angular wavenumbers in numpy FFT ordering for a periodic domain."""
    k = 2.0 * np.pi * np.fft.fftfreq(n_modes, d=domain_length / n_modes)
    k.flags.writeable = False
    return k


@dataclass(frozen=True)
class ModelParams:
    """All kinetic, diffusion, and time constants plus discretization choices.

    ``allow_nonreduced=True`` lifts the Dv = theta = 0 restriction; everything in
    this package except the plain simulator assumes the reduced two-component form,
    so the override exists for experimentation only.
    """

    kappa1_base: float
    kappa2: float = 1.17
    kappa3: float = 0.3
    kappa4: float = 1.0
    tau: float = 3.35
    theta: float = 0.0
    Du: float = 1.1e-4
    Dv: float = 0.0
    Dw: float = 9.8e-4
    domain_length: float = 1.0
    n_modes: int = 256
    allow_nonreduced: bool = False

    def __post_init__(self) -> None:
        for name in ("kappa1_base", "kappa2", "kappa3", "kappa4", "tau", "theta",
                     "Du", "Dv", "Dw", "domain_length"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigInvalid(name, f"must be a finite number, got {value!r}")
        if self.kappa2 - self.kappa3 - self.kappa4 >= 0:
            raise SignConditionViolated(
                f"kappa2 - kappa3 - kappa4 = {self.kappa2 - self.kappa3 - self.kappa4:.6g} "
                "must be negative for a unique background state")
        if self.Du <= 0:
            raise ConfigInvalid("Du", "must be positive")
        if self.Dw <= 0:
            raise ConfigInvalid("Dw", "must be positive")
        if self.tau <= 0:
            raise ConfigInvalid("tau", "must be positive")
        if self.domain_length <= 0:
            raise ConfigInvalid("domain_length", "must be positive")
        if (self.Dv != 0.0 or self.theta != 0.0) and not self.allow_nonreduced:
            raise ConfigInvalid(
                "Dv/theta",
                "nonzero Dv or theta breaks the w-elimination; set allow_nonreduced=True "
                "to accept them anyway")
        if not isinstance(self.n_modes, int) or self.n_modes < 16 or self.n_modes % 2:
            raise ConfigInvalid("n_modes", f"must be an even integer >= 16, got {self.n_modes!r}")

    @property
    def dx(self) -> float:
        return self.domain_length / self.n_modes

    def k(self) -> np.ndarray:
        return wavenumbers(self.n_modes, self.domain_length)


@dataclass(frozen=True)
class HeterogeneityBump:
    """Smooth plateau of height epsilon and width d added to the baseline kappa1.

    The profile is a pair of logistic fronts of steepness gamma; ``center=None``
    means the domain midpoint, resolved when a domain length is known.
    """

    epsilon: float
    d: float
    gamma: float = 100.0
    center: Union[float, None] = None

    def __post_init__(self) -> None:
        if self.d <= 0:
            raise ConfigInvalid("bump.d", "must be positive")
        if self.gamma <= 0:
            raise ConfigInvalid("bump.gamma", "must be positive")
        if not math.isfinite(self.epsilon):
            raise ConfigInvalid("bump.epsilon", "must be finite")

    def resolved_center(self, domain_length: float) -> float:
        return 0.5 * domain_length if self.center is None else self.center


@dataclass(frozen=True)
class BackgroundState:
    """The spatially uniform state u = v = w solving the background cubic."""

    u_bar: float
    residual: float = 0.0


def grid_x(params: ModelParams) -> np.ndarray:
    """Collocation points x_j = j L / n on [0, L)."""
    return params.domain_length * np.arange(params.n_modes) / params.n_modes


@lru_cache(maxsize=128)
def _cached_symbols(n_modes: int, domain_length: float, Du: float, Dw: float,
                    kappa2: float, kappa4: float) -> tuple[np.ndarray, np.ndarray]:
    k = wavenumbers(n_modes, domain_length)
    helm = 1.0 / (1.0 + Dw * k * k)
    sym = -Du * k * k + kappa2 - kappa4 * helm
    helm.flags.writeable = False
    sym.flags.writeable = False
    return helm, sym


def helmholtz_multiplier(params: ModelParams) -> np.ndarray:
    """Fourier multiplier of (1 - Dw Lap)^-1."""
    return _cached_symbols(params.n_modes, params.domain_length, params.Du, params.Dw,
                           params.kappa2, params.kappa4)[0]


def linear_u_symbol(params: ModelParams) -> np.ndarray:
    """Fourier symbol of the full linear u operator Du Lap + kappa2 - kappa4 (1 - Dw Lap)^-1."""
    return _cached_symbols(params.n_modes, params.domain_length, params.Du, params.Dw,
                           params.kappa2, params.kappa4)[1]


def solve_background(params: ModelParams, kappa1: float) -> BackgroundState:
    """Unique real root of -u^3 + (kappa2 - kappa3 - kappa4) u + kappa1 = 0.

    Newton from 0 with a guaranteed bisection fallback on the bracket
    +-(1 + |kappa1| + |kappa2|); the cubic is strictly decreasing under the sign
    condition, so the root is unique.
    """
    c = params.kappa2 - params.kappa3 - params.kappa4
    if c >= 0:
        raise SignConditionViolated(
            f"kappa2 - kappa3 - kappa4 = {c:.6g} must be negative")

    def g(u: float) -> float:
        return -u ** 3 + c * u + kappa1

    u = 0.0
    for _ in range(64):
        gu = g(u)
        if abs(gu) < 1e-14:
            break
        du = gu / (3 * u * u - c)
        u = u + du
        if abs(du) < 1e-16 * (1 + abs(u)):
            break
    if abs(g(u)) >= 1e-12:
        from scipy.optimize import brentq

        bound = 1.0 + abs(kappa1) + abs(params.kappa2)
        u = brentq(g, -bound, bound, xtol=1e-15, rtol=8.9e-16)
    return BackgroundState(u_bar=float(u), residual=abs(g(u)))


def _logistic(y: np.ndarray) -> np.ndarray:
    # Overflow-safe logistic; exact 0/1 saturation is fine here.
    out = np.empty_like(y, dtype=float)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    e = np.exp(y[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def bump_profile(bump: HeterogeneityBump, x, domain_length: float):
    """Bump value at position(s) x, periodically wrapped on a circle of given length.

    The open-line profile is sigma(g(x+d/2)) + sigma(-g(x-d/2)) - 1 with sigma the
    logistic function, which decays like exp(-gamma |x|); its nearest periodic
    images are summed so the result is smooth on the circle.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xt = np.atleast_1d(x) - bump.resolved_center(domain_length)
    L = domain_length
    xt = (xt + 0.5 * L) % L - 0.5 * L
    g, d = bump.gamma, bump.d
    total = np.zeros_like(xt)
    for m in (-1, 0, 1):
        s = xt + m * L
        total += _logistic(g * (s + 0.5 * d)) + _logistic(-g * (s - 0.5 * d)) - 1.0
    total *= bump.epsilon
    return float(total[0]) if scalar else total


def kappa1_field(params: ModelParams, bump: Union[HeterogeneityBump, None] = None) -> np.ndarray:
    """kappa1(x) on the collocation grid: baseline plus optional bump."""
    base = np.full(params.n_modes, params.kappa1_base)
    if bump is not None and bump.epsilon != 0.0:
        base += bump_profile(bump, grid_x(params), params.domain_length)
    return base


def w_from_u(u: np.ndarray, params: ModelParams) -> np.ndarray:
    """Third component reconstructed from u: w = (1 - Dw Lap)^-1 u."""
    return np.fft.ifft(helmholtz_multiplier(params) * np.fft.fft(u)).real


def rhs_nonlocal(u: np.ndarray, v: np.ndarray, params: ModelParams,
                 kappa1) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the reduced two-component system on the grid.

    u_t = (Du Lap + kappa2 - kappa4 (1 - Dw Lap)^-1) u - kappa3 v - u^3 + kappa1(x)
    v_t = (u - v) / tau

    ``kappa1`` may be a scalar or a grid field.
    """
    lin = np.fft.ifft(linear_u_symbol(params) * np.fft.fft(u)).real
    u_t = lin - params.kappa3 * v - u ** 3 + kappa1
    v_t = (u - v) / params.tau
    return u_t, v_t


_TOP_KEYS = ("kappa1_base", "kappa2", "kappa3", "kappa4", "tau", "theta",
             "Du", "Dv", "Dw", "domain_length", "n_modes")
_BUMP_KEYS = ("epsilon", "d", "gamma", "center")


def load_config(source) -> tuple[ModelParams, Union[HeterogeneityBump, None]]:
    """Load (ModelParams, bump) from a JSON file path, JSON string, or dict.

    Field names are exactly the ModelParams field names, with the bump nested
    under "bump": {epsilon, d, gamma, center}. Unknown keys are rejected with
    their path so typos do not silently fall back to defaults.
    """
    if isinstance(source, (str, Path)):
        p = Path(source)
        if p.exists():
            raw = json.loads(p.read_text())
        else:
            try:
                raw = json.loads(str(source))
            except json.JSONDecodeError as exc:
                raise ConfigInvalid("<config>", f"not a file and not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        raw = dict(source)
    else:
        raise ConfigInvalid("<config>", f"unsupported config source {type(source)!r}")
    if not isinstance(raw, dict):
        raise ConfigInvalid("<config>", "top level must be an object")

    for key in raw:
        if key not in _TOP_KEYS + ("bump", "allow_nonreduced"):
            raise ConfigInvalid(key, "unknown field")
    kwargs = {}
    for key in _TOP_KEYS:
        if key in raw:
            value = raw[key]
            if key == "n_modes":
                if not isinstance(value, int):
                    raise ConfigInvalid(key, f"must be an integer, got {value!r}")
                kwargs[key] = value
            else:
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise ConfigInvalid(key, f"must be a number, got {value!r}")
                kwargs[key] = float(value)
    if "allow_nonreduced" in raw:
        kwargs["allow_nonreduced"] = bool(raw["allow_nonreduced"])
    if "kappa1_base" not in kwargs:
        raise ConfigInvalid("kappa1_base", "required")
    try:
        params = ModelParams(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid("<config>", str(exc)) from exc

    bump = None
    if "bump" in raw and raw["bump"] is not None:
        sub = raw["bump"]
        if not isinstance(sub, dict):
            raise ConfigInvalid("bump", "must be an object")
        for key in sub:
            if key not in _BUMP_KEYS:
                raise ConfigInvalid(f"bump.{key}", "unknown field")
        for key in ("epsilon", "d"):
            if key not in sub:
                raise ConfigInvalid(f"bump.{key}", "required")
        bkw = {k: sub[k] for k in _BUMP_KEYS if k in sub}
        for k, v in bkw.items():
            if v is not None and (not isinstance(v, (int, float)) or isinstance(v, bool)):
                raise ConfigInvalid(f"bump.{k}", f"must be a number, got {v!r}")
        bump = HeterogeneityBump(**{k: (float(v) if v is not None else None)
                                    for k, v in bkw.items()})
    return params, bump


def params_to_dict(params: ModelParams,
                   bump: Union[HeterogeneityBump, None] = None) -> dict:
    """Inverse of load_config, suitable for json.dump."""
    out = {key: getattr(params, key) for key in _TOP_KEYS}
    if params.allow_nonreduced:
        out["allow_nonreduced"] = True
    if bump is not None:
        out["bump"] = {"epsilon": bump.epsilon, "d": bump.d, "gamma": bump.gamma,
                       "center": bump.center}
    return out
