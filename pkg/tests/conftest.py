from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from pulsekit import shooting
from pulsekit.io import load_solution, save_solution
from pulsekit.model import ModelParams

DATA = Path(__file__).parent / "data"

settings.register_profile("ci", max_examples=25, deadline=None,
                          derandomize=True)
settings.load_profile("ci")


def ensure_pulse(L: float, n: int, stem: str):
    """Stationary pulse at kappa1 = -0.1, tau = 3.35, cached as JSON."""
    path = DATA / f"{stem}.json"
    if path.exists():
        return load_solution(path)
    params = ModelParams(kappa1_base=-0.1, tau=3.35, domain_length=L,
                         n_modes=n)
    sol = shooting.find_stationary_pulse(params)
    DATA.mkdir(parents=True, exist_ok=True)
    save_solution(sol, path, params)
    return sol, params


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def pulse56():
    return ensure_pulse(0.56, 256, "pulse_L0.56_n256")


@pytest.fixture(scope="session")
def pulse28():
    return ensure_pulse(2.8, 2048, "pulse_L2.8_n2048")


@pytest.fixture(scope="session")
def system28(pulse28):
    from pulsekit import reduced

    sol, params = pulse28
    return reduced.build_reduced(sol, params, d=0.05)


@pytest.fixture(scope="session")
def background_state():
    from pulsekit.model import solve_background
    from pulsekit.spectral import state_from_grid

    params = ModelParams(kappa1_base=-0.1, tau=3.35, domain_length=0.56,
                         n_modes=256)
    u_bar = solve_background(params, params.kappa1_base).u_bar
    u = np.full(params.n_modes, u_bar)
    return state_from_grid(u, u.copy()), params, u_bar
