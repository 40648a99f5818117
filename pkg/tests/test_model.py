from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsekit.errors import ConfigInvalid, SignConditionViolated
from pulsekit.model import (HeterogeneityBump, ModelParams, bump_profile,
                            grid_x, kappa1_field, load_config, params_to_dict,
                            rhs_nonlocal, solve_background, w_from_u,
                            wavenumbers)

# background roots frozen from a scalar Newton oracle on
# kappa2*u - u^3 - kappa3*u - kappa4*u + kappa1 = 0 (u = v = w branch)
U_BAR = {
    -0.1: -0.37229543057825737,
    -0.135866: -0.4306695216087812,
    -0.088: -0.34924502904546706,
}


def make_params(**kw) -> ModelParams:
    base = dict(kappa1_base=-0.1, tau=3.35, domain_length=0.56, n_modes=256)
    base.update(kw)
    return ModelParams(**base)


def test_default_coefficients():
    p = make_params()
    assert (p.kappa2, p.kappa3, p.kappa4) == (1.17, 0.3, 1.0)
    assert (p.Du, p.Dv, p.Dw) == (1.1e-4, 0.0, 9.8e-4)
    assert p.theta == 0.0 and p.Dv == 0.0


@pytest.mark.parametrize("kappa1,expected", sorted(U_BAR.items()))
def test_background_frozen_roots(kappa1, expected):
    p = make_params()
    bg = solve_background(p, kappa1)
    assert bg.u_bar == pytest.approx(expected, rel=1e-12)
    # residual of the uniform-state equation
    res = p.kappa2 * bg.u_bar - bg.u_bar**3 - p.kappa3 * bg.u_bar \
        - p.kappa4 * bg.u_bar + kappa1
    assert abs(res) < 1e-12


def test_background_requires_negative_slope_branch():
    # kappa2 - kappa3 - kappa4 must stay negative for a unique background
    with pytest.raises(SignConditionViolated):
        make_params(kappa2=1.5)


def test_params_validation():
    with pytest.raises(ConfigInvalid):
        make_params(n_modes=255)
    with pytest.raises(ConfigInvalid):
        make_params(domain_length=-1.0)
    with pytest.raises(ConfigInvalid):
        make_params(Du=0.0)
    with pytest.raises(ConfigInvalid):
        make_params(tau=-2.0)
    with pytest.raises(ConfigInvalid):
        make_params(kappa1_base=float("nan"))


def test_bump_validation():
    with pytest.raises(ConfigInvalid):
        HeterogeneityBump(epsilon=0.01, d=-0.05)
    with pytest.raises(ConfigInvalid):
        HeterogeneityBump(epsilon=0.01, d=0.05, gamma=0.0)
    b = HeterogeneityBump(epsilon=0.01, d=0.05)
    assert b.resolved_center(0.56) == pytest.approx(0.28)
    assert HeterogeneityBump(epsilon=0.0, d=0.05,
                             center=0.1).resolved_center(0.56) == 0.1


def test_bump_integral_is_epsilon_d():
    # steep-edge plateau: integral approaches epsilon * d as gamma -> inf
    p = make_params(domain_length=2.8, n_modes=2048)
    x = grid_x(p)
    for eps in (0.01, -0.004):
        b = HeterogeneityBump(epsilon=eps, d=0.05, gamma=100.0)
        prof = bump_profile(b, x, p.domain_length)
        integral = float(np.sum(prof)) * p.dx
        assert integral == pytest.approx(eps * 0.05, rel=5e-4)


def test_bump_profile_shape():
    p = make_params()
    x = grid_x(p)
    b = HeterogeneityBump(epsilon=1.0, d=0.1, gamma=100.0)
    prof = bump_profile(b, x, p.domain_length)
    c = b.resolved_center(p.domain_length)
    inside = np.abs(x - c) < 0.02
    outside = np.abs(x - c) > 0.09
    assert prof[inside].min() > 0.9
    assert np.abs(prof[outside]).max() < 0.05
    # symmetric about the center
    mirrored = bump_profile(b, 2 * c - x, p.domain_length)
    np.testing.assert_allclose(prof, mirrored, atol=1e-12)


def test_kappa1_field_composition():
    p = make_params()
    assert np.all(kappa1_field(p) == p.kappa1_base)
    b = HeterogeneityBump(epsilon=0.01, d=0.05)
    f = kappa1_field(p, b)
    prof = bump_profile(b, grid_x(p), p.domain_length)
    np.testing.assert_allclose(f, p.kappa1_base + prof, atol=0)


def test_w_from_u_inverts_helmholtz():
    p = make_params()
    rng = np.random.default_rng(7)
    # smooth random periodic field
    z = np.zeros(p.n_modes // 2 + 1, dtype=complex)
    z[1:9] = rng.normal(size=8) + 1j * rng.normal(size=8)
    u = np.fft.irfft(z, n=p.n_modes) + 0.3
    w = w_from_u(u, p)
    w_hat = np.fft.rfft(w)
    k_half = p.k()[: p.n_modes // 2 + 1]
    lhs = np.fft.irfft((1.0 + p.Dw * k_half**2) * w_hat, n=p.n_modes)
    np.testing.assert_allclose(lhs, u, atol=1e-12)


def test_rhs_vanishes_on_background():
    p = make_params()
    u_bar = solve_background(p, p.kappa1_base).u_bar
    u = np.full(p.n_modes, u_bar)
    du, dv = rhs_nonlocal(u, u.copy(), p, kappa1_field(p))
    assert np.abs(du).max() < 1e-13
    assert np.abs(dv).max() < 1e-13


def test_wavenumbers_layout():
    k = wavenumbers(8, 2 * np.pi)
    assert k[0] == 0
    assert k[1] == pytest.approx(1.0)
    assert len(k) == 8


def test_load_config_roundtrip():
    p = make_params()
    b = HeterogeneityBump(epsilon=-0.004, d=0.05, gamma=100.0)
    doc = params_to_dict(p, b)
    p2, b2 = load_config(doc)
    assert p2 == p
    assert b2 == b
    p3, b3 = load_config(json.dumps(doc))
    assert p3 == p and b3 == b


def test_load_config_rejects_unknown_and_missing():
    with pytest.raises(ConfigInvalid):
        load_config({"kappa1_base": -0.1, "bogus": 1})
    with pytest.raises(ConfigInvalid):
        load_config({"tau": 3.35})  # kappa1_base required
    with pytest.raises(ConfigInvalid):
        load_config({"kappa1_base": -0.1, "bump": {"epsilon": 0.01}})
    with pytest.raises(ConfigInvalid):
        load_config("][ not json")
    with pytest.raises(ConfigInvalid):
        load_config({"kappa1_base": -0.1, "n_modes": 2.5})


@given(st.floats(min_value=-0.135, max_value=-0.089))
def test_background_root_property(kappa1):
    p = make_params()
    bg = solve_background(p, kappa1)
    g = p.kappa2 * bg.u_bar - bg.u_bar**3 - p.kappa3 * bg.u_bar \
        - p.kappa4 * bg.u_bar + kappa1
    assert abs(g) < 1e-11
    # on the admissible branch the linearization slope stays negative
    slope = p.kappa2 - 3 * bg.u_bar**2 - p.kappa3 - p.kappa4
    assert slope < 0
