import math

import mpmath as mp
import numpy as np
import pytest

from prandtl_lab import profile_degenerate as pd
from prandtl_lab.kernels import DomainError, beta_fn

mp.mp.dps = 20


def _psi1_mp(x):
    """Real root of u + u^3 + x = 0."""
    return mp.findroot(lambda u: u + u**3 + x, -mp.sign(x) * min(abs(x), abs(x) ** (mp.mpf(1) / 3)) if x else 0)


def _y_prime_star_oracle(X):
    def dens(s):
        q = 1 + s * s
        u = _psi1_mp(X / q**1.5)
        return 1 / (q * (1 + 3 * u * u))
    return 2 * mp.quad(dens, [-mp.inf, -1, 0])


@pytest.mark.parametrize("X", [0.0, 0.3, -1.0, 4.0])
def test_y_prime_star_against_mpmath(X):
    assert pd.y_prime_star(X) == pytest.approx(float(_y_prime_star_oracle(X)), rel=1e-11)


def test_y_prime_star_origin_and_evenness():
    assert pd.y_prime_star(0.0) == pytest.approx(math.pi, abs=1e-12)
    assert pd.y_prime_star(0.7) == pd.y_prime_star(-0.7)


def test_y_prime_star_taylor_and_far_field():
    X = 0.01
    assert pd.y_prime_star(X) == pytest.approx(math.pi - 15.0 * math.pi / 16.0 * X * X, abs=1e-6)
    kf = beta_fn(1.0 / 6.0, 0.5) / 3.0
    assert pd.y_prime_star(1e6) * 1e6 ** (1.0 / 3.0) == pytest.approx(kf, rel=1e-3)


def test_axis_formulas():
    assert pd.axis_dx(math.pi) == -1.0
    assert pd.axis_dx(7.0) == 0.0
    assert pd.axis_d3x(math.pi) == pytest.approx(6.0, rel=1e-14)
    ys = np.linspace(0.0, 2.0 * math.pi, 52)[1:-1]
    assert min(pd.axis_d3x(float(y)) for y in ys) > 0.0


def test_axis_dx_against_finite_differences():
    for Y in np.linspace(0.0, 2.0 * math.pi, 12)[1:-1]:
        assert abs(pd.axis_dx_consistency(float(Y))) < 1e-6


@pytest.mark.parametrize("Y", [1.0, 2.5, math.pi, 4.0])
def test_axis_d3x_against_finite_differences(Y):
    def d3(h):
        f = lambda x: pd.theta_prime(x, Y)
        return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
    rich = (4.0 * d3(0.01) - d3(0.02)) / 3.0
    assert rich == pytest.approx(pd.axis_d3x(Y), rel=2e-3, abs=1e-5)


def test_bracket_slope_at_two_pi():
    Y, h = 2.0 * math.pi, 1e-6
    slope = (pd.axis_d3x_bracket(Y) - pd.axis_d3x_bracket(Y - h)) / h
    assert abs(slope) == pytest.approx(540.0 * math.pi, rel=1e-6)
    assert pd.axis_d3x_bracket(Y) == pytest.approx(0.0, abs=1e-9)


def test_axis_domain_errors():
    with pytest.raises(DomainError):
        pd.axis_dx(-0.1)
    with pytest.raises(DomainError):
        pd.axis_dx_consistency(0.0)


def test_taylor_structure_near_centre():
    X, Y = 0.01, 0.03
    assert pd.theta_prime(X, math.pi + Y) == pytest.approx(-X + X**3 + 0.25 * X * Y * Y, abs=5e-8)


def test_odd_in_x_and_symmetric_about_centre():
    for X, d in ((0.4, 0.5), (1.3, 1.2)):
        ysp = pd.y_prime_star(X)
        assert pd.theta_prime(-X, ysp - d) == pytest.approx(-pd.theta_prime(X, ysp - d), rel=1e-10)
        assert pd.theta_prime(X, ysp + d) == pytest.approx(pd.theta_prime(X, ysp - d), rel=1e-10)


def test_inversion_roundtrip():
    for X, Y in ((0.5, 1.0), (-0.8, 4.0), (2.0, 0.3)):
        a, b = pd.invert_on_level(X, Y)
        assert pd.phi1_prime(a, b) == pytest.approx(X, abs=1e-10)
        assert pd.phi_prime_map(a, b)[1] == pytest.approx(Y, abs=1e-10)


def test_ode_residual():
    for X, Y in ((0.5, 1.0), (-0.5, 5.0), (1.5, 2.0)):
        assert abs(pd.ode_residual_degenerate(X, Y)) < 1e-8


def test_modes_outside_support():
    top = 2.0 * pd.y_prime_star(0.5)
    out = pd.theta_prime_eval(0.5, top + 0.3)
    assert not out.inside and out.theta == 0.0
    per = pd.theta_prime_eval(0.5, top + 0.3, "periodic")
    assert per.inside
    assert per.theta == pytest.approx(pd.theta_prime(0.5, 0.3), rel=1e-12)
    with pytest.raises(DomainError):
        pd.theta_prime_eval(0.5, -1.0)


def test_volume_preservation_of_phi_prime():
    h = 1e-5
    for a, b in ((0.3, -0.5), (-0.8, 1.1), (1.2, 0.2)):
        fa = (np.array(pd.phi_prime_map(a + h, b)) - np.array(pd.phi_prime_map(a - h, b))) / (2 * h)
        fb = (np.array(pd.phi_prime_map(a, b + h)) - np.array(pd.phi_prime_map(a, b - h))) / (2 * h)
        assert fa[0] * fb[1] - fa[1] * fb[0] == pytest.approx(1.0, abs=1e-6)
