import math

import mpmath as mp
import numpy as np
import pytest

from prandtl_lab import profile_generic as pg
from prandtl_lab.kernels import c2_closed_form, c_pm

mp.mp.dps = 25
PS = mp.mpf("2.4768069861078699718831")

# Y*(X) = (1/2) int_{theta0}^inf (X + s + p^2 s^3)^(-1/2) ds, frozen with mpmath
Y_STAR_FROZEN = {
    -3.0: 0.567106945418929,
    -1.0: 0.699082577888560,
    -0.5: 0.804028631833775,
    0.5: 1.169366364030357,
    1.0: 1.083055335347255,
    3.0: 0.930789776084881,
}


def _theta0(X):
    roots = mp.polyroots([PS**2, 0, 1, X], maxsteps=200, extraprec=60)
    return min((r for r in roots if abs(mp.im(r)) < 1e-20), key=lambda r: abs(mp.im(r))).real


def _height_above(X, th):
    """(1/2) int_th^inf (X + s + p^2 s^3)^(-1/2) ds."""
    return mp.quad(lambda s: (X + s + PS**2 * s**3) ** (-0.5), [th, th + 1, mp.inf]) / 2


def _theta_oracle(X, Y):
    """Theta below the symmetry line by inverting the height integral."""
    lo = _theta0(X)
    f = lambda th: _height_above(X, th) - Y
    a, b = lo + mp.mpf("1e-20"), lo + 1
    while f(b) > 0:
        b = lo + 2 * (b - lo)
    return mp.findroot(f, (a, b), solver="anderson")


@pytest.mark.parametrize("X, want", sorted(Y_STAR_FROZEN.items()))
def test_y_star_frozen(X, want):
    assert pg.y_star(X) == pytest.approx(want, abs=1e-11)
    assert pg.y_star_alt(X) == pytest.approx(want, abs=1e-11)


def test_y_star_origin_and_slope():
    assert pg.y_star(0.0) == pytest.approx(3.0 * math.pi / 8.0, abs=1e-12)
    h = 1e-4
    assert (pg.y_star(h) - pg.y_star(-h)) / (2 * h) == pytest.approx(1.0, abs=1e-6)


def test_y_star_curvature_series_vs_mpmath():
    ystar = lambda X: _height_above(X, _theta0(X))
    h = mp.mpf("1e-5")
    oracle = float((ystar(h) - 2 * ystar(0) + ystar(-h)) / h**2)
    assert pg.y_star_curvature() == pytest.approx(-6.77542815958519, rel=1e-12)
    assert pg.y_star_curvature() == pytest.approx(oracle, rel=1e-8)


def test_quoted_c2_closed_form_is_not_the_curvature():
    # kept side by side, not asserted equal; the mismatch is three orders of magnitude
    assert abs(c2_closed_form()) < 2e-3
    assert abs(pg.y_star_curvature() / c2_closed_form()) > 1e3


@pytest.mark.parametrize("X, Y", [(0.5, 0.4), (-1.0, 0.3), (0.0, 1.0), (2.0, 0.05)])
def test_theta_matches_mpmath_inversion(X, Y):
    want = float(_theta_oracle(X, Y))
    assert pg.theta(X, Y) == pytest.approx(want, rel=1e-9)


def test_theta_symmetric_about_support_curve():
    for X in (-2.0, 0.3, 1.5):
        ys = pg.y_star(X)
        for d in (0.1, 0.4):
            assert pg.theta(X, ys - d) == pytest.approx(pg.theta(X, ys + d), rel=1e-10)


def test_theta_on_support_curve():
    for X in (-1.0, 0.0, 2.0):
        p = pg.theta_eval(X, pg.y_star(X))
        assert p.region is pg.Region.on_line
        assert p.theta == pytest.approx(float(_theta0(X)), abs=1e-9)


def test_level_set_inversion_roundtrip():
    for X, Y in ((0.7, 0.2), (-1.2, 0.9), (0.0, 2.0)):
        a, b = pg.invert_on_level(X, Y)
        assert a + b * b + pg.PS2 * a**3 == pytest.approx(X, abs=1e-10)
        Xb, Yb = pg.phi_map(a, b)
        assert Yb == pytest.approx(Y, abs=1e-10)


def test_regions_and_outside():
    X = 0.4
    ys = pg.y_star(X)
    assert pg.theta_eval(X, 0.5 * ys).region is pg.Region.below
    assert pg.theta_eval(X, 1.5 * ys).region is pg.Region.above
    out = pg.theta_eval(X, 2.5 * ys)
    assert out.region is pg.Region.outside and math.isnan(out.theta)
    with pytest.raises(pg.SupportError):
        pg.invert_on_level(X, -0.1)


def test_theta_ode_residual():
    for X, Y in ((0.5, 0.3), (0.5, 1.9), (-1.0, 0.2)):
        assert abs(pg.theta_ode_check(X, Y)) < 1e-8


def test_derivatives_against_finite_differences():
    X, Y, h = 0.3, 0.6, 1e-5
    p = pg.theta_eval(X, Y)
    fx = (pg.theta(X + h, Y) - pg.theta(X - h, Y)) / (2 * h)
    fy = (pg.theta(X, Y + h) - pg.theta(X, Y - h)) / (2 * h)
    assert p.dtheta_dX == pytest.approx(fx, rel=1e-6)
    assert p.dtheta_dY == pytest.approx(fy, rel=1e-6)


def test_taylor_at_origin():
    y0 = 3.0 * math.pi / 8.0
    X, Y = 0.01, 0.005
    assert pg.theta(X, y0 + Y) == pytest.approx(-X + (X - Y) ** 2, abs=5e-6)


def test_boundary_expansion_near_wall():
    gaps = [abs(pg.boundary_expansion_gap(0.0, y)) * y * y for y in (0.1, 0.03, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]
    near = pg.theta_eval(0.0, 5e-4)
    assert near.method == "boundary_expansion"
    assert near.theta == pytest.approx(1.0 / (pg.PS2 * 5e-4**2), rel=1e-12)


def test_far_field_constants_and_profile():
    for s in (1, -1):
        w0 = -s * pg.PS ** (-2.0 / 3.0)
        assert pg.psi_pm(s, w0) == pytest.approx(c_pm(s), rel=1e-10)
        assert pg.y_star(s * 1e6) * 1e6 ** (1 / 6) == pytest.approx(c_pm(s), rel=1e-3)
    X = -1e4
    Y = c_pm(-1) * abs(X) ** (-1.0 / 6.0)
    assert pg.theta(X, Y) == pytest.approx(pg.far_field_theta(X, Y), rel=5e-3)


def test_rescaled_family():
    f = pg.rescaled(pg.theta, 2.0, 3.0, -1)
    assert f(0.4, 1.2) == pytest.approx(-2.0 * pg.theta(-0.2, 0.4), rel=1e-14)
    assert pg.y_star_rescaled(0.4, 2.0, 3.0, -1) == pytest.approx(3.0 * pg.y_star(-0.2), rel=1e-14)


def test_volume_preservation_of_phi():
    h = 1e-5
    for a, b in ((0.3, -0.5), (-0.8, 1.1), (1.2, 0.2)):
        fa = (np.array(pg.phi_map(a + h, b)) - np.array(pg.phi_map(a - h, b))) / (2 * h)
        fb = (np.array(pg.phi_map(a, b + h)) - np.array(pg.phi_map(a, b - h))) / (2 * h)
        assert fa[0] * fb[1] - fa[1] * fb[0] == pytest.approx(1.0, abs=1e-6)
