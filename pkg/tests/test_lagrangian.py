import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from prandtl_lab.kernels import OdeSpec
from prandtl_lab.lagrangian import (InitialDatum, OuterFlow, advance_char, analyze,
                                    genericity_check, maximal_time, monodromy, p0_squared,
                                    p0_squared_collinear, pointwise_T, scaling_parameters,
                                    x_derivatives, zero_vorticity_set)
from prandtl_lab.scenario import GAUSSIAN_LINE_SCENARIO, ScalarField2D, parse_scenario
from prandtl_lab.verify import CONCAVE_SCENARIO, PERTURBED_GAUSSIAN_U0


def _flow(uE, pEx):
    return OuterFlow(ScalarField2D(uE, ("t", "x")), ScalarField2D(pEx, ("t", "x")))


GAUSS = InitialDatum.from_expression("-sin(X)*exp(-(Y-1)^2/2)")
PERTURBED = InitialDatum.from_expression(PERTURBED_GAUSSIAN_U0)
WINDOW = (-3.0, 3.0, 0.0, 3.0)


@pytest.fixture(scope="module")
def perturbed_report():
    return analyze(OuterFlow(), PERTURBED, WINDOW, 61, 10.0)


def test_hyperbolic_pressure_characteristics():
    # x'' = x: x = X cosh t + u0 sinh t, M = [[cosh, sinh], [sinh, cosh]]
    flow = _flow("x", "-x")
    datum = InitialDatum.from_expression("-2*X + 0.3*Y")
    X, Y, t = 0.4, 1.0, 0.7
    u0 = -0.8 + 0.3
    tr = advance_char(X, Y, flow, datum, t)
    x, u = tr.at(t)
    assert x == pytest.approx(X * math.cosh(t) + u0 * math.sinh(t), rel=1e-9)
    assert u == pytest.approx(X * math.sinh(t) + u0 * math.cosh(t), rel=1e-9)
    M = monodromy(X, Y, flow, datum, t).at(t).M
    want = np.array([[math.cosh(t), math.sinh(t)], [math.sinh(t), math.cosh(t)]])
    assert np.allclose(M, want, rtol=1e-9, atol=1e-11)
    assert pointwise_T(X, Y, flow, datum, 5.0) == pytest.approx(math.atanh(0.5), abs=1e-10)


def test_harmonic_pressure_blowup_time():
    # x'' = -x: x_X = cos t + u0X sin t vanishes at atan(-1/u0X) or 3 pi / 4
    flow = _flow("0", "x")
    assert pointwise_T(0.0, 1.0, flow, InitialDatum.from_expression("-2*X"), 5.0) == pytest.approx(
        math.atan(0.5), abs=1e-10)
    assert pointwise_T(0.0, 1.0, flow, InitialDatum.from_expression("X"), 5.0) == pytest.approx(
        0.75 * math.pi, abs=1e-10)
    assert pointwise_T(0.0, 1.0, flow, InitialDatum.from_expression("X"), 2.0) == math.inf


def test_riccati_cross_check_against_scipy():
    # along a characteristic w = u_X obeys w' = -w^2 - pEx_x; s = 1/w reaches 0 at blow-up
    flow = OuterFlow(None, ScalarField2D("0.5*sin(x)+0.2*t*x", ("t", "x")))
    datum = InitialDatum.from_expression("-0.8*tanh(X)*exp(-Y^2)+0.3*X")
    X, Y = 0.2, 0.1
    u0, w0 = datum.u(X, Y), datum.uX(X, Y)

    def rhs(t, s):
        x, u, r = s
        fx = 0.5 * math.cos(x) + 0.2 * t
        return [u, -(0.5 * math.sin(x) + 0.2 * t * x), 1.0 + fx * r * r]
    ev = lambda t, s: s[2]
    ev.terminal = True
    sol = solve_ivp(rhs, (0.0, 20.0), [X, u0, 1.0 / w0], events=ev, rtol=1e-12, atol=1e-13)
    assert sol.t_events[0].size == 1
    assert pointwise_T(X, Y, flow, datum, 20.0) == pytest.approx(sol.t_events[0][0], abs=1e-8)


def test_monodromy_is_unimodular_under_pressure():
    flow = _flow("x", "-x")
    m = monodromy(0.3, 0.5, flow, GAUSS, 2.0, OdeSpec(rel_tol=1e-12, abs_tol=1e-13))
    assert m.det_error() < 1e-9


def test_zero_vorticity_set_of_gaussian_line():
    chains = zero_vorticity_set(GAUSS, WINDOW, 31)
    pts = np.vstack(chains)
    on_line = pts[np.abs(np.sin(pts[:, 0])) > 1e-3]
    assert np.allclose(on_line[:, 1], 1.0, atol=1e-10)


def test_gaussian_line_times():
    rep = maximal_time(OuterFlow(), GAUSS, WINDOW, 61, 10.0)
    assert rep.T == pytest.approx(1.0, abs=1e-6)
    assert rep.T_a == pytest.approx(1.0, abs=1e-6)
    assert rep.T_b == pytest.approx(math.exp(0.5), abs=1e-4)
    assert rep.X0 == pytest.approx(0.0, abs=1e-4) and rep.Y0 == pytest.approx(1.0, abs=1e-4)


def test_gaussian_line_is_not_generic():
    # x_Y vanishes identically along Y = 1 at T, so grad x_Y has no X component
    s = parse_scenario(GAUSSIAN_LINE_SCENARIO)
    rep = analyze(OuterFlow.from_scenario(s), GAUSS, s.window, s.grid_n, s.t_max)
    assert rep.genericity is not None
    assert rep.scaling is None


def test_concave_pressure_never_blows_up():
    s = parse_scenario(CONCAVE_SCENARIO)
    rep = maximal_time(OuterFlow.from_scenario(s), InitialDatum.from_scenario(s), s.window,
                       11, s.t_max)
    assert not rep.finite
    assert rep.time_label(rep.T) == ">= 50"


def test_perturbed_datum_frozen(perturbed_report):
    r = perturbed_report
    assert r.generic
    assert r.T == pytest.approx(1.049089016982142, abs=1e-9)
    assert r.X0 == pytest.approx(-0.161631817910, abs=1e-6)
    assert r.Y0 == pytest.approx(1.223019297791, abs=1e-6)
    assert r.mu == pytest.approx(2.94574183698, rel=1e-6)
    assert r.nu == pytest.approx(5.22277133990, rel=1e-6)
    assert r.iota == -1
    assert r.uX_at_T < 0
    assert r.genericity.values["T_gap_off_point"] > 1e-4


def test_p0_general_matches_collinear(perturbed_report):
    d = perturbed_report.genericity.derivatives
    assert p0_squared(d) == pytest.approx(p0_squared_collinear(d), rel=1e-6)
    assert p0_squared(d) > 0


def test_fd_stencil_matches_exact_derivatives(perturbed_report):
    r = perturbed_report
    exact = x_derivatives(OuterFlow(), PERTURBED, r.T, r.X0, r.Y0)
    fd = x_derivatives(OuterFlow(), PERTURBED, r.T, r.X0, r.Y0, method="fd")
    for key, v in exact.items():
        assert fd[key] == pytest.approx(v, abs=1e-5), key


@pytest.mark.parametrize("u0", [
    PERTURBED_GAUSSIAN_U0,
    "-sin(X)*exp(-(Y-1)^2/2)+0.05*(Y-1+0.5*X)*exp(-(X^2+(Y-1.3)^2)/2)",
])
def test_coordinate_matrices_are_inverse(u0):
    # the two data have opposite signs of x_XY at the singular point
    rep = analyze(OuterFlow(), InitialDatum.from_expression(u0), WINDOW, 61, 10.0)
    k = rep.scaling.k
    A = np.array([[k["k1"], k["k2"]], [-k["k3"], k["k4"]]])
    B = np.array([[k["kbar1"], -k["kbar2"]], [k["kbar3"], k["kbar4"]]])
    assert np.allclose(A @ B, np.eye(2), atol=1e-12)
    assert k["k5"] * rep.mu == pytest.approx(1.0) and k["k6"] * rep.nu == pytest.approx(1.0)


def test_reflection_flips_iota(perturbed_report):
    # X -> -X with u -> -u mirrors the singular point and the orientation
    mirrored = "-(" + PERTURBED_GAUSSIAN_U0.replace("X", "(-X)") + ")"
    rep = analyze(OuterFlow(), InitialDatum.from_expression(mirrored), WINDOW, 61, 10.0)
    r = perturbed_report
    assert rep.T == pytest.approx(r.T, abs=1e-9)
    assert rep.X0 == pytest.approx(-r.X0, abs=1e-6)
    assert rep.Y0 == pytest.approx(r.Y0, abs=1e-6)
    assert rep.mu == pytest.approx(r.mu, rel=1e-8)
    assert rep.nu == pytest.approx(r.nu, rel=1e-8)
    assert rep.iota == -r.iota


def test_tied_singular_points_are_not_generic():
    # u0(-X, 2 - Y) = -u0(X, Y) makes T attained at two mirrored points
    tied = "-sin(X)*exp(-(Y-1)^2/2)+0.05*(Y-1+0.5*X)*exp(-(X^2+(Y-1)^2)/2)"
    rep = analyze(OuterFlow(), InitialDatum.from_expression(tied), WINDOW, 61, 10.0)
    assert rep.genericity is not None
    assert not rep.genericity.flags["unique_singular_point"]
    assert abs(rep.genericity.values["T_gap_off_point"]) < 1e-8
    assert rep.scaling is None


def test_scaling_rejects_non_generic():
    s = parse_scenario(GAUSSIAN_LINE_SCENARIO)
    rep = maximal_time(OuterFlow(), GAUSS, s.window, s.grid_n, s.t_max)
    diag = genericity_check(OuterFlow(), GAUSS, rep)
    assert not diag.generic and diag.reasons
    with pytest.raises(ValueError):
        scaling_parameters(OuterFlow(), GAUSS, rep, diag)


def test_x_star_follows_characteristic(perturbed_report):
    sp = perturbed_report.scaling
    r = perturbed_report
    t = 0.5
    assert sp.x_star(t) == pytest.approx(r.X0 + t * PERTURBED.u(r.X0, r.Y0), rel=1e-12)
    assert sp.u_star(t) == pytest.approx(PERTURBED.u(r.X0, r.Y0), rel=1e-12)
