import math

import mpmath as mp
import numpy as np
import pytest

from prandtl_lab.scenario import (GAUSSIAN_LINE_SCENARIO, ParseError, ScalarField2D,
                                  ValidationError, differentiate, evaluate, load_scenario,
                                  parse_expr, parse_scenario, to_source, validate_scenario)

EXPRS = [
    "-sin(X)*exp(-(Y-1)^2/2)",
    "tanh(X)*(1+0.5*exp(-(Y-1)^2))",
    "X^3 - 2*X*Y + sqrt(1+Y^2)/(2+cos(X))",
    "-X/(1+X^2)^2*exp(-Y)",
    "abs(X-0.3)^3 + 1e-2*Y",
]


def test_parse_error_reports_offset_and_expected():
    with pytest.raises(ParseError) as info:
        parse_expr("X+*Y")
    assert info.value.offset == 2
    assert info.value.expected
    for bad in ("sin(X", "X Y", "foo(X)", "2^X", ""):
        with pytest.raises(ParseError):
            parse_expr(bad)


def test_precedence_and_unary_minus():
    assert evaluate(parse_expr("-2^2"), X=0.0) == -4.0
    assert evaluate(parse_expr("2*3-4/8"), X=0.0) == 5.5
    assert evaluate(parse_expr("-(X-1)^2/2"), X=3.0) == -2.0


@pytest.mark.parametrize("src", EXPRS)
def test_source_round_trip(src):
    e = parse_expr(src)
    e2 = parse_expr(to_source(e))
    for X, Y in ((0.3, 0.7), (-1.1, 2.0), (2.0, 0.1)):
        assert evaluate(e2, X=X, Y=Y) == pytest.approx(evaluate(e, X=X, Y=Y), rel=1e-14)


@pytest.mark.parametrize("src", EXPRS)
def test_derivatives_match_mpmath(src):
    f = ScalarField2D(src, ("X", "Y"))
    env = {"sin": mp.sin, "cos": mp.cos, "exp": mp.exp, "sqrt": mp.sqrt, "tanh": mp.tanh,
           "abs": abs}
    g = lambda X, Y: eval(src.replace("^", "**"), env, {"X": X, "Y": Y})
    X0, Y0 = 0.4, 0.9
    for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (0, 3)):
        want = float(mp.diff(g, (X0, Y0), (i, j)))
        assert f.partial(i, j)(X0, Y0) == pytest.approx(want, rel=1e-9, abs=1e-11)


def test_mixed_partials_commute():
    e = parse_expr(EXPRS[2])
    a = differentiate(differentiate(e, "X"), "Y")
    b = differentiate(differentiate(e, "Y"), "X")
    for X, Y in ((0.2, 0.5), (-1.0, 1.5)):
        assert evaluate(a, X=X, Y=Y) == pytest.approx(evaluate(b, X=X, Y=Y), rel=1e-13)
    with pytest.raises(ValueError):
        ScalarField2D("X", ("X", "Y")).partial(2, 2)


def test_scalar_field_vectorised():
    f = ScalarField2D("X*Y+1", ("X", "Y"))
    out = f(np.array([1.0, 2.0]), 3.0)
    assert out.tolist() == [4.0, 7.0]
    assert ScalarField2D("0", ("X", "Y")).is_zero


def test_gaussian_scenario_parses_and_validates():
    s = parse_scenario(GAUSSIAN_LINE_SCENARIO)
    assert s.name == "gaussian_line"
    rep = validate_scenario(s)
    assert rep.valid and rep.bernoulli_residual == 0.0
    # sin(X) does not decay in X
    assert not rep.decays_at_edges


def test_docs_scenario_file(tmp_path):
    p = tmp_path / "g.scn"
    p.write_text(GAUSSIAN_LINE_SCENARIO)
    assert load_scenario(p).u0(0.5, 1.0) == pytest.approx(-math.sin(0.5))


def _scn(uE, pEx, extra=""):
    return f'name = "s"\nu0 = "-sin(X)*exp(-Y)"\nuE = "{uE}"\npEx = "{pEx}"\nt_max = 0.9\n{extra}'


def test_inviscid_burgers_outer_flow_is_valid():
    # x/(1+t) solves uE_t + uE uE_x = 0, so it is consistent with zero pressure
    rep = validate_scenario(parse_scenario(_scn("x/(1+t)", "0")))
    assert rep.bernoulli_residual < 1e-12


def test_inconsistent_outer_flow_is_rejected():
    with pytest.raises(ValidationError) as info:
        validate_scenario(parse_scenario(_scn("x", "0")))
    assert info.value.worst is not None
    rep = validate_scenario(parse_scenario(_scn("x", "-x")))
    assert rep.bernoulli_residual < 1e-12


@pytest.mark.parametrize("text", [
    'u0 = "X"',
    'name = "a"\nu0 = "X"\nbogus = 1',
    'name = "a"\nu0 = "X"\nname = "b"',
    'name = "a"\nu0 = "X+t"',
    'name = "a"\nu0 = "X+"',
    'name = "a"\nu0 = "X"\nwindow = "1 0 0 1"',
    'name = "a"\nu0 = "X"\ngrid_n = 2',
    'name = "a"\nu0 = "X"\nt_max = -1',
    'name = "a"\nu0 = "X"\njust some words',
])
def test_malformed_scenarios(text):
    with pytest.raises(ValidationError):
        parse_scenario(text)


def test_non_finite_gradient_is_rejected():
    s = parse_scenario('name = "a"\nu0 = "sqrt(X)"\nwindow = "-1 1 0 1"')
    with pytest.raises(ValidationError):
        validate_scenario(s)
