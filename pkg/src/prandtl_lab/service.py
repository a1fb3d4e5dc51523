"""Compute layer behind both the HTTP service and the local CLI.

Every entry point takes a request model and returns a response model, so the
CLI can run it in-process or send the same request to a running server.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterator

import numpy as np

from . import profile_degenerate as pd
from . import profile_generic as pg
from .eulerian import (CharacteristicMap, DegeneracyError, SeedError, TruncationError,
                       renormalized_error, snapshot)
from .kernels import (BracketError, DomainError, IntegrationError, QuadratureError, beta_fn,
                      c_pm)
from .lagrangian import BlowupReport, InitialDatum, OuterFlow, analyze
from .scenario import ParseError, Scenario, ValidationError, parse_scenario, validate_scenario
from .schemas import (BlowupRequest, BlowupResponse, CheckModel, GenericityModel, Grid,
                      ProfileRequest, SimulateRequest, SimulateResponse, SnapshotModel, Table,
                      VerifyResponse)
from .verify import run_suite


class InputError(ValueError):
    """Malformed request or invalid scenario (CLI exit 2, HTTP 400)."""


class RunDegeneracy(RuntimeError):
    """Tracing broke down near the singularity (CLI exit 3, HTTP 409)."""

    def __init__(self, message: str, t: float | None = None, x: float | None = None):
        self.t, self.x = t, x
        super().__init__(message)


EVALUATION_ERRORS = (DomainError, QuadratureError, BracketError, IntegrationError)


def _num(v) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def _linspace(a: float, b: float, n: int) -> list[float]:
    return [float(v) for v in np.linspace(a, b, n)] if n > 0 else []


# -- profile tables --------------------------------------------------------------

def _axes(req: ProfileRequest) -> tuple[list[float], list[float]]:
    xs = list(req.x) if req.x is not None else None
    ys = list(req.y) if req.y is not None else None
    if req.grid is not None:
        g = req.grid
        xs = xs if xs is not None else _linspace(g.x0, g.x1, g.nx)
        ys = ys if ys is not None else _linspace(g.y0, g.y1, g.ny)
    return xs or [], ys or []


def _theta_rows(req: ProfileRequest, xs, ys) -> Iterator[list]:
    for X in xs:
        for Y in ys:
            if req.kind == "generic":
                try:
                    p = pg.theta_eval(X, Y)
                except pg.SupportError:
                    yield [X, Y, None, None, None, None, None, pg.Region.outside.value]
                    continue
                yield [X, Y, p.theta, p.dtheta_dX, p.dtheta_dY, p.a, p.b, p.region.value]
            else:
                p = pd.theta_prime_eval(X, Y, req.mode)
                region = "inside_support" if p.inside else "outside_support"
                yield [X, Y, p.theta, p.dtheta_dX, p.dtheta_dY, _num(p.a), _num(p.b), region]


def _asymptotic_rows(kind: str) -> Iterator[list]:
    """(expansion, X, Y, evaluator, expansion value, gap)."""
    def row(name, X, Y, ev, ex):
        return [name, X, Y, ev, ex, ev - ex]

    if kind == "generic":
        c2 = pg.y_star_curvature()
        for X in (-0.1, -0.03, -0.01, 0.0, 0.01, 0.03, 0.1):
            yield row("ystar_taylor", X, None, pg.y_star(X),
                      3.0 * math.pi / 8.0 + X + 0.5 * c2 * X * X)
        for X in (-1e6, -1e4, -1e2, 1e2, 1e4, 1e6):
            s = 1 if X > 0 else -1
            yield row("ystar_far", X, None, pg.y_star(X), c_pm(s) * abs(X) ** (-1.0 / 6.0))
        y0 = 3.0 * math.pi / 8.0
        for X, Y in ((0.01, 0.0), (0.0, 0.01), (0.01, 0.01), (-0.02, 0.01), (0.02, -0.02)):
            yield row("theta_taylor", X, y0 + Y, pg.theta(X, y0 + Y), -X + (X - Y) ** 2)
        for Y in (0.1, 0.05, 0.02, 0.01):
            yield row("theta_wall", 0.0, Y, pg.theta_eval(0.0, Y, "quadrature").theta,
                      1.0 / (pg.PS2 * Y * Y))
        top = 2.0 * pg.y_star(0.0)
        for Y in (0.1, 0.05, 0.02, 0.01):
            yield row("theta_top", 0.0, top - Y, pg.theta_eval(0.0, top - Y, "quadrature").theta,
                      1.0 / (pg.PS2 * Y * Y))
        X = -1e4
        cm = c_pm(-1)
        for s in (0.3, 1.0, 1.6):
            Y = s * cm * abs(X) ** (-1.0 / 6.0)
            yield row("theta_far", X, Y, pg.theta(X, Y), pg.far_field_theta(X, Y))
    else:
        for X in (-0.1, -0.03, -0.01, 0.0, 0.01, 0.03, 0.1):
            yield row("yprime_taylor", X, None, pd.y_prime_star(X),
                      math.pi - 15.0 * math.pi / 16.0 * X * X)
        kf = beta_fn(1.0 / 6.0, 0.5) / 3.0
        for X in (1e2, 1e4, 1e6):
            yield row("yprime_far", X, None, pd.y_prime_star(X), kf * X ** (-1.0 / 3.0))
        for X, Y in ((0.01, 0.0), (0.02, 0.05), (-0.02, 0.05), (0.03, -0.1)):
            yield row("theta_taylor", X, math.pi + Y, pd.theta_prime(X, math.pi + Y),
                      -X + X**3 + 0.25 * X * Y * Y)


def profile_table(req: ProfileRequest) -> Table:
    """Rows computed up to the first evaluator failure; the failure message is
    carried in ``error`` so callers can flush the partial table."""
    xs, ys = _axes(req)
    if req.what == "theta":
        cols = ["X", "Y", "theta", "dtheta_dX", "dtheta_dY", "a", "b", "region"]
        rows = _theta_rows(req, xs, ys)
    elif req.what == "ystar":
        fn = pg.y_star if req.kind == "generic" else pd.y_prime_star
        cols = ["X", "y_star"]
        rows = ([X, fn(X)] for X in xs)
    elif req.what == "axis":
        if req.kind != "degenerate":
            raise InputError("axis derivatives exist for the degenerate profile only")
        fn = pd.axis_dx if req.derivative == "d1" else pd.axis_d3x
        cols = ["Y", "dX_theta" if req.derivative == "d1" else "dX3_theta"]
        rows = ([Y, fn(Y)] for Y in ys)
    else:
        cols = ["expansion", "X", "Y", "evaluator", "expansion_value", "gap"]
        rows = _asymptotic_rows(req.kind)
    table = Table(columns=cols)
    try:
        for r in rows:
            table.rows.append([_num(v) if isinstance(v, (float, int, np.floating)) else v for v in r])
    except EVALUATION_ERRORS as exc:
        table.error = f"{type(exc).__name__}: {exc}"
    return table


# -- scenarios -------------------------------------------------------------------

def load_scenario_text(text: str) -> Scenario:
    try:
        s = parse_scenario(text)
        validate_scenario(s)
    except (ParseError, ValidationError) as exc:
        raise InputError(str(exc)) from exc
    return s


def _report_for(s: Scenario, t_max=None, window=None, n=None) -> tuple[OuterFlow, InitialDatum, BlowupReport]:
    flow, datum = OuterFlow.from_scenario(s), InitialDatum.from_scenario(s)
    rep = analyze(flow, datum, tuple(window or s.window), int(n or s.grid_n),
                  float(t_max if t_max is not None else s.t_max))
    return flow, datum, rep


def blowup(req: BlowupRequest) -> BlowupResponse:
    s = load_scenario_text(req.scenario)
    _, _, rep = _report_for(s, req.t_max, req.window, req.n)
    d = rep.to_dict()
    gen = None
    if "genericity" in d:
        g = d["genericity"]
        gen = GenericityModel(generic=d["generic"], flags=g["flags"], values=g["values"],
                              reasons=g["reasons"], scope=g["scope"])
    return BlowupResponse(
        name=s.name, T=d["T"], T_a=d["T_a"], T_b=d["T_b"], X0=d["X0"], Y0=d["Y0"],
        t_max=d["t_max"], window=tuple(d["window"]), n=d["n"], genericity=gen,
        grad_xY=tuple(d["grad_xY"]) if "grad_xY" in d else None,
        uX_at_T=d.get("uX_at_T"), p0_sq=d.get("p0_sq"),
        mu=d.get("mu"), nu=d.get("nu"), iota=d.get("iota"))


def default_renorm_window(rep: BlowupReport) -> tuple[float, float, float, float]:
    """|X| <= 1/2 and the middle band of the profile support in Y."""
    return (-0.5, 0.5, 0.7 * rep.nu, 1.5 * rep.nu)


def simulate(req: SimulateRequest) -> SimulateResponse:
    s = load_scenario_text(req.scenario)
    flow, datum, rep = _report_for(s)
    if rep.finite:
        late = [t for t in req.times if t > rep.T - req.guard]
        if late:
            raise InputError(f"times {late} are not below T - guard = {rep.T - req.guard:.12g}")
    if req.renorm and rep.scaling is None:
        raise InputError("--renorm needs a generic blow-up (no scaling parameters available)")
    lmap = CharacteristicMap(flow, datum)
    g: Grid = req.grid
    xs, ys = _linspace(g.x0, g.x1, g.nx), _linspace(g.y0, g.y1, g.ny)
    window = tuple(req.window) if req.window is not None else (
        default_renorm_window(rep) if rep.scaling is not None else None)
    snaps = []
    for t in req.times:
        try:
            snap = snapshot(t, xs, ys, lmap, rep if rep.scaling is not None else None, req.delta)
            err = None
            if req.renorm:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    err = renormalized_error(t, lmap, rep, window).sup_error
        except DegeneracyError as exc:
            raise RunDegeneracy(str(exc), exc.t, exc.x_value) from exc
        except (SeedError, TruncationError) as exc:
            raise RunDegeneracy(f"{exc} at t = {t}", t) from exc
        snaps.append(SnapshotModel(
            t=t, x=snap.x_grid, y=snap.y_grid,
            u=[[_num(v) for v in row] for row in snap.u],
            y_star=[_num(v) for v in snap.y_star], x_star=_num(snap.x_star),
            renorm_error=None if err is None else _num(err),
            renorm_window=window if req.renorm else None))
    return SimulateResponse(name=s.name, T=rep.time_label(rep.T),
                            mu=_num(rep.mu), nu=_num(rep.nu),
                            iota=rep.iota if rep.scaling is not None else None, snapshots=snaps)


def verify(suite: str) -> VerifyResponse:
    try:
        results = run_suite(suite)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    checks = [CheckModel(**r.to_dict()) for r in results]
    return VerifyResponse(suite=suite, passed=all(c.passed for c in checks), checks=checks)
