"""Verification suite: the acceptance checks grouped by topic, each returning
measured values next to their tolerances."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import profile_degenerate as pd
from . import profile_generic as pg
from .eulerian import (CharacteristicMap, ProfileChart, displacement_ratio, renormalized_error,
                       sample_u, self_similar_reference)
from .kernels import c2_closed_form, c_pm, psi1
from .lagrangian import InitialDatum, OuterFlow, analyze
from .scenario import GAUSSIAN_LINE_SCENARIO, parse_scenario
from .selfsim_verify import (DEGENERATE_MAP, GENERIC_MAP, crocco_residual, interior_grid,
                             stationary_residual, transport_residual, volume_residual)

SUITES = ("constants", "profiles", "residuals", "dynamics")


@dataclass
class CheckResult:
    id: str
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.id} {self.name}: measured={self.measured:.3e} tol={self.tolerance:.1e} {self.detail}".rstrip()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measured"] = self.measured if math.isfinite(self.measured) else None
        return d


def _check(cid: str, name: str, measured: float, tol: float, detail: str = "",
           passed: bool | None = None) -> CheckResult:
    ok = bool(measured <= tol) if passed is None else bool(passed)
    return CheckResult(cid, name, float(measured), float(tol), ok, detail)


# -- constants -----------------------------------------------------------------

def check_support_curve() -> list[CheckResult]:
    out = [_check("A1", "y_star(0) = 3 pi/8", abs(pg.y_star(0.0) - 3.0 * math.pi / 8.0), 1e-8)]
    h = 1e-4
    slope = (pg.y_star(h) - pg.y_star(-h)) / (2.0 * h)
    out.append(_check("A1", "d y_star/dX (0) = 1", abs(slope - 1.0), 1e-5))
    gap = max(abs(pg.y_star(X) - pg.y_star_alt(X)) for X in (-3.0, 0.0, 3.0))
    out.append(_check("A1", "two quadrature routes for y_star", gap, 1e-8))
    fd = (pg.y_star(1e-3) - 2.0 * pg.y_star(0.0) + pg.y_star(-1e-3)) / 1e-6
    out.append(_check("A1", "d2 y_star/dX2 (0) series vs FD", abs(fd - pg.y_star_curvature()), 1e-3,
                      f"series={pg.y_star_curvature():.10f} quoted_closed_form="
                      f"{c2_closed_form():.3e}"))
    return out


def check_psi1() -> list[CheckResult]:
    x = np.concatenate([-np.logspace(-6, 6, 500), np.logspace(-6, 6, 500)])
    p = psi1(x)
    rel = float(np.max(np.abs(-p - p**3 - x) / np.abs(x)))
    return [_check("A2", "-psi1 - psi1^3 = x (relative)", rel, 1e-11),
            _check("A2", "psi1(2) = -1", abs(float(psi1(2.0)) + 1.0), 1e-13)]


def check_far_field() -> list[CheckResult]:
    out = []
    for sign, tag in ((1, "C+"), (-1, "C-")):
        cc = c_pm(sign)
        defining = pg.psi_pm(sign, -sign * pg.PS ** (-2.0 / 3.0))
        out.append(_check("A3", f"{tag} closed form vs integral", abs(cc - defining), 1e-8,
                          f"value={cc:.12f}"))
        X = sign * 1e6
        rel = abs(pg.y_star(X) * abs(X) ** (1.0 / 6.0) / cc - 1.0)
        out.append(_check("A3", f"y_star({X:+.0e}) |X|^(1/6) -> {tag}", rel, 1e-3))
    return out


# -- profiles --------------------------------------------------------------------

def check_degenerate_axis() -> list[CheckResult]:
    out = [_check("A7", "axis_dx(pi) = -1", abs(pd.axis_dx(math.pi) + 1.0), 0.0)]
    Ys = np.linspace(0.0, 2.0 * math.pi, 12)[1:-1]
    out.append(_check("A7", "FD d_X Theta'(0, Y) vs -sin^2(Y/2)",
                      max(abs(pd.axis_dx_consistency(float(Y))) for Y in Ys), 1e-6))
    Ys = np.linspace(0.0, 2.0 * math.pi, 52)[1:-1]
    lo = min(pd.axis_d3x(float(Y)) for Y in Ys)
    out.append(_check("A7", "axis_d3x > 0 on (0, 2 pi)", lo, 0.0, f"min={lo:.3e}", passed=lo > 0.0))
    out.append(_check("A7", "y_prime_star(0) = pi", abs(pd.y_prime_star(0.0) - math.pi), 1e-8))
    return out


def taylor_fit_generic(r: float = 0.03, n: int = 9) -> dict:
    """Least squares of Theta(X, 3 pi/8 + Y) on monomials up to degree 3."""
    y0 = 3.0 * math.pi / 8.0
    g = np.linspace(-r, r, n)
    rows, vals = [], []
    for X in g:
        for Y in g:
            rows.append([1, X, Y, X * X, X * Y, Y * Y, X**3, X * X * Y, X * Y * Y, Y**3])
            vals.append(pg.theta(float(X), float(y0 + Y)))
    c = np.linalg.lstsq(np.array(rows), np.array(vals), rcond=None)[0]
    return {"X": c[1], "X2": c[3], "XY": c[4], "Y2": c[5]}


def taylor_fit_degenerate(r: float = 0.05, n: int = 9) -> dict:
    """Least squares of Theta'(X, pi + Y) on the odd-in-X monomials up to degree 5."""
    g = np.linspace(-r, r, n)
    rows, vals = [], []
    for X in g:
        for Y in g:
            rows.append([X, X * Y, X**3, X * Y * Y, X**3 * Y, X * Y**3, X**5, X**3 * Y * Y, X * Y**4])
            vals.append(pd.theta_prime(float(X), float(math.pi + Y)))
    c = np.linalg.lstsq(np.array(rows), np.array(vals), rcond=None)[0]
    return {"X": c[0], "X3": c[2], "XY2": c[3]}


def check_taylor() -> list[CheckResult]:
    out = []
    fit = taylor_fit_generic()
    for key, want in (("X", -1.0), ("X2", 1.0), ("XY", -2.0), ("Y2", 1.0)):
        out.append(_check("A8", f"generic Taylor coefficient {key}", abs(fit[key] / want - 1.0), 2e-2,
                          f"fit={fit[key]:.6f}"))
    fit = taylor_fit_degenerate()
    for key, want in (("X", -1.0), ("XY2", 0.25)):
        out.append(_check("A8", f"degenerate Taylor coefficient {key}", abs(fit[key] / want - 1.0), 5e-2,
                          f"fit={fit[key]:.6f}"))
    return out


# -- residuals -------------------------------------------------------------------

def check_volume_and_identities(seed: int = 7) -> list[CheckResult]:
    out = [_check("A4", "det D Phi = 1", volume_residual(pg.phi_map).max_abs, 1e-6),
           _check("A4", "det D Phi' = 1", volume_residual(pd.phi_prime_map).max_abs, 1e-6)]
    rng = np.random.default_rng(seed)
    ab = rng.uniform(-2.0, 2.0, size=(20, 2))
    tg = max(abs(transport_residual(GENERIC_MAP, 1.5, -0.25, a, b)) for a, b in ab)
    td = max(abs(transport_residual(DEGENERATE_MAP, 1.5, -0.5, a, b)) for a, b in ab)
    out.append(_check("A4", "transport residual, generic", tg, 1e-12))
    out.append(_check("A4", "transport residual, degenerate", td, 1e-12))
    worst = 0.0
    for X, th in zip(rng.uniform(-2.0, 2.0, 20), rng.uniform(0.0, 2.0, 20)):
        X = max(X, -th - pg.PS2 * th**3 + 0.1)
        worst = max(worst, abs(crocco_residual(float(X), float(th))))
    out.append(_check("A4", "Crocco residual", worst, 1e-12))
    return out


def stationary_points(profile, n_x: int = 5, n_y: int = 5) -> list[tuple[float, float]]:
    fracs = np.linspace(0.15, 0.85, n_y)
    # stay off the symmetry line, where the level-set parametrisation turns
    fracs = np.where(np.abs(fracs - 0.5) < 1e-9, 0.45, fracs)
    return interior_grid(profile, np.linspace(-1.0, 1.0, n_x), fracs)


def check_stationary() -> list[CheckResult]:
    out = []
    for tag, prof in (("generic", pg.GenericProfile()), ("degenerate", pd.DegenerateProfile())):
        pts = stationary_points(prof)
        worst = max(abs(stationary_residual(prof, prof.alpha, prof.beta, X, Y)) for X, Y in pts)
        out.append(_check("A10", f"stationary residual, {tag} ({len(pts)} points)", worst, 1e-6))
    return out


# -- dynamics --------------------------------------------------------------------

def check_self_similar_evolution(n: int = 21) -> list[CheckResult]:
    """u0 = Theta, zero pressure: reconstructed u(1/2) vs the exact rescaling."""
    t = 0.5
    chart = ProfileChart()
    worst = 0.0
    for Xr in np.linspace(-0.5, 0.5, n):
        x = float(Xr) * 2.0**-1.5
        ys = [float(Yr) * 2.0**0.25 for Yr in np.linspace(0.2, 1.4, n)]
        for y, u in zip(ys, sample_u(t, x, ys, chart)):
            worst = max(worst, abs(u - self_similar_reference(t, x, y)))
    return [_check("A5", f"exact self-similar evolution ({n}x{n})", worst, 5e-3)]


CONCAVE_SCENARIO = """\
# tangential growth under a concave pressure: global in time
name = "concave_growth"
u0 = "tanh(X)*(1+0.5*exp(-(Y-1)^2))"
uE = "x"
pEx = "-x"
window = "-3 3 0 3"
grid_n = 31
t_max = 50
"""

PERTURBED_GAUSSIAN_U0 = "-sin(X)*exp(-(Y-1)^2/2)+0.05*Y*exp(-(X^2+(Y-1)^2)/2)"


def _analyze_text(text: str):
    s = parse_scenario(text)
    flow, datum = OuterFlow.from_scenario(s), InitialDatum.from_scenario(s)
    return flow, datum, analyze(flow, datum, s.window, s.grid_n, s.t_max)


def check_blowup_time() -> list[CheckResult]:
    _, _, rep = _analyze_text(GAUSSIAN_LINE_SCENARIO)
    out = [_check("A6", "Gaussian line T = 1", abs(rep.T - 1.0), 1e-6),
           _check("A6", "Gaussian line T_b = e^(1/2)", abs(rep.T_b - math.exp(0.5)), 1e-4)]
    _, _, rep = _analyze_text(CONCAVE_SCENARIO)
    out.append(_check("A6", "concave pressure: T reported as >= t_max", 0.0, 0.0,
                      f"T={rep.time_label(rep.T)}", passed=not rep.finite))
    return out


def convergence_trend(taus=(0.1, 0.05, 0.025), window_frac=(-0.5, 0.5, 0.7, 1.5)) -> dict:
    """Renormalised sup-errors and displacement-line deviations at T - tau for
    the perturbed Gaussian line.  The window is (X0, X1, f0 nu, f1 nu)."""
    flow = OuterFlow()
    datum = InitialDatum.from_expression(PERTURBED_GAUSSIAN_U0)
    rep = analyze(flow, datum, (-3.0, 3.0, 0.0, 3.0), 61, 10.0)
    if rep.scaling is None:
        raise RuntimeError("perturbed datum failed the genericity check")
    lmap = CharacteristicMap(flow, datum)
    X0, X1, f0, f1 = window_frac
    window = (X0, X1, f0 * rep.nu, f1 * rep.nu)
    errs, devs = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for tau in taus:
            t = rep.T - tau
            errs.append(renormalized_error(t, lmap, rep, window, 5, 5).sup_error)
            devs.append(abs(displacement_ratio(t, lmap, rep) - 1.0))
    return {"report": rep, "taus": list(taus), "window": window, "errors": errs, "deviations": devs}


def _strictly_decreasing(v) -> bool:
    return all(b < a for a, b in zip(v, v[1:]))


def check_convergence() -> list[CheckResult]:
    tr = convergence_trend()
    e, d = tr["errors"], tr["deviations"]
    return [
        _check("A9", "renormalised sup-error strictly decreasing", e[-1], e[0],
               "errors=" + ",".join(f"{v:.4g}" for v in e), passed=_strictly_decreasing(e)),
        _check("A9", "|y* ratio - 1| strictly decreasing", d[-1], d[0],
               "deviations=" + ",".join(f"{v:.4g}" for v in d), passed=_strictly_decreasing(d)),
    ]


CHECKS: dict[str, list[Callable[[], list[CheckResult]]]] = {
    "constants": [check_support_curve, check_psi1, check_far_field],
    "profiles": [check_degenerate_axis, check_taylor],
    "residuals": [check_volume_and_identities, check_stationary],
    "dynamics": [check_self_similar_evolution, check_blowup_time, check_convergence],
}


def run_suite(name: str) -> list[CheckResult]:
    names = SUITES if name == "all" else (name,)
    if any(n not in CHECKS for n in names):
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES + ('all',)}")
    results = []
    for n in names:
        for fn in CHECKS[n]:
            t0 = time.perf_counter()
            batch = fn()
            dt = (time.perf_counter() - t0) / max(len(batch), 1)
            for r in batch:
                r.seconds = dt
            results.extend(batch)
    return results
