"""Eulerian reconstruction by tracing level curves of the characteristics map.

At a fixed time t < T the Lagrangian half plane is foliated by the curves
{x(t, ., .) = c}.  Walking such a curve from the wall, the Eulerian normal
coordinate is the line integral

    y = int ds / |grad x| = int (grad-perp x . dp) / |grad x|^2,

valid in any Lagrangian chart with unit Jacobian.  Along the curve u is
transported, so u(t, c, y) is read off the characteristic state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .kernels import (BracketError, OdeSpec, QuadSpec, expand_bracket, find_root,
                      integrate, newton_bracketed)
from .lagrangian import BlowupReport, InitialDatum, OuterFlow, ScalingParameters, monodromy
from . import profile_generic as pg

PS2 = pg.PS2


class DegeneracyError(RuntimeError):
    """|grad x| fell below the threshold while tracing (time too close to T)."""

    def __init__(self, message: str, t: float, x_value: float, partial: "LevelCurve | None" = None):
        self.t = t
        self.x_value = x_value
        self.partial = partial
        super().__init__(f"{message} (t={t}, x={x_value})")


class SeedError(RuntimeError):
    """No unique wall point with x(t, X, 0) = x_value."""


class TruncationError(RuntimeError):
    def __init__(self, message: str, served: list):
        self.served = served
        super().__init__(message)


# --------------------------------------------------------------------------
# Lagrangian maps


class LagrangianMap(Protocol):
    def evaluate(self, t: float, p: np.ndarray) -> tuple[float, np.ndarray, float]:
        """(x, grad x, u) at Lagrangian point p."""

    def boundary_seed(self, t: float, x_value: float) -> tuple[np.ndarray, float]:
        """Starting point of the level curve and the normal coordinate there."""


@dataclass(frozen=True)
class CharacteristicMap:
    """The characteristics map in the original (X, Y) coordinates."""

    flow: OuterFlow
    datum: InitialDatum
    spec: OdeSpec = OdeSpec(rel_tol=1e-12, abs_tol=1e-13)

    def evaluate(self, t: float, p: np.ndarray) -> tuple[float, np.ndarray, float]:
        X, Y = float(p[0]), float(p[1])
        if self.flow.pressureless:
            d = self.datum
            u0 = d.u(X, Y)
            return X + t * u0, np.array([1.0 + t * d.uX(X, Y), t * d.uY(X, Y)]), u0
        g = monodromy(X, Y, self.flow, self.datum, t, self.spec).gradients(t)
        return g["x"], np.array([g["x_X"], g["x_Y"]]), g["u"]

    def x_on_wall(self, t: float, X: float) -> float:
        return self.evaluate(t, np.array([X, 0.0]))[0]

    def boundary_seed(self, t: float, x_value: float) -> tuple[np.ndarray, float]:
        f = lambda X: self.x_on_wall(t, X) - x_value
        try:
            lo, hi, flo, fhi = expand_bracket(f, x_value - 0.5, x_value + 0.5, max_iter=60)
        except BracketError as exc:
            raise SeedError(f"no wall point with x = {x_value} at t = {t}") from exc
        X = find_root(f, lo, hi, tol=1e-15, flo=flo, fhi=fhi)
        if self.evaluate(t, np.array([X, 0.0]))[1][0] <= 0.0:
            raise SeedError(f"wall map not increasing at X = {X} (t >= T_b?)")
        return np.array([X, 0.0]), 0.0


@dataclass(frozen=True)
class ProfileChart:
    """Pressureless evolution of u0 = Theta written in the profile's own
    (a, b) chart: X = Phi_1(a, b), u0 = -a, hence x(t) = Phi_1(a, b) - t a.

    The chart has unit Jacobian onto (X, Y) and the wall Y = 0 sits at
    b = -inf; the curve is started at b = -b_start with the remaining
    piece of the normal coordinate computed in graph form.
    """

    b_start: float = 6.0
    tail_spec: QuadSpec = QuadSpec(abs_tol=1e-13, rel_tol=1e-12, tail_decay_exponent=4.0 / 3.0)

    def evaluate(self, t: float, p: np.ndarray) -> tuple[float, np.ndarray, float]:
        a, b = float(p[0]), float(p[1])
        x = a + b * b + PS2 * a**3 - t * a
        return x, np.array([1.0 - t + 3.0 * PS2 * a * a, 2.0 * b]), -a

    def a_on_curve(self, t: float, x_value: float, b: float) -> float:
        # a + p^2 a^3 - t a = x_value - b^2, monotone in a for t < 1
        rhs = x_value - b * b
        f = lambda a: (1.0 - t) * a + PS2 * a**3 - rhs
        r = abs(rhs) + 1.0
        return find_root(f, -r, r, tol=1e-15)

    def boundary_seed(self, t: float, x_value: float) -> tuple[np.ndarray, float]:
        if not t < 1.0:
            raise SeedError("the profile chart is only regular for t < 1")
        b0 = -self.b_start

        y0 = self._tail(t, x_value, b0)
        return np.array([self.a_on_curve(t, x_value, b0), b0]), y0

    def _tail(self, t: float, x_value: float, b: float) -> float:
        def g(bs):
            out = np.empty(np.shape(bs))
            for i, bb in enumerate(np.atleast_1d(bs)):
                a = self.a_on_curve(t, x_value, float(bb))
                out[i] = 1.0 / (1.0 - t + 3.0 * PS2 * a * a)
            return out
        return integrate(g, -math.inf, b, self.tail_spec)

    def tail_u(self, t: float, x_value: float, y: float) -> float:
        """u at normal coordinate y below the start point (graph form in b)."""
        def fdf(b):
            a = self.a_on_curve(t, x_value, b)
            return self._tail(t, x_value, b) - y, 1.0 / (1.0 - t + 3.0 * PS2 * a * a)
        lo = -self.b_start
        while fdf(lo)[0] > 0.0:
            lo *= 4.0
        b = newton_bracketed(fdf, lo, -self.b_start, tol=1e-14)
        return -self.a_on_curve(t, x_value, b)


# --------------------------------------------------------------------------
# level curves


@dataclass(frozen=True)
class LevelCurve:
    t: float
    x_value: float
    points: np.ndarray       # (n, 2) Lagrangian points
    s: np.ndarray            # arclength
    y: np.ndarray            # normal coordinate
    grad_norm: np.ndarray
    u: np.ndarray
    entered_from_boundary: bool = True
    stopped_by: str = "budget"

    @property
    def samples(self) -> list[tuple[float, float, float, float, float]]:
        return [(float(p[0]), float(p[1]), float(s), float(g), float(u))
                for p, s, g, u in zip(self.points, self.s, self.grad_norm, self.u)]

    def __len__(self) -> int:
        return len(self.s)


@dataclass(frozen=True)
class TraceSpec:
    h0: float = 0.02
    h_max: float = 0.1
    h_min: float = 1e-9
    angle_tol: float = 0.02
    ratio_tol: float = 0.05
    y_tol: float = 1e-10
    curve_tol: float = 1e-13
    grad_min: float = 1e-9
    max_steps: int = 200000


class _Curve:
    """Newton projection and evaluation helpers for one level set."""

    def __init__(self, lmap: LagrangianMap, t: float, c: float, tol: float):
        self.lmap, self.t, self.c, self.tol = lmap, t, c, tol

    def eval(self, p):
        return self.lmap.evaluate(self.t, p)

    def project(self, p: np.ndarray, iters: int = 8):
        """Newton along the gradient back onto {x = c}; returns (p, x, grad, u, ok)."""
        scale = max(1.0, abs(self.c))
        for _ in range(iters):
            x, g, u = self.eval(p)
            r = x - self.c
            if abs(r) <= self.tol * scale:
                return p, x, g, u, True
            gg = float(g @ g)
            if gg == 0.0:
                break
            p = p - r * g / gg
        x, g, u = self.eval(p)
        return p, x, g, u, abs(x - self.c) <= 1e3 * self.tol * scale

    @staticmethod
    def weight(g: np.ndarray) -> np.ndarray:
        return np.array([-g[1], g[0]]) / float(g @ g)

    def segment(self, p0, g0, p1, g1):
        """(dy, ds) over one step: cubic through p0, two projected interior
        points and p1, integrated with the 3/8 rule."""
        q1, _, w1g, _, _ = self.project(p0 + (p1 - p0) / 3.0)
        q2, _, w2g, _, _ = self.project(p0 + 2.0 * (p1 - p0) / 3.0)
        P = np.array([p0, q1, q2, p1])
        dP = _CUBIC_D @ P
        W = np.array([self.weight(g0), self.weight(w1g), self.weight(w2g), self.weight(g1)])
        dy = float(_W38 @ np.einsum("ij,ij->i", W, dP))
        ds = float(_W38 @ np.hypot(dP[:, 0], dP[:, 1]))
        return dy, ds


# derivative of the cubic through nodes 0, 1/3, 2/3, 1 at the nodes, and 3/8-rule weights
_CUBIC_D = 3.0 * np.array([[-11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0],
                           [-1.0 / 3.0, -0.5, 1.0, -1.0 / 6.0],
                           [1.0 / 6.0, -1.0, 0.5, 1.0 / 3.0],
                           [-1.0 / 3.0, 1.5, -3.0, 11.0 / 6.0]])
_W38 = np.array([1.0, 3.0, 3.0, 1.0]) / 8.0


def trace_level_curve(t: float, x_value: float, lmap: LagrangianMap, y_budget: float,
                      spec: TraceSpec = TraceSpec(),
                      stop: Callable[[np.ndarray], float] | None = None) -> LevelCurve:
    """March along grad-perp x / |grad x| from the wall seed with Newton
    correction, until y exceeds ``y_budget`` or ``stop(p)`` turns >= 0."""
    seed, y0 = lmap.boundary_seed(t, x_value)
    cv = _Curve(lmap, t, x_value, spec.curve_tol)
    p, _, g, u, _ = cv.project(seed)
    pts, ss, ys, gn, us = [p], [0.0], [y0], [math.hypot(*g)], [u]
    h = spec.h0
    y, s = y0, 0.0
    stopped = "budget"

    def tangent(g):
        return np.array([-g[1], g[0]]) / math.hypot(*g)

    def partial():
        return LevelCurve(t, x_value, np.array(pts), np.array(ss), np.array(ys),
                          np.array(gn), np.array(us), True, "degenerate")

    for _ in range(spec.max_steps):
        if y >= y_budget:
            break
        if stop is not None and stop(p) >= 0.0:
            stopped = "stop"
            break
        gnorm = math.hypot(*g)
        if gnorm < spec.grad_min:
            raise DegeneracyError("|grad x| below threshold", t, x_value, partial())
        tau = tangent(g)
        while True:
            if h < spec.h_min:
                raise DegeneracyError("step size underflow while tracing", t, x_value, partial())
            _, gh, _ = cv.eval(p + 0.5 * h * tau)
            nh = math.hypot(*gh)
            # a symmetric dip in |grad x| is invisible at the endpoints
            if nh == 0.0 or abs(gnorm / nh - 1.0) >= spec.ratio_tol:
                h *= 0.5
                continue
            p1, _, g1, u1, ok = cv.project(p + h * tangent(gh))
            n1 = math.hypot(*g1)
            if ok and n1 > 0.0:
                cosang = float(tau @ tangent(g1))
                ratio = gnorm / n1
                if cosang > math.cos(spec.angle_tol) and abs(ratio - 1.0) < spec.ratio_tol \
                        and float((p1 - p) @ tau) > 0.0:
                    dy, ds = cv.segment(p, g, p1, g1)
                    # step doubling on the y increment
                    pm, _, gm, _, _ = cv.project(0.5 * (p + p1))
                    dya, dsa = cv.segment(p, g, pm, gm)
                    dyb, dsb = cv.segment(pm, gm, p1, g1)
                    if abs(dya + dyb - dy) <= spec.y_tol * max(1.0, abs(y)) \
                            or h < 64.0 * spec.h_min:
                        dy, ds = dya + dyb, dsa + dsb
                        break
            h *= 0.5
        p, g, u = p1, g1, u1
        y += dy
        s += ds
        pts.append(p)
        ss.append(s)
        ys.append(y)
        gn.append(math.hypot(*g))
        us.append(u)
        h = min(1.5 * h, spec.h_max)
    else:
        raise DegeneracyError("maximum number of steps reached", t, x_value, partial())
    return LevelCurve(t, x_value, np.array(pts), np.array(ss), np.array(ys), np.array(gn),
                      np.array(us), True, stopped)


def normal_coordinate(curve: LevelCurve, upto_index: int) -> float:
    """Accumulated int ds / |grad x| from the wall to the given sample."""
    return float(curve.y[upto_index])


def _locate(cv: _Curve, curve: LevelCurve, k: int, target: float,
            value: Callable[[np.ndarray, float], float]) -> tuple[np.ndarray, float, float]:
    """Point on segment k of the curve where value(p, y) crosses ``target``.

    Starts from linear interpolation in s and refines with secant steps
    using the exact partial line integral from sample k.
    """
    p0, p1 = curve.points[k], curve.points[k + 1]
    _, g0, _ = cv.eval(p0)
    v0 = value(p0, curve.y[k])
    v1 = value(p1, curve.y[k + 1])
    if v1 == v0:
        return p0, curve.y[k], float(curve.u[k])

    def at(f: float):
        q, _, gq, uq, _ = cv.project(p0 + f * (p1 - p0))
        dy, _ = cv.segment(p0, g0, q, gq) if f > 0 else (0.0, 0.0)
        yq = curve.y[k] + dy
        return q, yq, uq, value(q, yq) - target

    fa, fb = 0.0, 1.0
    ra, rb = v0 - target, v1 - target
    f = (target - v0) / (v1 - v0)
    q, yq, uq, r = at(f)
    for _ in range(6):
        if abs(r) < 1e-13 * max(1.0, abs(target)):
            break
        if (r > 0) == (rb > 0):
            fb, rb = f, r
        else:
            fa, ra = f, r
        f = fa - ra * (fb - fa) / (rb - ra) if rb != ra else 0.5 * (fa + fb)
        q, yq, uq, r = at(f)
    return q, yq, uq


def sample_u(t: float, x_value: float, y_targets: Sequence[float], lmap: LagrangianMap,
             spec: TraceSpec = TraceSpec()) -> list[float]:
    """u(t, x_value, y) at ascending y targets by walking the level curve."""
    ys = np.asarray(y_targets, dtype=float)
    if len(ys) == 0:
        return []
    if np.any(np.diff(ys) < 0):
        raise ValueError("y_targets must be sorted ascending")
    curve = trace_level_curve(t, x_value, lmap, float(ys[-1]) * (1.0 + 1e-12) + 1e-12, spec)
    return values_on_curve(curve, ys, lmap, spec)


def values_on_curve(curve: LevelCurve, ys: np.ndarray, lmap: LagrangianMap,
                    spec: TraceSpec = TraceSpec()) -> list[float]:
    cv = _Curve(lmap, curve.t, curve.x_value, spec.curve_tol)
    out = []
    for target in ys:
        if target < curve.y[0] and hasattr(lmap, "tail_u"):
            out.append(float(lmap.tail_u(curve.t, curve.x_value, float(target))))
            continue
        if target < curve.y[0]:
            raise TruncationError(f"y = {target} lies below the first traced point", out)
        if target > curve.y[-1]:
            raise TruncationError(f"y budget exhausted before y = {target}", out)
        k = int(np.searchsorted(curve.y, target, side="right")) - 1
        k = min(max(k, 0), len(curve.y) - 2)
        if target == curve.y[k]:
            out.append(float(curve.u[k]))
            continue
        _, _, u = _locate(cv, curve, k, target, lambda p, y: y)
        out.append(float(u))
    return out


def eulerian_position(t: float, X: float, Y: float, lmap: LagrangianMap,
                      spec: TraceSpec = TraceSpec()) -> tuple[float, float]:
    """(x, y) image of the Lagrangian point (X, Y) at time t."""
    P = np.array([X, Y], dtype=float)
    x_value, gP, _ = lmap.evaluate(t, P)
    tauP = np.array([-gP[1], gP[0]]) / math.hypot(*gP)
    along = lambda p: float((p - P) @ tauP)
    curve = trace_level_curve(t, x_value, lmap, math.inf, spec, stop=along)
    cv = _Curve(lmap, t, x_value, spec.curve_tol)
    k = len(curve.y) - 2
    if k < 0:
        return x_value, float(curve.y[0])
    _, y, _ = _locate(cv, curve, k, 0.0, lambda p, yy: along(p))
    return x_value, float(y)


def graph_form_normal_coordinate(t: float, x_value: float, lmap: LagrangianMap,
                                 q0: float, q1: float, p_bracket: tuple[float, float],
                                 spec: QuadSpec = QuadSpec(abs_tol=1e-13, rel_tol=1e-12)) -> float:
    """int_{q0}^{q1} dq / d_p x along {x = x_value}, the curve written as a
    graph p(q) (valid where d_p x does not vanish)."""
    lo, hi = p_bracket

    def pq(q: float) -> float:
        f = lambda pp: lmap.evaluate(t, np.array([pp, q]))[0] - x_value
        return find_root(f, lo, hi, tol=1e-15)

    def g(qs):
        out = np.empty(np.shape(qs))
        for i, q in enumerate(np.atleast_1d(qs)):
            q = float(q)
            _, grad, _ = lmap.evaluate(t, np.array([pq(q), q]))
            out[i] = 1.0 / grad[0]
        return out
    return integrate(g, q0, q1, spec)


# --------------------------------------------------------------------------
# displacement line, renormalised error, snapshots


def _exit_function(report: BlowupReport, delta: float) -> Callable[[np.ndarray], float]:
    sp = report.scaling
    cX, cY = sp.exit_normal
    X0, Y0 = report.X0, report.Y0
    return lambda p: cX * (p[0] - X0) + cY * (p[1] - Y0) - delta


def displacement_line(t: float, x_value: float, lmap: LagrangianMap, report: BlowupReport,
                      delta: float = 0.3, spec: TraceSpec = TraceSpec()) -> float:
    """Normal coordinate of the exit point where the level curve crosses the
    Lagrangian line b = delta (t-renormalised), i.e.
    c_X (X - X0) + c_Y (Y - Y0) = delta."""
    if report.scaling is None:
        raise ValueError("displacement line needs a generic report with scaling parameters")
    if not t < report.T:
        raise ValueError("t must be below the blow-up time")
    ell = _exit_function(report, delta)
    curve = trace_level_curve(t, x_value, lmap, math.inf, spec, stop=ell)
    if len(curve.y) < 2:
        return float(curve.y[0])
    cv = _Curve(lmap, t, x_value, spec.curve_tol)
    _, y, _ = _locate(cv, curve, len(curve.y) - 2, 0.0, lambda p, yy: ell(p))
    return float(y)


def displacement_ratio(t: float, lmap: LagrangianMap, report: BlowupReport,
                       delta: float = 0.3, spec: TraceSpec = TraceSpec()) -> float:
    """y*(t, x*(t)) (T - t)^(1/4) / (2 nu Y*(0)); tends to 1 as t -> T."""
    sp = report.scaling
    tau = report.T - t
    ys = displacement_line(t, sp.x_star(t), lmap, report, delta, spec)
    return ys * tau**0.25 / (2.0 * pg.y_star_rescaled(0.0, sp.mu, sp.nu, sp.iota))


@dataclass(frozen=True)
class RenormalizedError:
    t: float
    sup_error: float
    points: list = field(repr=False)
    clipped: int = 0


def renormalized_error(t: float, lmap: LagrangianMap, report: BlowupReport,
                       window: tuple[float, float, float, float], nx: int = 9, ny: int = 9,
                       spec: TraceSpec = TraceSpec(), mu: float | None = None,
                       nu: float | None = None) -> RenormalizedError:
    """sup over the (X, Y) window of |(u - u*(t)) / (T - t)^(1/2) - Theta_{mu,nu,iota}|,
    with x = x*(t) + (T - t)^(3/2) X and y = Y / (T - t)^(1/4)."""
    sp = report.scaling
    if sp is None:
        raise ValueError("renormalised error needs a generic report with scaling parameters")
    if not t < report.T:
        raise ValueError("t must be below the blow-up time")
    mu = sp.mu if mu is None else mu
    nu = sp.nu if nu is None else nu
    iota = sp.iota
    tau = report.T - t
    xs_, us_ = sp.x_star(t), sp.u_star(t)
    X0w, X1w, Y0w, Y1w = window
    Xs = np.linspace(X0w, X1w, nx)
    Ys = np.linspace(Y0w, Y1w, ny)
    pts, clipped, worst = [], 0, 0.0
    for Xr in Xs:
        top = pg.y_star_rescaled(Xr, mu, nu, iota) * 2.0
        inside = [Yr for Yr in Ys if 0.0 < Yr < top]
        clipped += len(Ys) - len(inside)
        if not inside:
            continue
        us = sample_u(t, xs_ + tau**1.5 * Xr, [Yr / tau**0.25 for Yr in inside], lmap, spec)
        for Yr, u in zip(inside, us):
            th = mu * iota * pg.theta(iota * Xr / mu, Yr / nu)
            e = (u - us_) / math.sqrt(tau) - th
            pts.append((float(Xr), float(Yr), float(e)))
            worst = max(worst, abs(e))
    if clipped:
        warnings.warn(f"{clipped} window points outside the profile support were skipped")
    return RenormalizedError(t, worst, pts, clipped)


@dataclass(frozen=True)
class Snapshot:
    t: float
    x_grid: list
    y_grid: list
    u: np.ndarray
    y_star: list
    x_star: float
    params: tuple


def snapshot(t: float, x_grid: Sequence[float], y_grid: Sequence[float], lmap: LagrangianMap,
             report: BlowupReport | None = None, delta: float = 0.3,
             spec: TraceSpec = TraceSpec()) -> Snapshot:
    """Sample u on a tensor grid; y* per x when scaling parameters exist."""
    ys = sorted(float(v) for v in y_grid)
    U = np.empty((len(x_grid), len(ys)))
    ystar = []
    have_scaling = report is not None and report.scaling is not None
    for i, x in enumerate(x_grid):
        U[i] = sample_u(t, float(x), ys, lmap, spec) if ys else []
        ystar.append(displacement_line(t, float(x), lmap, report, delta, spec)
                     if have_scaling else math.nan)
    xs = report.scaling.x_star(t) if have_scaling else math.nan
    params = (report.mu, report.nu, report.iota) if have_scaling else (math.nan, math.nan, 0)
    return Snapshot(t, [float(v) for v in x_grid], ys, U, ystar, xs, params)


def self_similar_reference(t: float, x: float, y: float) -> float:
    """(1 - t)^(1/2) Theta(x / (1 - t)^(3/2), y (1 - t)^(1/4)); exact evolution of u0 = Theta."""
    tau = 1.0 - t
    return math.sqrt(tau) * pg.theta(x / tau**1.5, y * tau**0.25)
