"""Characteristics, monodromy, blow-up time and genericity diagnostics.

Tangential characteristics solve x' = u, u' = -pEx(t, x) from
(X, u0(X, Y)).  Their linearisation M' = A M with
A = [[0, 1], [-d_x pEx, 0]] gives

    (x_X, u_X) = M (1, u0_X),   (x_Y, u_Y) = M (0, u0_Y),

so blow-up at a Lagrangian point is the first zero of x_X, found by event
detection on a linear system.  With no pressure everything is explicit:
x = X + t u0 and M = [[1, t], [0, 1]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .kernels import (BracketError, OdeSpec, Trajectory, find_root, golden_min,
                      integrate_ode, p_star)
from .scenario import Scenario, ScalarField2D

PS = p_star()
STENCIL_ODE = OdeSpec(rel_tol=1e-13, abs_tol=1e-14, max_step=0.05)


class GeometryError(ValueError):
    """Finite-difference stencil does not fit in the admissible region."""


class InconsistencyError(ValueError):
    """Measured derivatives violate an identity that must hold at the singular point."""


@dataclass(frozen=True)
class OuterFlow:
    """Outer Euler data uE(t, x) and pEx(t, x); pEx absent means no pressure."""

    uE: ScalarField2D | None = None
    pEx: ScalarField2D | None = None
    t_valid: float = math.inf

    @property
    def pressureless(self) -> bool:
        return self.pEx is None or self.pEx.is_zero

    def force(self, t: float, x):
        return 0.0 if self.pEx is None else self.pEx(t, x)

    def force_x(self, t: float, x):
        return 0.0 if self.pEx is None else self.pEx.partial(0, 1)(t, x)

    @classmethod
    def from_scenario(cls, s: Scenario) -> "OuterFlow":
        return cls(s.uE, s.pEx)


@dataclass(frozen=True)
class InitialDatum:
    u0: ScalarField2D

    def u(self, X, Y):
        return self.u0(X, Y)

    def uX(self, X, Y):
        return self.u0.partial(1, 0)(X, Y)

    def uY(self, X, Y):
        return self.u0.partial(0, 1)(X, Y)

    def d(self, i: int, j: int) -> ScalarField2D:
        return self.u0.partial(i, j)

    def vorticity_bound(self, window, n: int = 41) -> float:
        x0, x1, y0, y1 = window
        XX, YY = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
        return float(np.max(np.abs(self.uY(XX, YY))))

    @classmethod
    def from_scenario(cls, s: Scenario) -> "InitialDatum":
        return cls(s.u0)

    @classmethod
    def from_expression(cls, src: str) -> "InitialDatum":
        return cls(ScalarField2D(src, ("X", "Y")))


def _check_horizon(flow: OuterFlow, t1: float) -> None:
    if not 0.0 <= t1 <= flow.t_valid:
        raise ValueError(f"t1={t1} outside the flow validity window [0, {flow.t_valid}]")


# --------------------------------------------------------------------------
# characteristics and monodromy


@dataclass(frozen=True)
class CharTrajectory:
    X: float
    Y: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    _dense: Callable[[float], tuple[float, float]] = field(repr=False, compare=False)

    def at(self, t: float) -> tuple[float, float]:
        return self._dense(t)


def advance_char(X: float, Y: float, flow: OuterFlow, datum: InitialDatum, t1: float,
                 spec: OdeSpec = OdeSpec()) -> CharTrajectory:
    """Solve x' = u, u' = -pEx(t, x) from (X, u0(X, Y)) on [0, t1]."""
    _check_horizon(flow, t1)
    u0 = datum.u(X, Y)
    if flow.pressureless:
        ts = np.linspace(0.0, t1, 33)
        return CharTrajectory(X, Y, ts, X + ts * u0, np.full_like(ts, u0),
                              lambda t: (X + t * u0, u0))

    def rhs(t, s):
        return np.array([s[1], -flow.force(t, s[0])])
    tr = integrate_ode(rhs, [X, u0], 0.0, t1, spec)
    return CharTrajectory(X, Y, tr.t, tr.y[:, 0], tr.y[:, 1],
                          lambda t: tuple(float(v) for v in tr(t)))


@dataclass(frozen=True)
class Monodromy:
    t: float
    M: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.M))


@dataclass(frozen=True)
class MonodromyTrajectory:
    """Characteristic through (X, Y) with its monodromy matrix."""

    X: float
    Y: float
    u0X: float
    u0Y: float
    times: np.ndarray
    _state: Callable[[float], np.ndarray] = field(repr=False, compare=False)
    t_event: float | None = None

    def state(self, t: float) -> np.ndarray:
        """(x, u, M11, M12, M21, M22) at time t."""
        return self._state(t)

    def at(self, t: float) -> Monodromy:
        s = self._state(t)
        return Monodromy(t, s[2:].reshape(2, 2))

    def gradients(self, t: float) -> dict:
        x, u, m11, m12, m21, m22 = self._state(t)
        return {"x": x, "u": u,
                "x_X": m11 + m12 * self.u0X, "u_X": m21 + m22 * self.u0X,
                "x_Y": m12 * self.u0Y, "u_Y": m22 * self.u0Y}

    def det_error(self) -> float:
        return max(abs(self.at(float(t)).det - 1.0) for t in self.times)


def _monodromy_rhs(flow: OuterFlow):
    def rhs(t, s):
        fx = flow.force_x(t, s[0])
        return np.array([s[1], -flow.force(t, s[0]), s[4], s[5], -fx * s[2], -fx * s[3]])
    return rhs


def monodromy(X: float, Y: float, flow: OuterFlow, datum: InitialDatum, t1: float,
              spec: OdeSpec = OdeSpec(), stop_at_blowup: bool = False) -> MonodromyTrajectory:
    """Integrate the characteristic together with M' = A M, M(0) = Id.

    With ``stop_at_blowup`` the integration ends at the first zero of x_X.
    """
    _check_horizon(flow, t1)
    u0, u0X, u0Y = datum.u(X, Y), datum.uX(X, Y), datum.uY(X, Y)
    if flow.pressureless:
        t_ev = None
        if stop_at_blowup and u0X < 0 and -1.0 / u0X <= t1:
            t_ev = -1.0 / u0X
            t1 = t_ev

        def state(t):
            return np.array([X + t * u0, u0, 1.0, t, 0.0, 1.0])
        return MonodromyTrajectory(X, Y, u0X, u0Y, np.linspace(0.0, t1, 33), state, t_ev)
    event = (lambda t, s: s[2] + s[3] * u0X) if stop_at_blowup else None
    tr: Trajectory = integrate_ode(_monodromy_rhs(flow), [X, u0, 1.0, 0.0, 0.0, 1.0],
                                   0.0, t1, spec, event)
    return MonodromyTrajectory(X, Y, u0X, u0Y, tr.t, tr, tr.t_event)


def pointwise_T(X: float, Y: float, flow: OuterFlow, datum: InitialDatum, t_max: float,
                spec: OdeSpec = OdeSpec()) -> float:
    """First zero of x_X(t) on [0, t_max], or math.inf when there is none."""
    if not math.isfinite(t_max) or t_max <= 0:
        raise ValueError("t_max must be a finite positive horizon")
    if flow.pressureless:
        u0X = datum.uX(X, Y)
        return -1.0 / u0X if u0X < 0 and -1.0 / u0X <= t_max else math.inf
    m = monodromy(X, Y, flow, datum, min(t_max, flow.t_valid), spec, stop_at_blowup=True)
    return m.t_event if m.t_event is not None else math.inf


def _pointwise_T_many(pts: np.ndarray, flow: OuterFlow, datum: InitialDatum,
                      t_max: float, spec: OdeSpec) -> np.ndarray:
    if len(pts) == 0:
        return np.empty(0)
    if flow.pressureless:
        uX = np.atleast_1d(datum.uX(pts[:, 0], pts[:, 1]))
        with np.errstate(divide="ignore"):
            T = np.where(uX < 0, -1.0 / uX, math.inf)
        return np.where(T <= t_max, T, math.inf)
    return np.array([pointwise_T(float(p[0]), float(p[1]), flow, datum, t_max, spec) for p in pts])


# --------------------------------------------------------------------------
# zero-vorticity set and maximal time


def zero_vorticity_set(datum: InitialDatum, window: tuple, n: int,
                       tol: float = 1e-13) -> list[np.ndarray]:
    """Samples of {u0_Y = 0, Y > 0}: sign changes on grid edges refined by
    bisection, exact zeros at nodes kept, then linked into chains."""
    x0, x1, y0, y1 = window
    xs, ys = np.linspace(x0, x1, n), np.linspace(y0, y1, n)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    V = datum.uY(XX, YY)
    pts: list[tuple[float, float]] = []
    ii, jj = np.nonzero(V == 0.0)
    pts.extend((float(xs[i]), float(ys[j])) for i, j in zip(ii, jj))
    for i, j in zip(*np.nonzero(V[:-1, :] * V[1:, :] < 0)):
        y = float(ys[j])
        r = find_root(lambda X: datum.uY(X, y), xs[i], xs[i + 1], tol=tol,
                      flo=V[i, j], fhi=V[i + 1, j])
        pts.append((r, y))
    for i, j in zip(*np.nonzero(V[:, :-1] * V[:, 1:] < 0)):
        X = float(xs[i])
        r = find_root(lambda Y: datum.uY(X, Y), ys[j], ys[j + 1], tol=tol,
                      flo=V[i, j], fhi=V[i, j + 1])
        pts.append((X, r))
    pts = [p for p in pts if p[1] > 0.0]
    if not pts:
        return []
    P = np.unique(np.round(np.array(pts), 13), axis=0)
    spacing = max(xs[1] - xs[0], ys[1] - ys[0])
    return _link_chains(P, 2.0 * spacing)


def _link_chains(P: np.ndarray, link: float) -> list[np.ndarray]:
    """Greedy nearest-neighbour linking of points into ordered chains."""
    free = np.ones(len(P), dtype=bool)
    chains = []
    while free.any():
        start = int(np.argmax(free))
        free[start] = False
        chain = [start]
        for grow_front in (True, False):
            while True:
                tip = P[chain[-1] if grow_front else chain[0]]
                d = np.hypot(*(P - tip).T)
                d[~free] = math.inf
                k = int(np.argmin(d))
                if d[k] > link:
                    break
                free[k] = False
                if grow_front:
                    chain.append(k)
                else:
                    chain.insert(0, k)
        chains.append(P[chain])
    return chains


@dataclass(frozen=True)
class GenericityDiagnostics:
    generic: bool
    flags: dict
    values: dict
    reasons: tuple
    derivatives: dict
    scope: str


@dataclass(frozen=True)
class ScalingParameters:
    mu: float
    nu: float
    iota: int
    p0: float
    k: dict
    x_star: Callable[[float], float] = field(repr=False, compare=False)
    u_star: Callable[[float], float] = field(repr=False, compare=False)
    exit_normal: tuple = (0.0, 1.0)  # b = t^(-3/4) (c_X (X - X0) + c_Y (Y - Y0))


@dataclass(frozen=True)
class BlowupReport:
    T: float
    T_a: float
    T_b: float
    X0: float
    Y0: float
    t_max: float
    window: tuple
    n: int
    grad_xY: tuple = (math.nan, math.nan)
    uX_at_T: float = math.nan
    p0_sq: float = math.nan
    mu: float = math.nan
    nu: float = math.nan
    iota: int = 0
    genericity: GenericityDiagnostics | None = None
    scaling: ScalingParameters | None = None

    @property
    def generic(self) -> bool:
        return self.genericity is not None and self.genericity.generic

    @property
    def finite(self) -> bool:
        return math.isfinite(self.T)

    def time_label(self, value: float) -> float | str:
        return value if math.isfinite(value) else f">= {self.t_max:g}"

    def to_dict(self) -> dict:
        d = {"T": self.time_label(self.T), "T_a": self.time_label(self.T_a),
             "T_b": self.time_label(self.T_b), "X0": _num(self.X0), "Y0": _num(self.Y0),
             "t_max": self.t_max, "window": list(self.window), "n": self.n}
        if self.genericity is not None:
            g = self.genericity
            d["generic"] = g.generic
            d["genericity"] = {"flags": dict(g.flags),
                               "values": {k: _num(v) for k, v in g.values.items()},
                               "reasons": list(g.reasons), "scope": g.scope}
            d["grad_xY"] = [_num(v) for v in self.grad_xY]
            d["uX_at_T"] = _num(self.uX_at_T)
            d["p0_sq"] = _num(self.p0_sq)
        if self.scaling is not None:
            d.update(mu=self.mu, nu=self.nu, iota=self.iota)
        return d


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _polish_on_chain(chain: np.ndarray, k: int, Tk: float, flow, datum, t_max, spec,
                     window) -> tuple[float, float, float]:
    """Minimise T along the curve near sample k (polyline through the
    neighbours, re-projected onto u0_Y = 0 along the local normal)."""
    lo_pt = chain[max(k - 1, 0)]
    hi_pt = chain[min(k + 1, len(chain) - 1)]
    mid = chain[k]
    if np.all(lo_pt == mid) and np.all(hi_pt == mid):
        return Tk, float(mid[0]), float(mid[1])
    tangent = hi_pt - lo_pt
    scale = float(np.hypot(*tangent))
    normal = np.array([-tangent[1], tangent[0]]) / scale
    x0, x1, y0, y1 = window

    def point(s: float) -> np.ndarray:
        p = mid + s * (hi_pt - mid) if s >= 0 else mid + (-s) * (lo_pt - mid)
        f = lambda r: datum.uY(*(p + r * normal))
        f0 = f(0.0)
        if f0 != 0.0:
            rad = 0.5 * scale
            try:
                r = find_root(f, -rad, rad, tol=1e-14)
                p = p + r * normal
            except BracketError:
                pass
        return p

    def T_of(s: float) -> float:
        p = point(s)
        if not (x0 <= p[0] <= x1 and y0 < p[1] <= y1):
            return math.inf
        T = pointwise_T(float(p[0]), float(p[1]), flow, datum, t_max, spec)
        return T

    s, T = golden_min(T_of, -1.0, 1.0, tol=1e-12)
    if T < Tk:
        p = point(s)
        return T, float(p[0]), float(p[1])
    return Tk, float(mid[0]), float(mid[1])


def maximal_time(flow: OuterFlow, datum: InitialDatum, window: tuple, n: int,
                 t_max: float, spec: OdeSpec = OdeSpec()) -> BlowupReport:
    """T_a over the interior zero-vorticity set, T_b over {Y = 0}, T = min."""
    T_a, Xa, Ya = math.inf, math.nan, math.nan
    for chain in zero_vorticity_set(datum, window, n):
        Ts = _pointwise_T_many(chain, flow, datum, t_max, spec)
        k = int(np.argmin(Ts))
        if not math.isfinite(Ts[k]):
            continue
        T, X, Y = _polish_on_chain(chain, k, float(Ts[k]), flow, datum, t_max, spec, window)
        if T < T_a:
            T_a, Xa, Ya = T, X, Y

    x0, x1, _, _ = window
    xs = np.linspace(x0, x1, n)
    Tb_samples = _pointwise_T_many(np.column_stack([xs, np.zeros_like(xs)]), flow, datum,
                                   t_max, spec)
    T_b, Xb = math.inf, math.nan
    k = int(np.argmin(Tb_samples))
    if math.isfinite(Tb_samples[k]):
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]
        X, T = golden_min(lambda X: pointwise_T(X, 0.0, flow, datum, t_max, spec), lo, hi,
                          tol=1e-12)
        T_b, Xb = (T, X) if T <= Tb_samples[k] else (float(Tb_samples[k]), float(xs[k]))

    if T_a <= T_b:
        T, X0, Y0 = T_a, Xa, Ya
    else:
        T, X0, Y0 = T_b, Xb, 0.0
    return BlowupReport(T=T, T_a=T_a, T_b=T_b, X0=X0, Y0=Y0, t_max=t_max,
                        window=tuple(window), n=n)


# --------------------------------------------------------------------------
# derivatives at the singular point

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0       # offsets -2..2, / h
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0   # / h^2
_OFFS = np.arange(-2, 3)


def _gradients_at(flow, datum, T, X, Y, spec) -> np.ndarray:
    g = monodromy(X, Y, flow, datum, T, spec).gradients(T)
    return np.array([g["x_X"], g["x_Y"]])


def x_derivatives(flow: OuterFlow, datum: InitialDatum, T: float, X0: float, Y0: float,
                  h: float = 1e-3, spec: OdeSpec = STENCIL_ODE, method: str = "auto") -> dict:
    """Partials of x(T, ., .) at (X0, Y0) up to order 3 plus u_X.

    Keys are (i, j) for d^i_X d^j_Y.  ``method="fd"`` differentiates the
    monodromy gradients over a 5-point Lagrangian stencil in each direction;
    ``"auto"`` uses exact expressions when there is no pressure.
    """
    if method == "auto" and flow.pressureless:
        out = {(i, j): T * datum.d(i, j)(X0, Y0)
               for i in range(4) for j in range(4) if 1 <= i + j <= 3}
        out[(1, 0)] += 1.0
        out["u_X"] = datum.uX(X0, Y0)
        return out
    if Y0 - 2.0 * h <= 0.0:
        raise GeometryError(f"stencil of spacing {h} at Y0={Y0} crosses the boundary")
    gx = np.array([_gradients_at(flow, datum, T, X0 + k * h, Y0, spec) for k in _OFFS])
    gy = np.array([_gradients_at(flow, datum, T, X0, Y0 + k * h, spec) for k in _OFFS])
    centre = monodromy(X0, Y0, flow, datum, T, spec).gradients(T)
    dX1 = _D1 @ gx / h            # d_X (x_X, x_Y)
    dY1 = _D1 @ gy / h
    dX2 = _D2 @ gx / h**2
    dY2 = _D2 @ gy / h**2
    return {(1, 0): centre["x_X"], (0, 1): centre["x_Y"],
            (2, 0): dX1[0], (1, 1): 0.5 * (dY1[0] + dX1[1]), (0, 2): dY1[1],
            (3, 0): dX2[0], (2, 1): dX2[1], (1, 2): dY2[0], (0, 3): dY2[1],
            "u_X": centre["u_X"]}


def p0_squared(d: dict) -> float:
    """(grad-perp x_Y)^t (H x_X - lambda H x_Y) grad-perp x_Y with
    lambda = (grad x_Y . grad x_X) / |grad x_Y|^2."""
    gXY = np.array([d[(1, 1)], d[(0, 2)]])
    gXX = np.array([d[(2, 0)], d[(1, 1)]])
    v = np.array([-gXY[1], gXY[0]])
    H_X = np.array([[d[(3, 0)], d[(2, 1)]], [d[(2, 1)], d[(1, 2)]]])
    H_Y = np.array([[d[(2, 1)], d[(1, 2)]], [d[(1, 2)], d[(0, 3)]]])
    lam = float(gXY @ gXX) / float(gXY @ gXY)
    return float(v @ (H_X - lam * H_Y) @ v)


def p0_squared_collinear(d: dict) -> float:
    """Simplified form valid when grad x_X and grad x_Y are collinear."""
    xXX, xXY, xYY = d[(2, 0)], d[(1, 1)], d[(0, 2)]
    return xYY * (d[(3, 0)] * xYY - 3.0 * d[(2, 1)] * xXY + 3.0 * d[(1, 2)] * xXX
                  - xXY**3 / xYY**2 * d[(0, 3)])


def genericity_check(flow: OuterFlow, datum: InitialDatum, report: BlowupReport,
                     h: float = 1e-3, grad_tol: float = 1e-6, rel_tol: float = 1e-4,
                     spec: OdeSpec = OdeSpec(), method: str = "auto",
                     uniqueness_gap: float = 1e-6) -> GenericityDiagnostics:
    """Per-condition checks of the generic singularity at (T, X0, Y0)."""
    if not report.finite or not report.Y0 > 0.0:
        raise ValueError("genericity needs a finite T attained at an interior point")
    T, X0, Y0 = report.T, report.X0, report.Y0
    d = x_derivatives(flow, datum, T, X0, Y0, h, method=method)
    m = monodromy(X0, Y0, flow, datum, T, spec)
    ts = np.linspace(0.0, T, 21)
    grads = [m.gradients(float(t)) for t in ts]
    xY_max = max(abs(g["x_Y"]) for g in grads)
    uY_max = max(abs(g["u_Y"]) for g in grads)
    uX = grads[-1]["u_X"]

    xXX, xXY, xYY = d[(2, 0)], d[(1, 1)], d[(0, 2)]
    grad_xY = (xXY, xYY)
    gnorm = math.hypot(*grad_xY)
    hess_scale = max(xXX**2, xXY**2, xYY**2, 1e-300)
    ortho = (xXX * xYY - xXY**2) / hess_scale

    values = {"x_Y_max": xY_max, "u_Y_max": uY_max, "grad_xY_norm": gnorm,
              "orthogonality": ortho, "u_X": uX, "x_X": d[(1, 0)]}
    flags = {"x_Y_zero_along_time": xY_max <= 1e-9 * max(1.0, abs(X0)),
             "grad_xY_nonzero": gnorm > grad_tol,
             "u_X_negative": uX < 0.0,
             "u_Y_zero_along_time": uY_max <= 1e-9}
    reasons = []
    if not flags["grad_xY_nonzero"]:
        reasons.append("grad_xY below tolerance")
        p0sq = math.nan
        flags["orthogonality"] = False
        flags["p0_sq_positive"] = False
    else:
        flags["orthogonality"] = abs(ortho) <= 1e-2 if method == "fd" or not flow.pressureless \
            else abs(ortho) <= rel_tol
        p0sq = p0_squared(d)
        values["p0_sq_collinear"] = p0_squared_collinear(d) if xYY != 0 else math.nan
        flags["p0_sq_positive"] = p0sq > 0.0
    values["p0_sq"] = p0sq

    # uniqueness of the singular point, checked on the sampled window: the
    # smallest pointwise time away from (X0, Y0), polished along its chain,
    # must exceed T by a relative gap
    spacing = max((report.window[1] - report.window[0]), (report.window[3] - report.window[2])) / (report.n - 1)
    T_off = math.inf
    for chain in zero_vorticity_set(datum, report.window, report.n):
        far = np.hypot(chain[:, 0] - X0, chain[:, 1] - Y0) > 3.0 * spacing
        if not far.any():
            continue
        Ts = np.where(far, _pointwise_T_many(chain, flow, datum, report.t_max, spec), math.inf)
        k = int(np.argmin(Ts))
        if math.isfinite(Ts[k]):
            Tk, Xk, Yk = _polish_on_chain(chain, k, float(Ts[k]), flow, datum, report.t_max,
                                          spec, report.window)
            if math.hypot(Xk - X0, Yk - Y0) > 3.0 * spacing:
                T_off = min(T_off, Tk)
    gap = (T_off - T) / T
    flags["unique_singular_point"] = gap > uniqueness_gap and report.T_b > T * (1.0 + uniqueness_gap)
    values["T_gap_off_point"] = gap
    if not flags["unique_singular_point"]:
        reasons.append("second critical point or boundary blow-up not excluded on the window")
    for key in ("x_Y_zero_along_time", "u_X_negative", "u_Y_zero_along_time",
                "orthogonality", "p0_sq_positive"):
        if not flags[key] and not (key in ("orthogonality", "p0_sq_positive")
                                   and not flags["grad_xY_nonzero"]):
            reasons.append(f"{key} failed")
    scope = (f"verified on window {tuple(float(v) for v in report.window)} "
             f"at resolution {report.n}")
    flags = {k: bool(v) for k, v in flags.items()}
    return GenericityDiagnostics(all(flags.values()), flags, values, tuple(reasons), d, scope)


def _x_X_many(pts: np.ndarray, flow, datum, T, spec) -> np.ndarray:
    if flow.pressureless:
        return 1.0 + T * np.atleast_1d(datum.uX(pts[:, 0], pts[:, 1]))
    return np.array([monodromy(float(p[0]), float(p[1]), flow, datum, T, spec).gradients(T)["x_X"]
                     for p in pts])


def scaling_parameters(flow: OuterFlow, datum: InitialDatum, report: BlowupReport,
                       diagnostics: GenericityDiagnostics | None = None,
                       consistency_tol: float = 5e-2) -> ScalingParameters:
    """(mu, nu, iota), the exit-line normal and x*(t) from the derivatives at (T, X0, Y0).

    For x_XX < 0 the datum is reflected (X -> -X, u -> -u): derivatives
    with an even number of X derivatives change sign, u_X does not, and the
    profile is recorded with iota = -1.
    """
    diag = diagnostics or report.genericity or genericity_check(flow, datum, report)
    if not diag.generic:
        raise ValueError(f"singularity is not generic: {', '.join(diag.reasons)}")
    d = dict(diag.derivatives)
    uX = d["u_X"]
    iota = 1 if d[(2, 0)] > 0 else -1
    if iota < 0:
        d = {k: (-((-1) ** k[0]) * v if isinstance(k, tuple) else v) for k, v in d.items()}
    xXX, xXY, xYY = d[(2, 0)], d[(1, 1)], d[(0, 2)]
    scale = max(xXX**2, xXY**2, xYY**2)
    if abs(xXX * xYY - xXY**2) > consistency_tol * scale or xYY <= 0:
        raise InconsistencyError(
            f"x_XX x_YY - x_XY^2 = {xXX * xYY - xXY ** 2:.3e} is not small against {scale:.3e}")
    q = -math.copysign(1.0, xXY) * math.sqrt(xXX / xYY)
    p0sq = p0_squared(d)
    p0 = math.sqrt(p0sq)
    m = -uX
    kbar1 = xYY * math.sqrt(6.0) * math.sqrt(m) * PS / p0
    mu = m * kbar1
    nu = math.sqrt(2.0 * math.sqrt(6.0) * PS / (math.sqrt(m) * p0))
    k4 = math.sqrt(p0 / (2.0 * math.sqrt(6.0) * PS * m**1.5))
    k3 = q * k4
    k1 = p0 / (math.sqrt(m) * math.sqrt(6.0) * (xXX + xYY) * PS)
    # q carries the sign of -x_XY, so both row pairs stay mutually inverse
    k2 = q * k1
    kb = math.sqrt(2.0 * math.sqrt(6.0) * m**1.5 * xXX * xYY) / (xXX + xYY) * math.sqrt(PS / p0)
    kbar2 = math.copysign(kb, q)
    kbar3 = q * kbar1
    kbar4 = kb / abs(q)
    ks = {"k1": k1, "k2": k2, "k3": k3, "k4": k4, "kbar1": kbar1, "kbar2": kbar2,
          "kbar3": kbar3, "kbar4": kbar4, "k5": 1.0 / mu, "k6": 1.0 / nu, "q": q}
    X0, Y0 = report.X0, report.Y0

    def x_star(t: float) -> float:
        return advance_char(X0, Y0, flow, datum, t).at(t)[0]

    def u_star(t: float) -> float:
        return advance_char(X0, Y0, flow, datum, t).at(t)[1]

    return ScalingParameters(mu, nu, iota, p0, ks, x_star, u_star,
                             exit_normal=(-iota * k3, k4))


def analyze(flow: OuterFlow, datum: InitialDatum, window: tuple, n: int, t_max: float,
            h: float = 1e-3, spec: OdeSpec = OdeSpec()) -> BlowupReport:
    """maximal_time followed, when T is attained inside, by the genericity
    diagnostics and the scaling parameters."""
    rep = maximal_time(flow, datum, window, n, t_max, spec)
    if not rep.finite or rep.Y0 <= 0.0:
        return rep
    try:
        diag = genericity_check(flow, datum, rep, h=h, spec=spec)
    except GeometryError:
        return rep
    rep = replace(rep, genericity=diag, grad_xY=(diag.derivatives[(1, 1)], diag.derivatives[(0, 2)]),
                  uX_at_T=diag.values["u_X"], p0_sq=diag.values["p0_sq"])
    if diag.generic:
        try:
            sp = scaling_parameters(flow, datum, rep, diag)
        except InconsistencyError:
            return rep
        rep = replace(rep, scaling=sp, mu=sp.mu, nu=sp.nu, iota=sp.iota)
    return rep
