"""Residual checks of the stationary self-similar equation, its transport
and Crocco forms, and of volume preservation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np

from .kernels import DomainError, QuadSpec, integrate
from .profile_generic import PS2, phi_map
from .profile_degenerate import phi_prime_map

UPSILON_SPEC = QuadSpec(abs_tol=1e-11, rel_tol=1e-11, max_subdivisions=400)


class EquationId(str, Enum):
    stationary = "stationary_1_9"
    transport = "transport_1_10"
    crocco = "crocco_3_2"
    volume = "volume"


@dataclass
class ResidualReport:
    equation_id: EquationId
    points: list = field(default_factory=list)

    @property
    def max_abs(self) -> float:
        return max((abs(r) for _, r in self.points), default=0.0)


class ProfileSampler(Protocol):
    def evaluate(self, X: float, Y: float): ...
    def support_top(self, X: float) -> float: ...


def upsilon(profile: ProfileSampler, X: float, Y: float,
            spec: QuadSpec = UPSILON_SPEC, route: str = "auto") -> float:
    """Normal velocity profile -int_0^Y d_X Theta(X, y) dy.

    route "auto" uses the profile's own level-set quadrature when it has one
    (same integral after the substitution y = Y(b)); "y" integrates sampled
    d_X Theta directly in y.
    """
    if route == "auto" and hasattr(profile, "upsilon"):
        return profile.upsilon(X, Y)

    def f(ys):
        return np.array([profile.evaluate(X, float(y)).dtheta_dX for y in np.atleast_1d(ys)])
    return -integrate(f, 0.0, Y, spec)


def stationary_residual(profile: ProfileSampler, alpha: float, beta: float,
                        X: float, Y: float, spec: QuadSpec = UPSILON_SPEC,
                        route: str = "auto") -> float:
    """(1 - alpha) Theta + (alpha X + Theta) Theta_X + (beta Y + Upsilon) Theta_Y."""
    if not 0.0 < Y < profile.support_top(X):
        raise DomainError("point must lie strictly inside the support")
    p = profile.evaluate(X, Y)
    ups = upsilon(profile, X, Y, spec, route)
    return ((1.0 - alpha) * p.theta + (alpha * X + p.theta) * p.dtheta_dX
            + (beta * Y + ups) * p.dtheta_dY)


@dataclass(frozen=True)
class ClosedFormMap:
    """First component X(a, b) with its exact partial derivatives."""

    X: Callable[[float, float], float]
    dX_da: Callable[[float, float], float]
    dX_db: Callable[[float, float], float]


GENERIC_MAP = ClosedFormMap(
    X=lambda a, b: a + b * b + PS2 * a**3,
    dX_da=lambda a, b: 1.0 + 3.0 * PS2 * a * a,
    dX_db=lambda a, b: 2.0 * b,
)

DEGENERATE_MAP = ClosedFormMap(
    X=lambda a, b: a + a**3 + b * b * a / 4.0,
    dX_da=lambda a, b: 1.0 + 3.0 * a * a + b * b / 4.0,
    dX_db=lambda a, b: a * b / 2.0,
)


def transport_residual(m: ClosedFormMap, alpha: float, beta: float,
                       a: float, b: float) -> float:
    """(alpha - 1) a X_a + (1 + beta) b X_b - (alpha X - a)."""
    return ((alpha - 1.0) * a * m.dX_da(a, b) + (1.0 + beta) * b * m.dX_db(a, b)
            - (alpha * m.X(a, b) - a))


def crocco_residual(X: float, theta: float, alpha: float = 1.5,
                    beta: float = -0.25) -> float:
    """Crocco form with tau = -2 sqrt(X + Theta + p*^2 Theta^3)."""
    rad = X + theta + PS2 * theta**3
    if rad <= 0.0:
        raise DomainError("radicand must be positive")
    root = math.sqrt(rad)
    tau = -2.0 * root
    dtau_dtheta = -(1.0 + 3.0 * PS2 * theta * theta) / root
    dtau_dX = -1.0 / root
    lhs = (alpha - 1.0) * theta * dtau_dtheta + (alpha * X + theta) * dtau_dX
    return lhs - (alpha - 1.0 - beta) * tau


def jacobian_det(map2d: Callable[[float, float], tuple], a: float, b: float,
                 h: float = 1e-5) -> float:
    fa = (np.array(map2d(a + h, b)) - np.array(map2d(a - h, b))) / (2.0 * h)
    fb = (np.array(map2d(a, b + h)) - np.array(map2d(a, b - h))) / (2.0 * h)
    return float(fa[0] * fb[1] - fa[1] * fb[0])


def volume_residual(map2d: Callable[[float, float], tuple],
                    region: tuple = (-2.0, 2.0, -2.0, 2.0), n: int = 7,
                    h: float = 1e-5) -> ResidualReport:
    """Finite-difference Jacobian determinant minus one on an n x n grid."""
    a0, a1, b0, b1 = region
    rep = ResidualReport(EquationId.volume)
    for a in np.linspace(a0, a1, n):
        for b in np.linspace(b0, b1, n):
            rep.points.append(((float(a), float(b)), jacobian_det(map2d, a, b, h) - 1.0))
    return rep


def stationary_report(profile: ProfileSampler, alpha: float, beta: float,
                      points, spec: QuadSpec = UPSILON_SPEC) -> ResidualReport:
    rep = ResidualReport(EquationId.stationary)
    for X, Y in points:
        rep.points.append(((X, Y), stationary_residual(profile, alpha, beta, X, Y, spec)))
    return rep


def interior_grid(profile: ProfileSampler, xs, fractions) -> list:
    """Points (X, f * top(X)) for X in xs and f in fractions of the support."""
    pts = []
    for X in xs:
        top = profile.support_top(X)
        pts.extend((float(X), float(f * top)) for f in fractions)
    return pts


__all__ = [
    "EquationId", "ResidualReport", "upsilon", "stationary_residual",
    "transport_residual", "crocco_residual", "volume_residual", "jacobian_det",
    "GENERIC_MAP", "DEGENERATE_MAP", "stationary_report", "interior_grid",
    "phi_map", "phi_prime_map",
]
