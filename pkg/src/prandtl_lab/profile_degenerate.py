"""Degenerate symmetric profile Theta'.

Built from the volume preserving map

    Phi'(a, b) = (a + a^3 + b^2 a / 4,
                  2 int_{-inf}^{b/2} db' / ((1 + b'^2)(1 + 3 psi1(X / (1 + b'^2)^(3/2))^2)))

whose image is the strip ``0 < Y < 2 Y'*(X)``.  On a level set the cubic
constraint is solved by ``a = -sqrt(s) psi1(X / s^(3/2))`` with
``s = 1 + b^2/4``.  Outside the strip the profile is extended by zero
(restricted mode) or periodically in Y (periodic mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .kernels import DomainError, QuadSpec, integrate, newton_bracketed, psi1

TAIL_SPEC = QuadSpec(abs_tol=1e-15, rel_tol=1e-13, tail_decay_exponent=2.0)
K_SPEC = QuadSpec(abs_tol=1e-16, rel_tol=1e-12, tail_decay_exponent=5.0)

AXIS_SNAP = 1e-8
INVERSION_TOL = 1e-10


class Mode(str, Enum):
    restricted = "restricted"
    periodic = "periodic"


@dataclass(frozen=True)
class DegenerateProfilePoint:
    X: float
    Y: float
    a: float
    b: float
    theta: float
    dtheta_dX: float
    dtheta_dY: float
    mode: Mode
    inside: bool


def _density(X, beta):
    q = 1.0 + np.square(beta)
    u = psi1(X / q**1.5)
    return 1.0 / (q * (1.0 + 3.0 * np.square(u)))


def _k_kernel(X, beta):
    q = 1.0 + np.square(beta)
    u = psi1(X / q**1.5)
    w = 1.0 + 3.0 * np.square(u)
    return q**-2.5 * (-u / (w * w * w))


def _lower_tail(X: float, beta: float) -> float:
    return integrate(lambda s: _density(X, s), -math.inf, beta, TAIL_SPEC)


def _k_integral(X: float, beta: float) -> float:
    def tail(c):
        return integrate(lambda s: _k_kernel(X, s), -math.inf, c, K_SPEC)
    if beta <= 0:
        return tail(beta)
    return 2.0 * tail(0.0) - tail(-beta)


def y_prime_star(X: float) -> float:
    """Half-height Y'*(X) of the support (full-line integral of the density)."""
    if not math.isfinite(X):
        raise DomainError("y_prime_star requires finite X")
    return 2.0 * _lower_tail(abs(X), 0.0)


def phi1_prime(a, b):
    return a + a**3 + np.square(b) * a / 4.0


def a_on_level(X: float, b: float) -> float:
    s = 1.0 + b * b / 4.0
    return -math.sqrt(s) * psi1(X / s**1.5)


def phi_prime_map(a: float, b: float) -> tuple[float, float]:
    X = float(phi1_prime(a, b))
    if b <= 0:
        return X, 2.0 * _lower_tail(X, 0.5 * b)
    return X, 2.0 * y_prime_star(X) - 2.0 * _lower_tail(X, -0.5 * b)


def dY_db(a: float, b: float) -> float:
    X = float(phi1_prime(a, b))
    return float(_density(X, 0.5 * b)) - 6.0 * a * b * _k_integral(X, 0.5 * b)


def dY_da(a: float, b: float) -> float:
    X = float(phi1_prime(a, b))
    return -12.0 * (1.0 + 3.0 * a * a + b * b / 4.0) * _k_integral(X, 0.5 * b)


def _solve_half(X: float, target: float, ysp: float) -> float:
    """beta <= 0 with 2 lower_tail(X, beta) = target; works on 1/tail in |beta|."""
    if target >= ysp:
        return 0.0

    def fdf(r):
        lt = 2.0 * _lower_tail(X, -r)
        return 1.0 / lt - 1.0 / target, 2.0 * float(_density(X, -r)) / (lt * lt)

    hi = 10.0 + math.sqrt(abs(X))
    fhi = fdf(hi)[0]
    while fhi <= 0.0:
        hi *= 2.0
        fhi = fdf(hi)[0]
    guess = 2.0 / target
    r = newton_bracketed(fdf, 0.0, hi, x0=guess if guess < hi else None, tol=1e-15,
                         flo=1.0 / ysp - 1.0 / target, fhi=fhi)
    return -r


def invert_on_level(X: float, Y: float) -> tuple[float, float]:
    ysp = y_prime_star(X)
    if not 0.0 < Y < 2.0 * ysp:
        raise DomainError(f"Y={Y!r} outside (0, {2 * ysp!r})")
    if Y <= ysp:
        b = 2.0 * _solve_half(X, Y, ysp)
    else:
        b = -2.0 * _solve_half(X, 2.0 * ysp - Y, ysp)
    return a_on_level(X, b), b


def theta_prime_eval(X: float, Y: float, mode: Mode | str = Mode.restricted) -> DegenerateProfilePoint:
    """Theta' with derivatives; total on the closed upper half plane."""
    mode = Mode(mode)
    if Y < 0:
        raise DomainError("Y must be non-negative")
    Xc = 0.0 if abs(X) < AXIS_SNAP else X
    ysp = y_prime_star(Xc)
    period = 2.0 * ysp
    Yr = Y
    if mode is Mode.periodic:
        Yr = math.fmod(Y, period)
    if not 0.0 < Yr < period:
        return DegenerateProfilePoint(X, Y, 0.0, math.nan, 0.0, 0.0, 0.0, mode, False)
    if Yr <= ysp:
        b = 2.0 * _solve_half(Xc, Yr, ysp)
    else:
        b = -2.0 * _solve_half(Xc, period - Yr, ysp)
    a = 0.0 if Xc == 0.0 else a_on_level(Xc, b)
    return DegenerateProfilePoint(X, Y, a, b, -a, -dY_db(a, b), 0.5 * a * b, mode, True)


def theta_prime(X: float, Y: float, mode: Mode | str = Mode.restricted) -> float:
    return theta_prime_eval(X, Y, mode).theta


def axis_dx(Y: float) -> float:
    """d_X Theta'(0, Y) = -sin^2(Y/2) on [0, 2 pi], zero beyond."""
    if Y < 0:
        raise DomainError("Y must be non-negative")
    if Y > 2.0 * math.pi:
        return 0.0
    return -math.sin(0.5 * Y) ** 2


def axis_d3x_bracket(Y: float) -> float:
    """The trigonometric bracket

        96 sin^8(Y/2)/(cos^2(Y/2) + 1/6)
          - sin Y (270 Y - 80 sin Y + 3 sin 2Y - 686 sin Y/(3 cos^2(Y/2) + 1/2))

    which equals 576 times the X^3 Taylor coefficient of Theta' on the axis.
    """
    s2 = math.sin(0.5 * Y)
    c2 = math.cos(0.5 * Y) ** 2
    sy = math.sin(Y)
    return (96.0 * s2**8 / (c2 + 1.0 / 6.0)
            - sy * (270.0 * Y - 80.0 * sy + 3.0 * math.sin(2.0 * Y)
                    - 686.0 * sy / (3.0 * c2 + 0.5)))


def axis_d3x(Y: float) -> float:
    """d_X^3 Theta'(0, Y) on [0, 2 pi], zero beyond.

    The bracket over 576 is the cubic Taylor coefficient (it equals 1 at
    Y = pi, matching -X + X^3 there), so the derivative is the bracket / 96.
    """
    if Y < 0:
        raise DomainError("Y must be non-negative")
    if Y > 2.0 * math.pi:
        return 0.0
    return axis_d3x_bracket(Y) / 96.0


def axis_dx_consistency(Y: float, h: float = 1e-4) -> float:
    """Centred difference of Theta' across the axis minus axis_dx."""
    if not 0.0 < Y < 2.0 * math.pi:
        raise DomainError("Y must lie in (0, 2 pi)")
    fd = (theta_prime(h, Y) - theta_prime(-h, Y)) / (2.0 * h)
    return fd - axis_dx(Y)


def ode_residual_degenerate(X: float, Y: float) -> float:
    """Residual of d_Y Theta' = sgn * sqrt(-Theta (X + Theta + Theta^3))."""
    p = theta_prime_eval(X, Y)
    if not p.inside:
        raise DomainError("point outside the support")
    if abs(X) < AXIS_SNAP or abs(p.b) <= INVERSION_TOL:
        raise DomainError("branch sign ambiguous on the axis or on Y = Y'*(X)")
    th = p.theta
    radicand = -th * (X + th + th**3)
    sign = math.copysign(1.0, X) * math.copysign(1.0, p.b)
    return p.dtheta_dY - sign * math.sqrt(max(radicand, 0.0))


UPS_SPEC = QuadSpec(abs_tol=1e-12, rel_tol=1e-11, max_subdivisions=400,
                    tail_decay_exponent=4.0)


def upsilon_on_level(X: float, b: float, spec: QuadSpec = UPS_SPEC) -> float:
    """-int_0^Y d_X Theta' dy on the level set X, with dy = F(X, b'/2) db'."""
    def f(bs):
        out = np.empty(np.shape(bs))
        for i, bb in enumerate(np.atleast_1d(bs)):
            bb = float(bb)
            a = a_on_level(X, bb)
            fb = float(_density(X, 0.5 * bb))
            out[i] = (fb - 6.0 * a * bb * _k_integral(X, 0.5 * bb)) * fb
        return out
    if b <= 0:
        return integrate(f, -math.inf, b, spec)
    return integrate(f, -math.inf, 0.0, spec) + integrate(f, 0.0, b, spec)


class DegenerateProfile:
    """Sampler interface (restricted mode) used by the residual checks."""

    alpha = 1.5
    beta = -0.5

    def evaluate(self, X: float, Y: float) -> DegenerateProfilePoint:
        return theta_prime_eval(X, Y)

    def support_top(self, X: float) -> float:
        return 2.0 * y_prime_star(X)

    def symmetry_line(self, X: float) -> float:
        return y_prime_star(X)

    def upsilon(self, X: float, Y: float) -> float:
        _, b = invert_on_level(X, Y)
        return upsilon_on_level(X, b)
