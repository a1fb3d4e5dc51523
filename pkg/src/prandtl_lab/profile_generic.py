"""Generic self-similar profile Theta.

Theta is defined through the volume preserving map

    Phi(a, b) = (a + b^2 + p*^2 a^3,  int_{-inf}^b db' / (1 + 3 psi1(p*(X - b'^2))^2))

with ``Theta = -a`` read off on the image ``{0 < Y < 2 Y*(X)}``.  Inversion is
one-dimensional: on the level set ``Phi_1 = X`` the first Lagrangian
coordinate is ``a(b) = -psi1(p*(X - b^2))/p*`` and ``Y(b)`` is strictly
increasing, so a bracketed Newton solve in ``b`` suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .kernels import (DomainError, QuadSpec, beta_fn, c_pm, find_root, integrate,
                      newton_bracketed, p_star, psi1)

PS = p_star()
PS2 = PS * PS

TAIL_SPEC = QuadSpec(abs_tol=1e-15, rel_tol=1e-13, tail_decay_exponent=4.0 / 3.0)
G_SPEC = QuadSpec(abs_tol=1e-16, rel_tol=1e-12, tail_decay_exponent=10.0 / 3.0)
ALT_SPEC = QuadSpec(abs_tol=1e-15, rel_tol=1e-13, tail_decay_exponent=1.5)
FAR_SPEC = QuadSpec(abs_tol=1e-15, rel_tol=1e-13, tail_decay_exponent=2.0)

# below this distance to the support boundary the expansion p*^-2 Y^-2 is used
BOUNDARY_SWITCH = 1e-3
INVERSION_TOL = 1e-10


class SupportError(DomainError):
    """Point outside the support of a profile."""


class Region(str, Enum):
    below = "below_vorticity_line"
    on_line = "on_line"
    above = "above_vorticity_line"
    outside = "outside_support"


@dataclass(frozen=True)
class ProfilePoint:
    X: float
    Y: float
    a: float
    b: float
    theta: float
    dtheta_dX: float
    dtheta_dY: float
    region: Region
    method: str = "quadrature"


# -- integrands ---------------------------------------------------------------

def _density(X, b):
    """Integrand of the second component of Phi on the level set X."""
    u = psi1(PS * (X - np.square(b)))
    return 1.0 / (1.0 + 3.0 * np.square(u))


def _g_kernel(z):
    u = psi1(z)
    w = 1.0 + 3.0 * np.square(u)
    return -u / (w * w * w)  # psi1 * psi1' / (1 + 3 psi1^2)^2


def _lower_tail(X: float, b: float, spec: QuadSpec = TAIL_SPEC) -> float:
    """int_{-inf}^b of the density, b <= 0."""
    return integrate(lambda s: _density(X, s), -math.inf, b, spec)


def _g_tail(X: float, b: float, spec: QuadSpec = G_SPEC) -> float:
    return integrate(lambda s: _g_kernel(PS * (X - np.square(s))), -math.inf, b, spec)


def _g_integral(X: float, b: float, spec: QuadSpec = G_SPEC) -> float:
    """int_{-inf}^b g(p*(X - s^2)) ds for any b (integrand even in s)."""
    if b <= 0:
        return _g_tail(X, b, spec)
    return 2.0 * _g_tail(X, 0.0, spec) - _g_tail(X, -b, spec)


# -- support curve -------------------------------------------------------------

def y_star(X: float, spec: QuadSpec = TAIL_SPEC) -> float:
    """Half-height of the support: int_0^inf of the level-set density."""
    if not math.isfinite(X):
        raise DomainError("y_star requires finite X")
    return _lower_tail(X, 0.0, spec)


def y_star_alt(X: float, spec: QuadSpec = ALT_SPEC) -> float:
    """Same curve through the Theta-integral form

        int_0^inf dz / (2 sqrt(z) sqrt(1 + p*^2 z^2 + 3 z p* psi + 3 psi^2)),

    psi = psi1(p* X); the sqrt(z) singularity is declared to the quadrature.
    """
    q = psi1(PS * X)
    c0 = 1.0 + 3.0 * q * q
    c1 = 3.0 * PS * q

    def f(z):
        return 0.5 / np.sqrt(z * (c0 + c1 * z + PS2 * z * z))
    return integrate(f, 0.0, math.inf, spec, singular=(0.5, 0.0))


def y_star_curvature() -> float:
    """Second derivative of Y* at X = 0, from the Taylor expansion of the
    level-set density in X:

        p*^(3/2) ((27/16) B(5/4, 5/4) - (3/4) B(1/4, 5/4)).
    """
    return PS**1.5 * (27.0 / 16.0 * beta_fn(1.25, 1.25) - 0.75 * beta_fn(0.25, 1.25))


@dataclass(frozen=True)
class SupportCurve:
    """Evaluator of Y*(X) bound to a quadrature spec."""

    spec: QuadSpec = TAIL_SPEC

    def __call__(self, X: float) -> float:
        return y_star(X, self.spec)

    def top(self, X: float) -> float:
        return 2.0 * y_star(X, self.spec)


# -- the map Phi ---------------------------------------------------------------

def phi1(a, b):
    return a + np.square(b) + PS2 * a**3


def y_of_b(X: float, b: float, ys: float | None = None) -> float:
    """Second component of Phi on the level set X, as a function of b."""
    if b <= 0:
        return _lower_tail(X, b)
    if ys is None:
        ys = y_star(X)
    return 2.0 * ys - _lower_tail(X, -b)


def phi_map(a: float, b: float) -> tuple[float, float]:
    X = float(phi1(a, b))
    return X, y_of_b(X, b)


def a_on_level(X: float, b: float) -> float:
    return -psi1(PS * (X - b * b)) / PS


def dY_db(a: float, b: float) -> float:
    X = float(phi1(a, b))
    return 1.0 / (1.0 + 3.0 * PS2 * a * a) - 12.0 * PS * b * _g_integral(X, b)


def dY_da(a: float, b: float) -> float:
    X = float(phi1(a, b))
    return -6.0 * PS * (1.0 + 3.0 * PS2 * a * a) * _g_integral(X, b)


def _solve_tail(X: float, target: float, ys: float) -> float:
    """Return beta <= 0 with lower_tail(X, beta) = target (0 < target <= ys).

    Solved in rho = |beta|^(1/3) on 1/tail, which is close to linear since the
    tail behaves like p*^(-2/3) |beta|^(-1/3).
    """
    if target >= ys:
        return 0.0

    def fdf(rho):
        beta = -rho**3
        lt = _lower_tail(X, beta)
        return 1.0 / lt - 1.0 / target, float(_density(X, beta)) * 3.0 * rho * rho / (lt * lt)

    hi = (math.sqrt(abs(X)) + 10.0) ** (1.0 / 3.0)
    fhi = fdf(hi)[0]
    while fhi <= 0.0:
        hi *= 2.0 ** (1.0 / 3.0)
        fhi = fdf(hi)[0]
    guess = PS ** (-2.0 / 3.0) / target
    rho = newton_bracketed(fdf, 0.0, hi, x0=guess if guess < hi else None, tol=1e-15,
                           flo=1.0 / ys - 1.0 / target, fhi=fhi)
    return -rho**3


def invert_on_level(X: float, Y: float) -> tuple[float, float]:
    """Lagrangian coordinates (a, b) with Phi(a, b) = (X, Y)."""
    ys = y_star(X)
    if not 0.0 < Y < 2.0 * ys:
        raise SupportError(f"Y={Y!r} outside (0, {2 * ys!r}) at X={X!r}")
    if Y <= ys:
        b = _solve_tail(X, Y, ys)
    else:
        b = -_solve_tail(X, 2.0 * ys - Y, ys)
    return a_on_level(X, b), b


def _region(b: float) -> Region:
    if abs(b) <= INVERSION_TOL:
        return Region.on_line
    return Region.below if b < 0 else Region.above


def theta_eval(X: float, Y: float, near_boundary: str = "auto") -> ProfilePoint:
    """Theta and its first derivatives at (X, Y).

    ``near_boundary``: "auto" switches to p*^-2 y^-2 (y the distance to the
    nearer support edge) when y < 1e-3, "quadrature" always inverts,
    "expansion" forces the boundary expansion.
    """
    ys = y_star(X)
    if not 0.0 < Y < 2.0 * ys:
        return ProfilePoint(X, Y, math.nan, math.nan, math.nan, math.nan, math.nan,
                            Region.outside, "none")
    dist = min(Y, 2.0 * ys - Y)
    use_exp = near_boundary == "expansion" or (near_boundary == "auto" and dist < BOUNDARY_SWITCH)
    if use_exp:
        theta = 1.0 / (PS2 * dist * dist)
        a = -theta
        mag = math.sqrt(max(X - a - PS2 * a**3, 0.0))
        b = -mag if Y <= ys else mag
        method = "boundary_expansion"
    else:
        b = _solve_tail(X, Y, ys) if Y <= ys else -_solve_tail(X, 2.0 * ys - Y, ys)
        a = a_on_level(X, b)
        method = "quadrature"
    dx = -dY_db(a, b)
    return ProfilePoint(X, Y, a, b, -a, dx, 2.0 * b, _region(b), method)


def theta(X: float, Y: float) -> float:
    return theta_eval(X, Y).theta


def theta_ode_check(X: float, Y: float) -> float:
    """Residual of d_Y Theta = -+ 2 sqrt(X + Theta + p*^2 Theta^3)."""
    p = theta_eval(X, Y)
    if p.region is Region.on_line:
        raise DomainError("sign of the ODE branch is ambiguous on the vorticity line")
    if p.region is Region.outside:
        raise SupportError("point outside support")
    th = p.theta
    radical = 2.0 * math.sqrt(max(X + th + PS2 * th**3, 0.0))
    sign = -1.0 if p.region is Region.below else 1.0
    return p.dtheta_dY - sign * radical


def boundary_expansion_gap(X: float, Y: float) -> float:
    """Theta(X, Y) - p*^-2 Y^-2 with Theta from the quadrature inversion."""
    ys = y_star(X)
    if not 0.0 < Y <= ys:
        raise SupportError("boundary expansion needs 0 < Y <= Y*(X)")
    return theta_eval(X, Y, near_boundary="quadrature").theta - 1.0 / (PS2 * Y * Y)


# -- far field -----------------------------------------------------------------

def _far_w0(sign: int) -> float:
    return -sign * PS ** (-2.0 / 3.0)


def _psi_far(sign: int, r: float) -> float:
    """psi_pm at w = w0 + r^2, where w0 = -+ p*^(-2/3) is the radicand root."""
    w0 = _far_w0(sign)

    def f(s):
        s2 = np.square(s)
        return 1.0 / (PS * np.sqrt(3.0 * w0 * w0 + 3.0 * w0 * s2 + s2 * s2))
    return integrate(f, r, math.inf, FAR_SPEC)


def psi_pm(sign: int, w: float) -> float:
    """(1/2) int_w^inf dv / sqrt(+-1 + p*^2 v^3)."""
    w0 = _far_w0(sign)
    if w < w0:
        raise DomainError("psi_pm defined for w >= the radicand root")
    return _psi_far(sign, math.sqrt(w - w0))


def varphi_pm(sign: int, z: float) -> float:
    """Far-field profile: inverse of psi_pm, extended evenly about C_pm."""
    cc = c_pm(sign)
    if not 0.0 < z < 2.0 * cc:
        raise DomainError(f"z={z!r} outside (0, {2 * cc!r})")
    if z > cc:
        z = 2.0 * cc - z
    w0 = _far_w0(sign)
    if z >= cc:
        return w0
    # psi(r) decreases from C to 0 and behaves like 1/(p* r) at infinity
    hi = max(2.0 / (PS * z), 1.0)
    while _psi_far(sign, hi) > z:
        hi *= 2.0
    r = find_root(lambda r: _psi_far(sign, r) - z, 0.0, hi, tol=1e-14)
    return w0 + r * r


def far_field_theta(X: float, Y: float) -> float:
    """Leading far-field approximation |X|^(1/3) varphi(Y |X|^(1/6))."""
    sign = 1 if X > 0 else -1
    return abs(X) ** (1.0 / 3.0) * varphi_pm(sign, Y * abs(X) ** (1.0 / 6.0))


# -- rescaled family -------------------------------------------------------------

def rescaled(fn: Callable[[float, float], float], mu: float, nu: float, iota: int):
    """Theta_{mu,nu,iota}(X, Y) = mu iota Theta(iota X / mu, Y / nu)."""
    def g(X: float, Y: float) -> float:
        return mu * iota * fn(iota * X / mu, Y / nu)
    return g


def y_star_rescaled(X: float, mu: float, nu: float, iota: int) -> float:
    return nu * y_star(iota * X / mu)


UPS_SPEC = QuadSpec(abs_tol=1e-12, rel_tol=1e-11, max_subdivisions=400,
                    tail_decay_exponent=8.0 / 3.0)


def upsilon_on_level(X: float, b: float, spec: QuadSpec = UPS_SPEC) -> float:
    """-int_0^Y d_X Theta dy written on the level set X, Y = Y(b).

    With dy = F(X, b') db' and d_X Theta = -d_b Y this is
    int_{-inf}^b (F - 12 p* b' G(b')) F db', G the inner g-integral.
    """
    def f(bs):
        out = np.empty(np.shape(bs))
        for i, bb in enumerate(np.atleast_1d(bs)):
            bb = float(bb)
            fb = float(_density(X, bb))
            out[i] = (fb - 12.0 * PS * bb * _g_integral(X, bb)) * fb
        return out
    if b <= 0:
        return integrate(f, -math.inf, b, spec)
    return integrate(f, -math.inf, 0.0, spec) + integrate(f, 0.0, b, spec)


class GenericProfile:
    """Sampler interface used by the residual checks."""

    alpha = 1.5
    beta = -0.25

    def evaluate(self, X: float, Y: float) -> ProfilePoint:
        return theta_eval(X, Y)

    def support_top(self, X: float) -> float:
        return 2.0 * y_star(X)

    def symmetry_line(self, X: float) -> float:
        return y_star(X)

    def upsilon(self, X: float, Y: float) -> float:
        _, b = invert_on_level(X, Y)
        return upsilon_on_level(X, b)
