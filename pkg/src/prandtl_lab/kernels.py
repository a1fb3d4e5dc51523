"""Numerical kernels shared by the rest of the package.

Special functions (the Cardano inverse ``psi1``, a Lanczos gamma function and
the constants built on it), adaptive Gauss-Kronrod quadrature with algebraic
tail maps, Brent root finding and a Dormand-Prince integrator with dense
output and event location.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a special function or map."""


class QuadratureError(RuntimeError):
    """Subdivision budget exhausted before the requested accuracy."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class BracketError(ValueError):
    """Root finder called without a sign change."""


class IntegrationError(RuntimeError):
    """ODE step size underflow; carries the last valid state."""

    def __init__(self, message: str, t: float, y: np.ndarray):
        super().__init__(f"{message} at t={t!r}")
        self.t = t
        self.y = y


# ---------------------------------------------------------------------------
# Special functions


def _real_cbrt(r):
    return np.sign(r) * np.abs(r) ** (1.0 / 3.0)


def psi1(x):
    """Real root u of ``-u - u**3 = x`` (Cardano form, real cube roots).

    Works on floats and numpy arrays.  The small cube root is computed from
    the product identity to avoid cancellation, then one Newton step polishes
    the result to full precision.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("psi1 requires finite input")
    ax = np.abs(arr)
    half = 0.5 * ax
    s = np.sqrt(1.0 / 27.0 + half * half)
    big = half + s
    # (-|x|/2 + s) * (|x|/2 + s) = 1/27
    small = (1.0 / 27.0) / big
    u = _real_cbrt(small) - _real_cbrt(big)
    # Newton polish on u + u^3 + |x| = 0
    u = u - (u + u**3 + ax) / (1.0 + 3.0 * u * u)
    u = -np.sign(arr) * np.abs(u)
    if np.ndim(x) == 0:
        return float(u)
    return u


def psi1_prime(x):
    """Derivative of ``psi1``: ``-1/(1 + 3 psi1(x)**2)``."""
    u = psi1(x)
    return -1.0 / (1.0 + 3.0 * np.square(u)) if np.ndim(u) else -1.0 / (1.0 + 3.0 * u * u)


# Lanczos approximation, g = 7, n = 9 (coefficients as published by Godfrey).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for real x > 0 via the Lanczos approximation."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    if x < 0.5:
        # reflection keeps the series in its accurate half plane
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * math.exp((z + 0.5) * math.log(t) - t) * acc


def beta_fn(p: float, q: float) -> float:
    return gamma_fn(p) * gamma_fn(q) / gamma_fn(p + q)


def p_star() -> float:
    """The constant 4 Gamma(1/4)^4 / (9 pi^3)."""
    return 4.0 * gamma_fn(0.25) ** 4 / (9.0 * math.pi**3)


def c_pm(sign: int) -> float:
    """Far-field constants C+ (sign=+1) and C- (sign=-1) in closed form."""
    g14 = gamma_fn(0.25) ** (8.0 / 3.0)
    pref = 3.0 * 1.5 ** (1.0 / 3.0) * math.pi**2.5
    if sign > 0:
        return pref * gamma_fn(1.0 / 3.0) / (4.0 * g14 * gamma_fn(5.0 / 6.0))
    if sign < 0:
        return pref * gamma_fn(7.0 / 6.0) / (2.0 * g14 * gamma_fn(2.0 / 3.0))
    raise DomainError("sign must be +1 or -1")


def c2_closed_form() -> float:
    """Closed-form value quoted for the second Taylor coefficient of the
    support curve at the origin.  Reported for comparison only."""
    return -5.0 * gamma_fn(0.25) / (72.0 * math.pi**5)


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail_decay_exponent: float = 2.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")

    def tightened(self, factor: float) -> "QuadSpec":
        return QuadSpec(self.abs_tol / factor, self.rel_tol / factor,
                        self.max_subdivisions, self.tail_decay_exponent)


_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod abscissae
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]


def _gk15(f, lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    vals = np.array(np.broadcast_to(f(c + h * _NODES), _NODES.shape), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        # integrable endpoint singularity hit after the abscissa rounded onto
        # the endpoint; drop those nodes and let the error estimate decide
        vals[bad] = 0.0
    k = h * float(np.dot(_WK, vals))
    g = h * float(np.dot(_WG15, vals))
    if not (math.isfinite(k) and math.isfinite(g)):
        raise QuadratureError("non-finite integrand value", k, math.inf)
    return k, abs(k - g)


def _mapped(f, a, b, m):
    """Return (g, lo, hi) with the integral of f over (a, b) equal to that of
    g over (lo, hi), mapping infinite ends by z = a + s**(-m) - 1."""
    if math.isinf(a) and math.isinf(b):
        raise ValueError("split doubly infinite ranges before calling")
    if math.isinf(b):
        def g(s):
            z = a + s ** (-m) - 1.0
            return f(z) * (m * s ** (-m - 1.0))
        return g, 0.0, 1.0
    if math.isinf(a):
        def g(s):
            z = b - (s ** (-m) - 1.0)
            return f(z) * (m * s ** (-m - 1.0))
        return g, 0.0, 1.0
    return f, a, b


def integrate(f: Callable, a: float, b: float, spec: QuadSpec = QuadSpec(),
              singular: tuple = (0.0, 0.0)) -> float:
    """Adaptive Gauss-Kronrod (7/15) estimate of the integral of f on (a, b).

    ``f`` must accept a numpy array of abscissae.  An infinite endpoint is
    mapped by ``z = a + s**(-m) - 1`` with ``m = 1/(p - 1)``, ``p`` being the
    declared tail decay exponent, which makes the mapped integrand bounded at
    ``s = 0``.  Doubly infinite ranges are split at 0.

    ``singular = (ga, gb)`` declares an algebraic endpoint singularity
    ``|z - end|**(-g)`` with ``0 <= g < 1`` at a finite end; it is removed by
    the substitution ``z = end + w**k``, ``k = 1/(1 - g)``.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, spec, (singular[1], singular[0]))
    if math.isinf(a) and math.isinf(b):
        return integrate(f, a, 0.0, spec) + integrate(f, 0.0, b, spec)
    ga, gb = singular
    if ga or gb:
        if math.isinf(a):
            return integrate(f, a, b - 1.0, spec) + integrate(f, b - 1.0, b, spec, (0.0, gb))
        if math.isinf(b):
            return integrate(f, a, a + 1.0, spec, (ga, 0.0)) + integrate(f, a + 1.0, b, spec)
        mid = 0.5 * (a + b)
        total = 0.0
        for end, g, sgn in ((a, ga, 1.0), (b, gb, -1.0)):
            if not g:
                total += integrate(f, min(end, mid), max(end, mid), spec)
                continue
            if not 0.0 < g < 1.0:
                raise ValueError("endpoint exponent must lie in [0, 1)")
            k = 1.0 / (1.0 - g)
            span = abs(mid - end)

            def fw(w, end=end, k=k, span=span, sgn=sgn):
                return f(end + sgn * span * w**k) * (k * span * w ** (k - 1.0))
            total += integrate(fw, 0.0, 1.0, spec)
        return total
    p = spec.tail_decay_exponent
    if (math.isinf(a) or math.isinf(b)) and p <= 1.0:
        raise ValueError("tail_decay_exponent must exceed 1 on infinite ranges")
    m = 1.0 / (p - 1.0) if p > 1.0 else 1.0
    g, lo, hi = _mapped(f, a, b, m)

    with np.errstate(over="ignore", invalid="ignore"):
        total, err = _gk15(g, lo, hi)
        heap = [(-err, lo, hi, total)]
        n = 1
        while err > max(spec.abs_tol, spec.rel_tol * abs(total)):
            if n >= spec.max_subdivisions:
                raise QuadratureError("subdivision budget exhausted", total, err)
            neg_e, l, r, val = heapq.heappop(heap)
            mid = 0.5 * (l + r)
            if not (l < mid < r):
                raise QuadratureError("interval underflow", total, err)
            v1, e1 = _gk15(g, l, mid)
            v2, e2 = _gk15(g, mid, r)
            heapq.heappush(heap, (-e1, l, mid, v1))
            heapq.heappush(heap, (-e2, mid, r, v2))
            total += v1 + v2 - val
            err += e1 + e2 + neg_e
            n += 1
            if n % 64 == 0:
                # re-sum to shed accumulated rounding in the running totals
                total = math.fsum(item[3] for item in heap)
                err = math.fsum(-item[0] for item in heap)
    return total


# ---------------------------------------------------------------------------
# Root finding


def find_root(f: Callable[[float], float], lo: float, hi: float,
              tol: float = 1e-14, max_iter: int = 200,
              flo: Optional[float] = None, fhi: Optional[float] = None) -> float:
    """Brent's bracketed root finder (bisection, secant and inverse
    quadratic interpolation).  Stops once the bracket is narrower than tol
    or an exact zero is hit."""
    a, b = float(lo), float(hi)
    fa = f(a) if flo is None else flo
    fb = f(b) if fhi is None else fhi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={fa}, {fb}")
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = f(b)
    return b


def newton_bracketed(fdf: Callable[[float], tuple], lo: float, hi: float,
                     x0: Optional[float] = None, tol: float = 1e-14,
                     max_iter: int = 100, flo: Optional[float] = None,
                     fhi: Optional[float] = None) -> float:
    """Newton iteration safeguarded by a sign-change bracket [lo, hi].

    ``fdf(x)`` returns ``(f(x), f'(x))``.  Steps leaving the bracket fall
    back to bisection; the bracket shrinks with every evaluation.
    """
    if flo is None:
        flo = fdf(lo)[0]
    if fhi is None:
        fhi = fdf(hi)[0]
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    rising = fhi > 0
    x = 0.5 * (lo + hi) if x0 is None or not lo < x0 < hi else x0
    for _ in range(max_iter):
        fx, d = fdf(x)
        if fx == 0.0:
            return x
        if (fx > 0) == rising:
            hi = x
        else:
            lo = x
        xn = x - fx / d if d != 0 else math.inf
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)) or hi - lo <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def expand_bracket(f: Callable[[float], float], lo: float, hi: float,
                   grow: float = 2.0, max_iter: int = 200):
    """Grow [lo, hi] geometrically about its centre until f changes sign.
    Returns (lo, hi, f(lo), f(hi))."""
    flo, fhi = f(lo), f(hi)
    for _ in range(max_iter):
        if (flo > 0) != (fhi > 0) or flo == 0 or fhi == 0:
            return lo, hi, flo, fhi
        width = hi - lo
        if abs(flo) < abs(fhi):
            lo -= grow * width
            flo = f(lo)
        else:
            hi += grow * width
            fhi = f(hi)
    raise BracketError("bracket expansion failed")


def golden_min(f: Callable[[float], float], lo: float, hi: float,
               tol: float = 1e-10, max_iter: int = 300):
    """Brent's derivative-free minimiser on [lo, hi]; returns (x, f(x))."""
    cgold = 0.3819660112501051
    a, b = lo, hi
    x = w = v = a + cgold * (b - a)
    fx = fw = fv = f(x)
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (a + b)
        tol1 = tol * abs(x) + 1e-14
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (b - a):
            break
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if abs(p) >= abs(0.5 * q * etemp) or p <= q * (a - x) or p >= q * (b - x):
                e = (a - x) if x >= xm else (b - x)
                d = cgold * e
            else:
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = math.copysign(tol1, xm - x)
        else:
            e = (a - x) if x >= xm else (b - x)
            d = cgold * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = f(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


# ---------------------------------------------------------------------------
# ODE integration


@dataclass(frozen=True)
class OdeSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    event_tol: float = 1e-12

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.max_step, self.event_tol) <= 0:
            raise ValueError("OdeSpec fields must be strictly positive")


@dataclass
class Trajectory:
    """Accepted steps of an integration plus cubic Hermite dense output."""

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    t_event: Optional[float] = None
    y_event: Optional[np.ndarray] = None

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    def __call__(self, t: float) -> np.ndarray:
        ts = self.t
        if t <= ts[0]:
            return self.y[0].copy()
        if t >= ts[-1]:
            return self.y[-1].copy()
        i = int(np.searchsorted(ts, t)) - 1
        return _hermite(ts[i], ts[i + 1], self.y[i], self.y[i + 1],
                        self.dy[i], self.dy[i + 1], t)


def _hermite(t0, t1, y0, y1, f0, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate_ode(rhs: Callable[[float, np.ndarray], np.ndarray],
                  y0: Sequence[float], t0: float, t1: float,
                  spec: OdeSpec = OdeSpec(),
                  event: Optional[Callable[[float, np.ndarray], float]] = None) -> Trajectory:
    """Dormand-Prince RK5(4) with dense output.

    If ``event`` is given the integration stops at the first sign change of
    ``event(t, y)``, located on the dense output to ``spec.event_tol``.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    f = np.asarray(rhs(t, y), dtype=float)
    ts, ys, fs = [t], [y.copy()], [f.copy()]
    if t1 == t0:
        return Trajectory(np.array(ts), np.array(ys), np.array(fs))

    scale = spec.abs_tol + spec.rel_tol * np.abs(y)
    d0 = np.linalg.norm(y / scale) / math.sqrt(y.size)
    d1 = np.linalg.norm(f / scale) / math.sqrt(y.size)
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, spec.max_step, abs(t1 - t0))
    g_prev = event(t, y) if event is not None else None

    k = np.empty((7, y.size))
    while direction * (t1 - t) > 0:
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t, y.copy())
        h = min(h, abs(t1 - t))
        hs = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y + hs * np.dot(_A[i], k[:i])
            k[i] = rhs(t + _C[i] * hs, yi)
        y_new = y + hs * np.dot(_B5, k)
        if not np.all(np.isfinite(y_new)):
            h *= 0.25
            continue
        err_vec = hs * np.dot(_E, k)
        scale = spec.abs_tol + spec.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.linalg.norm(err_vec / scale) / math.sqrt(y.size)
        if err <= 1.0:
            t_new = t + hs
            f_new = k[6].copy()
            if event is not None:
                g_new = event(t_new, y_new)
                if g_prev != 0.0 and (g_new == 0.0 or (g_new > 0) != (g_prev > 0)):
                    t_a, y_a, f_a = t, y, f

                    def g_of(s):
                        return event(s, _hermite(t_a, t_new, y_a, y_new, f_a, f_new, s))

                    lo, hi = (t, t_new) if direction > 0 else (t_new, t)
                    te = find_root(g_of, lo, hi, tol=spec.event_tol)
                    ye = _hermite(t_a, t_new, y_a, y_new, f_a, f_new, te)
                    ts.append(t_new)
                    ys.append(y_new)
                    fs.append(f_new)
                    return Trajectory(np.array(ts), np.array(ys), np.array(fs), te, ye)
                g_prev = g_new
            t, y, f = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f.copy())
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h = min(h * fac, spec.max_step)
        else:
            h *= max(0.2, 0.9 * err ** -0.25)
    return Trajectory(np.array(ts), np.array(ys), np.array(fs))
