"""Ladder height quantities of the one-dimensional subordinate Brownian motion.

For the symmetric 1-d process with characteristic exponent Phi(theta) =
phi(theta^2) the ascending ladder height subordinator has Laplace exponent

    chi(lambda) = exp((1/pi) int_0^inf log Phi(lambda theta) / (1 + theta^2) dtheta)

and the dual quantity rho is the same functional of Psi(theta) = theta^2/Phi(theta).
With theta = e^s the measure dtheta/(1+theta^2) becomes ds/(2 cosh s), and the
power part alpha log(lambda theta) integrates to (alpha/2) log lambda exactly, so
only log ell is integrated numerically for chi.  rho is evaluated from the
unsubtracted integrand in the original variable so that chi*rho = lambda is a
genuine cross-check of two quadratures.

v (ladder potential density) and V(x) = V((0, x)) are Laplace inversions of
1/chi and 1/(lambda chi); the normalisation of local time at the maximum is
fixed so that the stable case gives V(x) = x^(alpha/2)/Gamma(1+alpha/2).
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy.special import gamma as Gamma

from . import laplace
from .bernstein import BernsteinFamily, Kind, LogLogTable, table_grid
from .errors import DomainError, InversionError, QuadratureError

_QUAD_TOL = 1e-13


def _quad(f, a, b, what, epsrel=_QUAD_TOL):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=400)
    # results enter through exp(), so an absolute floor is appropriate
    if not math.isfinite(val) or err > max(1e-8 * abs(val), 1e-11):
        raise QuadratureError(f"{what} did not converge on [{a:.3g}, {b:.3g}]", err)
    return val, err


@dataclass(frozen=True)
class LadderData:
    family: BernsteinFamily
    inversion_order: int = laplace.DEFAULT_ORDER

    @property
    def is_stable(self):
        return self.family.kind is Kind.STABLE

    # ----- exponents -----

    def chi(self, lam):
        return _vectorize(lambda x: _chi(self.family, x), lam)

    def rho(self, lam):
        return _vectorize(lambda x: _rho(self.family, x), lam)

    def chi_asymptotic(self, lam):
        """lambda^(alpha/2) ell(lambda^2)^(1/2), the large-lambda equivalent of chi."""
        lam = np.asarray(lam, float)
        out = lam**self.family.a * np.sqrt(self.family.ell(lam**2))
        return float(out) if out.ndim == 0 else out

    # ----- ladder potential -----

    def v(self, x):
        x = _positive(x, "x")
        if self.is_stable:
            a = self.family.a
            return _unwrap(x ** (a - 1) / Gamma(a))
        return _unwrap(_ladder_tables(self.family, self.inversion_order)[0](x))

    def V(self, x):
        x = _positive(x, "x")
        if self.is_stable:
            a = self.family.a
            return _unwrap(x**a / Gamma(1 + a))
        return _unwrap(_ladder_tables(self.family, self.inversion_order)[1](x))

    def small_x_asymptotics(self, x):
        """(V, v) predicted as x -> 0 from regular variation of chi."""
        a = self.family.a
        x = np.asarray(x, float)
        s = np.sqrt(self.family.ell(x**-2.0))
        return x**a / (Gamma(1 + a) * s), x ** (a - 1) / (Gamma(a) * s)


def _vectorize(f, x):
    arr = _positive(x, "lambda")
    if arr.ndim == 0:
        return f(float(arr))
    return np.array([f(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive, got {x!r}")
    return arr


def _unwrap(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@lru_cache(maxsize=4096)
def _chi(family, lam):
    a = family.a
    if family.kind is Kind.STABLE:
        return lam**a
    c = -math.log(lam)
    width = 45.0 + abs(c)
    g = lambda s: float(family.log_ell(lam * lam * math.exp(2 * s))) / (2 * math.cosh(s))
    knots = sorted({-width, min(c, 0.0), max(c, 0.0), width})
    total = sum(_quad(g, p, q, "chi integral")[0] for p, q in zip(knots[:-1], knots[1:]) if q > p)
    return lam**a * math.exp(total / math.pi)


def _rho(family, lam):
    # unsubtracted log Psi(lambda theta) in the theta variable
    def g(th):
        z = (lam * th) ** 2
        return (math.log(z) - math.log(float(family.phi(z)))) / (1.0 + th * th)

    knots = sorted({0.0, min(1.0 / lam, 1.0), max(1.0 / lam, 1.0)})
    total = sum(_quad(g, p, q, "rho integral")[0] for p, q in zip(knots[:-1], knots[1:]) if q > p)
    total += _quad(g, knots[-1], np.inf, "rho integral")[0]
    return math.exp(total / math.pi)


def chi_mp(family, lam):
    """chi at complex lambda with Re lambda > 0, in mpmath arithmetic.

    The log-integral defines an analytic function on the right half plane, so
    Bromwich-type inversions with nodes there are admissible.
    """
    lam = mp.mpmathify(lam)
    a = mp.mpf(family.a)
    L2 = lam * lam
    loglam = mp.log(lam)

    def g(s):
        z = L2 * mp.exp(2 * s)
        return (mp.log(family.phi_mp(z)) - a * (2 * loglam + 2 * s)) / (2 * mp.cosh(s))

    c = -mp.log(abs(lam))
    pts = sorted({-mp.inf, min(c, 0), max(c, 0), mp.inf})
    return mp.power(lam, a) * mp.exp(mp.quad(g, pts) / mp.pi)


def _invert_ladder(family, x, which, order):
    if which == "v":
        F = lambda p: 1 / mp.mpf(_chi(family, float(p)))
    else:
        F = lambda p: 1 / (p * mp.mpf(_chi(family, float(p))))
    return float(laplace.stehfest(F, x, order))


def _crosscheck_ladder(family, x, which, order, tol):
    """Stehfest on the real axis against de Hoog on a vertical line in Re p > 0."""
    s = _invert_ladder(family, x, which, order)
    if which == "v":
        G = lambda p: 1 / chi_mp(family, p)
    else:
        G = lambda p: 1 / (p * chi_mp(family, p))
    h = float(mp.invertlaplace(G, x, method="dehoog"))
    resid = abs(s - h) / abs(h)
    if not resid <= tol:
        raise InversionError(f"ladder {which} inversion disagreement at x={x:.6g}", resid)
    return s, resid


@lru_cache(maxsize=None)
def _ladder_tables(family, order):
    x = table_grid((1e-8, 1e4), per_decade=16)
    v = np.array([_invert_ladder(family, float(t), "v", order) for t in x])
    V = np.array([_invert_ladder(family, float(t), "V", order) for t in x])
    if np.any(v <= 0) or np.any(np.diff(v) / v[1:] > 1e-5):
        raise InversionError(f"non-monotone ladder density for {family.label}")
    if np.any(V <= 0) or np.any(np.diff(V) < 0):
        raise InversionError(f"non-monotone ladder potential for {family.label}")
    return LogLogTable(x, v), LogLogTable(x, V)


# ---------------------------------------------------------------------------
# public operations


def chi(ladder, lam):
    return ladder.chi(lam)


def rho(ladder, lam):
    return ladder.rho(lam)


def ladder_potential(ladder, x, crosscheck=False, tol=1e-4):
    """(V((0, x)), v(x)).

    Exact for the stable family.  Otherwise Gaver-Stehfest inversion of
    1/(lambda chi) and 1/chi at ``x``; with ``crosscheck`` each value is also
    computed by de Hoog's method on a contour in the right half plane and an
    :class:`InversionError` is raised if they differ by more than ``tol``.
    """
    x = float(_positive(x, "x"))
    if ladder.is_stable:
        return ladder.V(x), ladder.v(x)
    fam, order = ladder.family, ladder.inversion_order
    if crosscheck:
        V, _ = _crosscheck_ladder(fam, x, "V", order, tol)
        v, _ = _crosscheck_ladder(fam, x, "v", order, tol)
        return V, v
    return _invert_ladder(fam, x, "V", order), _invert_ladder(fam, x, "v", order)


def halfline_green(ladder, x, y):
    """Green function of the process killed on leaving (0, inf).

    G(x, y) = int_0^x v(z) v(y + z - x) dz            (x <= y)
            = int_{x-y}^x v(z) v(y + z - x) dz        (x > y)

    The endpoint singularity v(w) ~ w^(alpha/2 - 1) is removed by the
    substitution w = s^(2/alpha) on the lower half of the range.
    """
    x = float(_positive(x, "x"))
    y = float(_positive(y, "y"))
    if x == y and ladder.family.alpha <= 1.0:
        # v(z)^2 is not integrable at 0 when alpha <= 1
        return math.inf
    p = 1.0 / ladder.family.a
    v = ladder.v
    shift = abs(y - x)
    # with w = z (x <= y) or w = z - (x - y) (x > y) both branches read
    # int_0^min(x,y) v(w) v(w + |y - x|) dw
    f = lambda w: float(v(w)) * float(v(w + shift)) if w > 0 else 0.0
    top = min(x, y)
    mid = 0.5 * top
    left = lambda s: f(s**p) * p * s ** (p - 1)
    total = _quad(left, 0.0, mid ** (1.0 / p), "half-line Green integral", 1e-10)[0]
    total += _quad(f, mid, top, "half-line Green integral", 1e-10)[0]
    return total


class ExitBound(NamedTuple):
    bound: float
    two_sided: float


def interval_exit_bound(ladder, r, x):
    """Majorants of E_x[tau_(0, r)]: 2 V(r) V(x) and 2 V(r) min(V(x), V(r - x))."""
    r = float(r)
    x = float(x)
    if not 0.0 < x < r:
        raise DomainError(f"need 0 < x < r, got x={x}, r={r}")
    Vr, Vx, Vy = (float(ladder.V(z)) for z in (r, x, r - x))
    return ExitBound(2.0 * Vr * Vx, 2.0 * Vr * min(Vx, Vy))


def stable_halfline_green(alpha, x, y):
    """Closed form for the alpha-stable process on (0, inf), d = 1."""
    if x == y:
        return math.inf if alpha <= 1 else _stable_halfline_diag(alpha, x)
    w = 4.0 * x * y / (x - y) ** 2
    a = alpha / 2.0
    c = 1.0 / (2.0**alpha * Gamma(a) ** 2)
    inner = float(mp.quad(lambda s: s ** (a - 1) * (1 + s) ** -0.5, [0, 1, w] if w > 1 else [0, w]))
    return c * abs(x - y) ** (alpha - 1) * inner


def _stable_halfline_diag(alpha, x):
    # limit y -> x of |x-y|^(alpha-1) int_0^w s^(a-1)(1+s)^(-1/2) ds, alpha > 1
    a = alpha / 2.0
    c = 1.0 / (2.0**alpha * Gamma(a) ** 2)
    # the integral ~ w^(a-1/2)/(a-1/2) with w ~ 4x^2/h^2, giving (2x)^(alpha-1)/(a-1/2)
    return c * (2.0 * x) ** (alpha - 1) / (a - 0.5)


def stable_interval_exit_time(alpha, r, x):
    """E_x[tau_(0, r)] for the 1-d alpha-stable process."""
    return (x * (r - x)) ** (alpha / 2.0) / Gamma(1.0 + alpha)
