"""Numerical inversion of Laplace transforms.

Gaver-Stehfest is the primary method; the fixed Talbot contour is run as an
independent check and the value is rejected when the two disagree.  Both are
taken from mpmath, which evaluates the transform in extended precision.
"""

import mpmath as mp

from .errors import InversionError

DEFAULT_ORDER = 16
DEFAULT_TOL = 1e-6


def stehfest(F, t, order=DEFAULT_ORDER):
    return mp.invertlaplace(F, t, method="stehfest", degree=order)


def talbot(F, t):
    return mp.invertlaplace(F, t, method="talbot")


def invert(F, t, order=DEFAULT_ORDER, tol=DEFAULT_TOL):
    """Invert the transform ``F`` (mpmath-callable, analytic off the negative
    axis) at ``t > 0``.

    Returns the Stehfest value as a float.  When it disagrees with Talbot by
    more than ``tol`` the Stehfest order is raised (up to twice ``order``);
    if that does not help, :class:`InversionError` is raised carrying the
    smallest relative discrepancy reached.
    """
    tb = talbot(F, t)
    scale = abs(tb) if tb != 0 else mp.mpf(1)
    best = float("inf")
    for deg in _orders(order):
        s = stehfest(F, t, deg)
        resid = float(abs(s - tb) / scale)
        if resid <= tol:
            return float(s)
        best = min(best, resid)
    raise InversionError(f"Stehfest/Talbot disagreement at t={float(t):.6g}", best)


def _orders(order):
    out = [order]
    while out[-1] < 2 * order:
        out.append(out[-1] + 4 if out[-1] + 4 <= 2 * order else 2 * order)
    return out


def invert_many(F, ts, order=DEFAULT_ORDER, tol=DEFAULT_TOL):
    return [invert(F, t, order, tol) for t in ts]
