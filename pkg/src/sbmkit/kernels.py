"""Free-space Green function and jump kernel of the d-dimensional process.

    G(x) = int_0^inf (4 pi t)^(-d/2) e^{-|x|^2/(4t)} u(t) dt
    j(r) = int_0^inf (4 pi t)^(-d/2) e^{-r^2/(4t)} mu(t) dt

After s = r^2/(4t) both read r^(2-d)/(4 pi^(d/2)) int_0^inf s^(d/2-2) e^{-s} f(r^2/(4s)) ds,
which is integrated adaptively with breakpoints accumulating at s = 0, where
the integrand may carry an integrable power singularity.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma as Gamma

from .bernstein import LogLogTable, SubordinatorModel
from .errors import DomainError, ParameterError, QuadratureError, TransienceError
from .report import VerificationReport

DEFAULT_TOL = 1e-10


def green_const(alpha, d):
    return alpha * Gamma((d - alpha) / 2) / (2 ** (alpha + 1) * math.pi ** (d / 2) * Gamma(1 + alpha / 2))


def jump_const(alpha, d):
    return alpha * Gamma((d + alpha) / 2) / (2 ** (1 - alpha) * math.pi ** (d / 2) * Gamma(1 - alpha / 2))


def stable_green(alpha, d, r):
    """Riesz kernel of the isotropic alpha-stable process (d > alpha)."""
    c = Gamma((d - alpha) / 2) / (2**alpha * math.pi ** (d / 2) * Gamma(alpha / 2))
    return c * np.asarray(r, float) ** (alpha - d)


def stable_jump(alpha, d, r):
    """Levy density of the isotropic alpha-stable process."""
    c = alpha * 2 ** (alpha - 1) * Gamma((d + alpha) / 2) / (math.pi ** (d / 2) * Gamma(1 - alpha / 2))
    return c * np.asarray(r, float) ** (-d - alpha)


@dataclass(frozen=True)
class KernelEvaluator:
    model: SubordinatorModel
    d: int
    tol: float = DEFAULT_TOL
    green_const: float = field(init=False)
    jump_const: float = field(init=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ParameterError(f"dimension must be an integer >= 2, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        alpha = self.model.family.alpha
        object.__setattr__(self, "green_const", green_const(alpha, self.d))
        object.__setattr__(self, "jump_const", jump_const(alpha, self.d))

    @property
    def family(self):
        return self.model.family

    @property
    def transient(self):
        return self.d >= 3 or float(self.model.gamma_A1) < 1.0

    def green(self, r):
        """G as a function of |x| (vectorised)."""
        if not self.transient:
            raise TransienceError(
                f"{self.family.label} is recurrent in d=2 (u(t) ~ c t^(gamma-1) with gamma={self.model.gamma_A1:g})")
        return _radial(r, lambda x: _subordination(self.model.u, x, self.d, self.tol, "Green"))

    def jump(self, r):
        return _radial(r, lambda x: _subordination(self.model.mu, x, self.d, self.tol, "jump kernel"))

    def green_ratio(self, r):
        """G(r) r^(d-alpha) ell(r^-2) / green_const -> 1 as r -> 0."""
        r = np.asarray(r, float)
        alpha = self.family.alpha
        return self.green(r) * r ** (self.d - alpha) * self.family.ell(r**-2.0) / self.green_const

    def jump_ratio(self, r):
        """j(r) r^(d+alpha) / (ell(r^-2) jump_const) -> 1 as r -> 0."""
        r = np.asarray(r, float)
        alpha = self.family.alpha
        return self.jump(r) * r ** (self.d + alpha) / (self.family.ell(r**-2.0) * self.jump_const)

    def jump_table(self, r_range=(1e-4, 1e2), per_decade=32):
        return _kernel_table(self, "jump", r_range, per_decade)

    def green_table(self, r_range=(1e-4, 1e2), per_decade=32):
        return _kernel_table(self, "green", r_range, per_decade)


def _radial(r, f):
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0):
        raise DomainError(f"|x| must be positive, got {r!r}")
    if arr.ndim == 0:
        return f(float(arr))
    return np.array([f(float(x)) for x in arr.ravel()]).reshape(arr.shape)


def _subordination(dens, r, d, tol, what):
    q = r * r / 4.0
    g = lambda s: s ** (d / 2 - 2) * math.exp(-s) * float(dens(q / s))
    knots = [0.0] + list(10.0 ** np.arange(-12, 2)) + [60.0]
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(knots[:-1], knots[1:]):
            v, e = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=tol, limit=200)
            total += v
            err += e
        v, e = integrate.quad(g, 60.0, np.inf, epsabs=0.0, epsrel=tol, limit=200)
        total += v
        err += e
    if not math.isfinite(total) or err > 1e3 * tol * abs(total):
        raise QuadratureError(f"{what} quadrature at r={r:.4g}", err)
    return r ** (2 - d) / (4 * math.pi ** (d / 2)) * total


@lru_cache(maxsize=None)
def _kernel_table(ke, which, r_range, per_decade):
    lo, hi = np.log10(r_range[0]), np.log10(r_range[1])
    r = np.logspace(lo, hi, int(round((hi - lo) * per_decade)) + 1)
    vals = ke.jump(r) if which == "jump" else ke.green(r)
    return LogLogTable(r, vals)


def green_free(ke, x):
    """G(x) for a point x (or a radius)."""
    return ke.green(np.linalg.norm(np.atleast_1d(x)) if np.ndim(x) else x)


def jump_kernel(ke, r):
    return ke.jump(r)


# ---------------------------------------------------------------------------
# verifiers


def asymptotic_ratios(ke, radii=(1e-1, 1e-2, 1e-3, 1e-4)):
    """Green and jump ratios to their small-distance predictions."""
    radii = np.asarray(radii, float)
    return {"r": radii, "green": np.asarray(ke.green_ratio(radii)),
            "jump": np.asarray(ke.jump_ratio(radii))}


def _monotone_to_one(values):
    dev = np.abs(np.asarray(values) - 1.0)
    return bool(np.all(np.diff(dev) <= 1e-12))


def check_asymptotics(ke, radii=(1e-1, 1e-2, 1e-3, 1e-4), band=0.02, at=1e-3):
    """Ratios at ``at`` within 1 +- band and approaching 1 monotonically."""
    res = asymptotic_ratios(ke, radii)
    r = res["r"]
    idx = int(np.argmin(np.abs(np.log(r / at))))
    entries = {}
    ok = True
    for name in ("green", "jump"):
        vals = res[name]
        inside = bool(abs(vals[idx] - 1.0) <= band)
        mono = _monotone_to_one(vals)
        entries[name] = {"ratios": vals, "within_band": inside, "monotone": mono}
        ok = ok and inside and mono
    return VerificationReport(
        theorem_tag="Green and jump kernel asymptotics",
        passed=ok,
        constants={"green_const": ke.green_const, "jump_const": ke.jump_const,
                   "green_ratio_at": float(res["green"][idx]), "jump_ratio_at": float(res["jump"][idx])},
        grids={"r": r, "d": ke.d, "band": band},
        details=entries,
    )


def check_lemma_lJ(ke, r_grid=None):
    """Largest grid radius r3 below which jump_const/2 <= j(r) r^(d+alpha)/ell(r^-2) <= 2 jump_const."""
    r = np.sort(np.logspace(-6, 0, 61) if r_grid is None else np.asarray(r_grid, float))
    ratio = np.asarray(ke.jump_ratio(r))
    inside = (ratio >= 0.5) & (ratio <= 2.0)
    r3 = 0.0
    for k in range(len(r)):
        if inside[: k + 1].all():
            r3 = float(r[k])
        else:
            break
    return VerificationReport(
        theorem_tag="two-sided jump kernel bound",
        passed=r3 > 0,
        constants={"r3": r3, "lower": 0.5 * ke.jump_const, "upper": 2.0 * ke.jump_const},
        grids={"r": [float(r[0]), float(r[-1]), len(r)]},
        details={"r": r, "ratio": ratio},
    )


# regular-variation inequalities
def _regvar_forms(family):
    """Pointwise forms f (C = sup_{s<r} f(s)/f(r)) and integral forms
    (integrand, 'head' or 'tail', comparison function of r)."""
    alpha = family.alpha
    a = alpha / 2.0
    L = lambda s: family.ell(np.asarray(s, float) ** -2.0)
    sq = lambda s: np.sqrt(L(s))
    pointwise = {
        "ineq1": lambda s: s**a / sq(s),
        "ineq2": lambda s: s ** (1 - a) / sq(s),
        "ineq7": lambda s: s ** (1 - a) * sq(s),
    }
    integral = {
        "ineq3": (lambda s: sq(s) / s ** (1 + a), "tail", lambda r: sq(r) / r**a),
        "ineq4": (lambda s: L(s) / s ** (1 + alpha), "tail", lambda r: L(r) / r**alpha),
        "ineq5": (lambda s: L(s) * s ** (1 - alpha), "head", lambda r: L(r) * r ** (2 - alpha)),
        "ineq6": (lambda s: sq(s) / s**a, "head", lambda r: sq(r) * r ** (1 - a)),
        "ineq8": (lambda s: s ** (alpha - 1) / L(s), "head", lambda r: r**alpha / L(r)),
    }
    return pointwise, integral


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _cumulative(f, r, side):
    """int_0^{r_k} f (side='head') or int_{r_k}^inf f (side='tail') on a log grid.

    Pieces between consecutive grid points use Gauss-Legendre in log s; the
    piece beyond the grid is done adaptively.
    """
    x = np.log(r)
    mid, half = 0.5 * (x[1:] + x[:-1]), 0.5 * (x[1:] - x[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    s = np.exp(nodes)
    pieces = (np.asarray(f(s)) * s) @ _GL_W * half
    g = lambda t: float(f(t))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if side == "tail":
            end = _integral(g, r[-1], np.inf)
            return end + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        start = _integral(g, 0.0, r[0])
        return start + np.concatenate([[0.0], np.cumsum(pieces)])


def _integral(g, lo, hi):
    if np.isinf(hi):
        knots = [lo * 10.0**k for k in range(0, 13)]
        val = sum(integrate.quad(g, p, q, epsabs=0, epsrel=1e-12, limit=200)[0]
                  for p, q in zip(knots[:-1], knots[1:]))
        return val + integrate.quad(g, knots[-1], np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    knots = [0.0] + [hi * 10.0**-k for k in range(12, -1, -1)]
    return sum(integrate.quad(g, p, q, epsabs=0, epsrel=1e-12, limit=200)[0]
               for p, q in zip(knots[:-1], knots[1:]))


def _regvar_constants(family, r4, n):
    r = np.logspace(np.log10(4 * r4) - 6, np.log10(4 * r4), n)
    pointwise, integral = _regvar_forms(family)
    out = {}
    for name, f in pointwise.items():
        v = f(r)
        # sup over s <= r of f(s)/f(r), pairs taken on the grid
        out[name] = float(np.max(np.maximum.accumulate(v) / v))
    for name, (f, side, rhs) in integral.items():
        out[name] = float(np.max(_cumulative(f, r, side) / rhs(r)))
    return out, r


def check_regvar_inequalities(family, r4=None, n=49, c_max=100.0, stability=0.05):
    """Minimal admissible constants for the eight regular-variation inequalities.

    Constants are computed on a log grid of r in (4 r4 1e-6, 4 r4] and again on
    the grid with twice the resolution; the check passes when every constant
    is finite, at most ``c_max`` and stable to ``stability`` under refinement.
    With ``r4=None`` the largest r4 in {1, 1/2, 1/4, ...} meeting this is used.
    """
    candidates = [r4] if r4 is not None else [2.0**-k for k in range(0, 11)]
    report = None
    for cand in candidates:
        c1, r = _regvar_constants(family, cand, n)
        c2, _ = _regvar_constants(family, cand, 2 * n - 1)
        rel = {k: abs(c2[k] / c1[k] - 1.0) for k in c1}
        ok = all(np.isfinite(c2[k]) and c2[k] <= c_max and rel[k] <= stability for k in c1)
        report = VerificationReport(
            theorem_tag="regular-variation inequalities",
            passed=bool(ok),
            constants={"r4": cand, **{k: c2[k] for k in sorted(c2)}},
            grids={"r": [float(r[0]), float(r[-1]), n], "refined_points": 2 * n - 1},
            details={"coarse": c1, "refinement_change": rel},
        )
        if ok:
            break
    return report
