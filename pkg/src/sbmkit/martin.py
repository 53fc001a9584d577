"""Martin kernel estimates M_D(x, y) = G_D(x, y) / G_D(x0, y) near the boundary.

G_D(., y) is estimated from paths started at y.  The default estimator uses
Hunt's formula

    G_D(x, y) = G(x - y) - E_y[G(X_tau - x)],

whose Monte Carlo part is bounded because X_tau lies outside D.  The
alternative ``method="kde"`` accumulates the time the paths spend near x
with an Epanechnikov kernel (occupation density, using G_D(x, y) = G_D(y, x)).
All starting points share path indices, so estimates at different y are
positively correlated and their differences are much less noisy.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import beta as Beta
from scipy.special import betainc, betaincc
from scipy.special import gamma as Gamma

from .errors import ParameterError
from .estimators import Patch, _orthonormal_complement, levy_harmonic_measures, scaled_config
from .kernels import KernelEvaluator
from .report import VerificationReport, loglog_slope
from .simulate import Functionals, PathConfig, simulate_paths


@dataclass
class MartinProbe:
    domain: object
    x0: np.ndarray
    x_grid: np.ndarray
    z: np.ndarray
    approach: np.ndarray
    bandwidth: float = 0.05

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float)
        self.x_grid = np.atleast_2d(np.asarray(self.x_grid, float))
        self.z = np.asarray(self.z, float)
        self.approach = np.atleast_2d(np.asarray(self.approach, float))
        dist = np.linalg.norm(self.approach - self.z, axis=1)
        if np.any(np.diff(dist) >= 0):
            raise ParameterError("approach points must get strictly closer to z")
        if not np.all(np.atleast_1d(self.domain.contains(self.approach))):
            raise ParameterError("approach points must lie in the domain")
        evals = np.vstack([self.x0[None, :], self.x_grid])
        if not np.all(np.atleast_1d(self.domain.contains(evals))):
            raise ParameterError("x0 and x_grid must lie in the domain")
        sep = np.linalg.norm(evals[:, None, :] - self.approach[None, :, :], axis=2)
        if sep.min() < 2 * self.bandwidth:
            raise ParameterError("x0 and x_grid must stay 2 bandwidths away from the approach points")

    @classmethod
    def geometric(cls, domain, z, x0, x_grid, r0=0.5, levels=6, bandwidth=0.05):
        """Approach along the inner normal at z with |y_m - z| = 2^-m r0, m = 1..levels."""
        z = np.asarray(z, float)
        A = domain.witness(z, min(r0, domain.R_char))
        n = (A - z) / np.linalg.norm(A - z)
        ys = z + (r0 * 0.5 ** np.arange(1, levels + 1))[:, None] * n
        return cls(domain, x0, x_grid, z, ys, bandwidth)

    @property
    def levels(self):
        return len(self.approach)


# ---------------------------------------------------------------------------
# stable ball oracles


def stable_ball_green(alpha, d, R, x, y):
    """Green function of B(0, R) for the isotropic alpha-stable process (d > alpha)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    h = float(np.linalg.norm(x - y))
    w = (R * R - x @ x) * (R * R - y @ y) / (R * R * h * h)
    c = Gamma(d / 2) / (2**alpha * math.pi ** (d / 2) * Gamma(alpha / 2) ** 2)
    a, b = alpha / 2, d / 2 - alpha / 2
    # int_0^w s^(a-1) (1+s)^(-d/2) ds as an incomplete beta function
    if w <= 1:
        val = betainc(a, b, w / (1 + w))
    else:
        val = betaincc(b, a, 1 / (1 + w))
    val *= Beta(a, b)
    return c * h ** (alpha - d) * val


def stable_ball_martin(alpha, d, R, x, z, x0):
    """lim_{y -> z} G_B(x, y)/G_B(x0, y) for |z| = R."""
    x, z, x0 = (np.asarray(v, float) for v in (x, z, x0))
    k = lambda p: (R * R - p @ p) ** (alpha / 2) / np.linalg.norm(p - z) ** d
    return k(x) / k(x0)


# ---------------------------------------------------------------------------
# estimation


def _green_table(model, d):
    return KernelEvaluator(model, d).green_table()


def _hunt_terms(G, batch, pts, y):
    """Per-path values G(x - y) - G(X_tau - x) for each evaluation point x (N, P)."""
    direct = G(np.linalg.norm(pts - y, axis=1))
    far = G(np.linalg.norm(batch.exit_point[:, None, :] - pts[None, :, :], axis=2))
    return direct[None, :] - far


def _kde_terms(batch):
    return batch.kde_integrals


def _green_samples(probe, model, cfg, N, method, stream, workers):
    """Per-path samples of G_D(x, y_m) for x in [x0] + x_grid, one array (N, P) per m."""
    d = probe.domain.d
    pts = np.vstack([probe.x0[None, :], probe.x_grid])
    fun = None
    if method == "kde":
        dist = np.asarray(probe.domain.distance_to_boundary(pts), float)
        h = np.minimum(probe.bandwidth, 0.5 * dist)
        fun = Functionals(kde_points=pts, kde_bandwidth=h)
    elif method != "hunt":
        raise ParameterError(f"unknown method {method!r}")
    G = _green_table(model, d)
    out = []
    for y in probe.approach:
        b = simulate_paths(model, probe.domain, np.repeat(y[None, :], N, axis=0), cfg, stream=stream,
                           functionals=fun, workers=workers)
        out.append(_hunt_terms(G, b, pts, y) if method == "hunt" else _kde_terms(b))
    return out


def _ratio_influence(g):
    """M = mean g[:, j]/mean g[:, 0] and the per-path linearisation of its error."""
    m = g.mean(axis=0)
    M = m / m[0]
    psi = (g - M[None, :] * g[:, :1]) / m[0]
    return M, psi


def estimate_martin(probe, model, cfg=None, N=20_000, method="hunt", stream=0, workers=None, min_hits=50):
    """Table of M-hat(x, y_m) with standard errors.

    Returns dict with M (levels, n_x), se (levels, n_x), the Green estimates
    G (levels, 1 + n_x) including x0 in column 0, and the per-level influence
    arrays used for paired comparisons between levels.
    """
    cfg = cfg or PathConfig()
    samples = _green_samples(probe, model, cfg, N, method, stream, workers)
    Ms, ses, Gs, psis = [], [], [], []
    warn = []
    for g in samples:
        if method == "kde" and np.any(np.count_nonzero(g, axis=0) < min_hits):
            warn.append("kernel-density bandwidth starved at some evaluation points")
        M, psi = _ratio_influence(g)
        Ms.append(M[1:])
        ses.append(psi[:, 1:].std(axis=0, ddof=1) / math.sqrt(len(g)))
        Gs.append(g.mean(axis=0))
        psis.append(psi[:, 1:])
    return {"M": np.array(Ms), "se": np.array(ses), "G": np.array(Gs), "psi": psis,
            "method": method, "warnings": sorted(set(warn))}


def martin_limit_report(probe, model, cfg=None, N=20_000, method="hunt", stream=0, workers=None, oracle=None):
    """Cauchy criterion along the approach sequence, with an optional oracle.

    ``oracle(x, y)`` returns the exact finite-y ratio; when given, every
    M-hat must agree with it within 3 SE.  The Cauchy part requires the last
    successive difference to be within 3 paired SE and the successive
    differences to shrink on average.
    """
    est = estimate_martin(probe, model, cfg, N, method, stream, workers)
    M, se, psi = est["M"], est["se"], est["psi"]
    n = len(psi[0])
    diffs = np.abs(np.diff(M, axis=0))
    dse = np.array([(psi[m + 1] - psi[m]).std(axis=0, ddof=1) / math.sqrt(n) for m in range(len(psi) - 1)])
    cauchy_last = bool(np.all(diffs[-1] <= 3 * dse[-1]))
    shrinking = bool(np.mean(diffs[-1]) <= np.mean(diffs[0]))
    constants = {"last_difference": float(diffs[-1].max()), "first_difference": float(diffs[0].max())}
    details = {"M": M, "se": se, "differences": diffs, "difference_se": dse, "method": method,
               "approach": probe.approach, "x_grid": probe.x_grid}
    passed = cauchy_last and shrinking
    if oracle is not None:
        exact = np.array([[oracle(x, y) for x in probe.x_grid] for y in probe.approach])
        z = np.abs(M - exact) / se
        details["oracle"] = exact
        details["oracle_z"] = z
        constants["max_oracle_z"] = float(z.max())
        passed = passed and bool(np.all(z <= 3.0))
    return VerificationReport("Martin kernel boundary limit", bool(passed), constants=constants,
                              grids={"levels": probe.levels, "N": N}, mc_se=float(se.max()),
                              details=details, warnings=est["warnings"])


def oscillation_decay(probe, model, cfg=None, N=20_000, r=None, n_pairs=5, far_points=None, stream=0, workers=None):
    """Fit of |M(w, x) - M(w, y)| against |x - y|/r for x, y in D ∩ B(Q, r) near Q = probe.z.

    w ranges over ``far_points`` (default: probe.x_grid); x is Q + (r/2) n with
    n the inner normal, and y_k = x + (r/2) 2^-k t for a tangent t.  The
    fitted exponent beta-hat is the weighted log-log slope; pass requires
    beta-hat - 2 SE > 0.
    """
    cfg = cfg or PathConfig()
    dom = probe.domain
    Q = probe.z
    r = r or 0.5 * np.linalg.norm(probe.approach[0] - Q) * 2
    A = dom.witness(Q, r)
    nrm = (A - Q) / np.linalg.norm(A - Q)
    t = _orthonormal_complement(nrm)[0]
    x = Q + 0.5 * r * nrm
    seps = 0.5 * r * 0.5 ** np.arange(n_pairs)
    starts = np.vstack([x[None, :], x + seps[:, None] * t])
    if not np.all(np.atleast_1d(dom.contains(starts))) or np.any(np.linalg.norm(starts - Q, axis=1) >= r):
        raise ParameterError("oscillation pairs must lie in D ∩ B(Q, r)")
    W = probe.x_grid if far_points is None else np.atleast_2d(np.asarray(far_points, float))
    pts = np.vstack([probe.x0[None, :], W])
    G = _green_table(model, dom.d)
    infl = []
    Mv = []
    for y in starts:
        b = simulate_paths(model, dom, np.repeat(y[None, :], N, axis=0), cfg, stream=stream, workers=workers)
        M, psi = _ratio_influence(_hunt_terms(G, b, pts, y))
        Mv.append(M[1:])
        infl.append(psi[:, 1:])
    Mv = np.array(Mv)
    osc = np.abs(Mv[1:] - Mv[0][None, :])
    osc_se = np.array([(infl[k + 1] - infl[0]).std(axis=0, ddof=1) / math.sqrt(N) for k in range(n_pairs)])
    # pool the far points: the largest oscillation at each separation
    j = np.argmax(osc, axis=1)
    y_osc = osc[np.arange(n_pairs), j]
    y_se = osc_se[np.arange(n_pairs), j]
    ok = y_osc > 2 * y_se
    if ok.sum() >= 3:
        beta, beta_se = loglog_slope(seps[ok] / r, y_osc[ok], y_se[ok] / y_osc[ok])
    else:
        beta, beta_se = float("nan"), float("nan")
    passed = bool(np.isfinite(beta) and beta - 2 * beta_se > 0)
    return VerificationReport(
        "Martin kernel oscillation decay", passed,
        constants={"beta_hat": beta, "beta_se": beta_se},
        grids={"separation_over_r": seps / r, "r": r, "N": N},
        mc_se=float(np.max(y_se)),
        details={"oscillation": y_osc, "oscillation_se": y_se, "resolved": ok, "M": Mv},
    )


def growth_lemma_check(model, domain, Q, r, k_max=3, N=10_000, cfg=None, stream=0, workers=None):
    """Growth of a harmonic measure towards the boundary point Q.

    u is the harmonic measure, for D ∩ B(Q, r), of a sector outside B(Q, r);
    with A_k = A_{(kappa/2)^k r}(Q) the ratios u(A_0)/u(A_k) are fitted by
    c (2/kappa)^(gamma k) times the matching ell-ratio.  Pass when the fitted
    gamma is below alpha.
    """
    cfg = cfg or PathConfig()
    Q = np.asarray(Q, float)
    kappa = domain.kappa
    fam = model.family
    A0 = domain.witness(Q, r)
    nrm = (A0 - Q) / np.linalg.norm(A0 - Q)
    e = _orthonormal_complement(nrm)[0]
    patch = Patch(tuple(Q), tuple(e), 1.5 * r, 3.0 * r)
    ks = np.arange(k_max + 1)
    pts = np.array([domain.witness(Q, (kappa / 2) ** k * r) for k in ks])
    U, SE = levy_harmonic_measures(model, domain, pts, [patch], scaled_config(cfg, model, r), N,
                                   clip=(Q, r), stream=stream, workers=workers)
    u, s = U[:, 0], SE[:, 0]
    ratio = u[0] / u
    ell_ratio = fam.ell((kappa / 2) ** (-2.0 * ks) * r**-2.0) / fam.ell(r**-2.0)
    y = np.log(ratio / ell_ratio)
    sig = np.hypot(s / u, s[0] / u[0])
    sig[0] = max(sig[1:].min(), 1e-12) if k_max > 0 else 1.0
    w = 1.0 / sig**2
    X = np.vstack([ks * math.log(2 / kappa), np.ones_like(ks, dtype=float)]).T
    coef = np.linalg.lstsq(X * np.sqrt(w)[:, None], y * np.sqrt(w), rcond=None)[0]
    gamma_hat, log_c = float(coef[0]), float(coef[1])
    warn = ["starvation at deep k"] if np.any(u < 10 * s) else []
    return VerificationReport(
        "boundary growth lemma", bool(gamma_hat < fam.alpha),
        constants={"gamma_hat": gamma_hat, "c_hat": math.exp(log_c), "alpha": fam.alpha},
        grids={"k": ks, "r": r, "N": N, "kappa": kappa},
        mc_se=float(np.max(s / u)),
        details={"u": u, "se": s, "ratio": ratio, "ell_ratio": ell_ratio, "points": pts},
        warnings=warn,
    )
