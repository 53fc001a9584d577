"""Monte Carlo estimators built on the path simulator.

Harmonic measures of exterior patches are estimated through the Levy system:
for a set P at positive distance from the domain U,

    P_x(X_tau_U in P) = E_x int_0^tau_U J_P(X_t) dt,    J_P(z) = int_P J(z - y) dy,

so each path contributes a smooth time integral instead of a 0/1 indicator.
J_P is tabulated once per experiment by cubature over P and accumulated by
the compiled path kernel.  Harmonic functions used by the Harnack, boundary
Harnack and Carleson verifiers are exactly such harmonic measures.

Time steps are tied to the natural time scale of each experiment: for a
region of size r the step is min(cfg.dt, dt_fraction / phi(r^-2)).
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from .domains import ball
from .errors import ParameterError
from .kernels import KernelEvaluator
from .report import VerificationReport, loglog_slope, no_upward_trend
from .simulate import Functionals, PathConfig, simulate_paths

DT_FRACTION = 1e-3


def scaled_config(cfg, model, r, dt_fraction=DT_FRACTION):
    """cfg with dt capped at dt_fraction times the exit-time scale of B(., r)."""
    scale = 1.0 / float(model.family.phi(r**-2.0))
    return replace(cfg, dt=min(cfg.dt, dt_fraction * scale))


# ---------------------------------------------------------------------------
# cubature of J over exterior patches


@dataclass(frozen=True)
class Patch:
    """Spherical-shell sector {rho1 <= |y - c| <= rho2, angle(y - c, axis) <= half_angle}."""

    center: tuple
    axis: tuple
    rho1: float
    rho2: float
    half_angle: float = math.pi / 4

    @property
    def d(self):
        return len(self.center)

    def contains(self, y):
        y = np.atleast_2d(y) - np.asarray(self.center)
        r = np.linalg.norm(y, axis=1)
        cos = (y @ np.asarray(self.axis)) / np.maximum(r, 1e-300)
        return (r >= self.rho1) & (r <= self.rho2) & (cos >= math.cos(self.half_angle))

    def nodes(self, n_r=10, n_a=10, n_az=20):
        """Cubature nodes and weights (the weights sum to the patch volume)."""
        d = self.d
        c = np.asarray(self.center, float)
        e = np.asarray(self.axis, float)
        e = e / np.linalg.norm(e)
        x, w = np.polynomial.legendre.leggauss(n_r)
        rho = 0.5 * (self.rho2 + self.rho1) + 0.5 * (self.rho2 - self.rho1) * x
        wr = 0.5 * (self.rho2 - self.rho1) * w * rho ** (d - 1)
        basis = _orthonormal_complement(e)
        xa, wa = np.polynomial.legendre.leggauss(n_a)
        if d == 2:
            th = self.half_angle * xa
            dirs = np.cos(th)[:, None] * e + np.sin(th)[:, None] * basis[0]
            wdir = self.half_angle * wa
        elif d == 3:
            th = 0.5 * self.half_angle * (xa + 1)
            az = 2 * math.pi * np.arange(n_az) / n_az
            T, A = np.meshgrid(th, az, indexing="ij")
            dirs = (np.cos(T)[..., None] * e + np.sin(T)[..., None]
                    * (np.cos(A)[..., None] * basis[0] + np.sin(A)[..., None] * basis[1])).reshape(-1, 3)
            wdir = np.repeat(0.5 * self.half_angle * wa * np.sin(th), n_az) * (2 * math.pi / n_az)
        else:
            raise ParameterError("patches are implemented for d = 2, 3")
        pts = c + (rho[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        wts = (wr[:, None] * wdir[None, :]).ravel()
        return pts, wts

    def volume(self):
        return float(self.nodes()[1].sum())


def _orthonormal_complement(e):
    d = len(e)
    out = []
    for i in np.argsort(np.abs(e)):
        v = np.zeros(d)
        v[i] = 1.0
        for u in [e] + out:
            v -= (v @ u) * u
        n = np.linalg.norm(v)
        if n > 1e-8:
            out.append(v / n)
        if len(out) == d - 1:
            break
    return out


def patch_flux(ke, patch, z, chunk=200_000):
    """J_P(z) = int_P J(z - y) dy at the points z (n, d)."""
    pts, wts = patch.nodes()
    z = np.atleast_2d(z)
    J = ke.jump_table()
    out = np.empty(len(z))
    step = max(1, chunk // len(pts))
    for i in range(0, len(z), step):
        r = np.linalg.norm(z[i:i + step, None, :] - pts[None, :, :], axis=2)
        out[i:i + step] = J(r) @ wts
    return out


def patch_grid_functionals(ke, patches, lo, hi, n):
    """Functionals holding J_P for each patch on an n^d grid over the box [lo, hi]."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    vals = np.array([patch_flux(ke, p, mesh).reshape((n,) * len(lo)) for p in patches])
    return Functionals(grid_values=vals, grid_origin=lo, grid_step=(hi - lo) / (n - 1))


def shell_flux_radial(ke, a, b, rho, n_s=16, n_t=16):
    """J_C(z) for the shell C = {a <= |y| <= b} as a function of rho = |z| < a."""
    d = ke.d
    rho = np.asarray(rho, float)
    J = ke.jump_table()
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    # nodes graded towards s = a and theta = 0 where J(z - y) peaks as rho -> a
    se = a + (b - a) * np.concatenate([[0.0], np.logspace(-7, 0, 15)])
    s = np.concatenate([0.5 * (p + q) + 0.5 * (q - p) * xs for p, q in zip(se[:-1], se[1:])])
    wsv = np.concatenate([0.5 * (q - p) * ws for p, q in zip(se[:-1], se[1:])])
    te = np.concatenate([[0.0], np.pi * np.logspace(-7, 0, 15)])
    th = np.concatenate([0.5 * (p + q) + 0.5 * (q - p) * xs for p, q in zip(te[:-1], te[1:])])
    wt = np.concatenate([0.5 * (q - p) * ws for p, q in zip(te[:-1], te[1:])])
    sphere = 2.0 if d == 2 else 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)
    wt = wt * np.sin(th) ** (d - 2) * sphere
    out = np.empty(rho.shape)
    cos = np.cos(th)
    for i, r in enumerate(rho.ravel()):
        dist = np.sqrt(np.maximum(r * r + s[:, None] ** 2 - 2 * r * s[:, None] * cos[None, :], 0.0))
        out.flat[i] = (wsv * s ** (d - 1)) @ (J(dist) @ wt)
    return out


# ---------------------------------------------------------------------------
# harmonic measures


def levy_harmonic_measures(model, domain, points, patches, cfg, N, clip=None, grid_n=None,
                           stream=0, workers=None, ke=None):
    """u_P(x) = P_x(X_tau in P) for each patch P and start x, via the Levy system.

    Returns (U, SE) with shape (n_points, n_patches).  Every start point uses
    the same path indices (common random numbers), which makes comparisons
    between points much less noisy than independent runs.
    """
    ke = ke or KernelEvaluator(model, domain.d)
    points = np.atleast_2d(np.asarray(points, float))
    if clip is not None:
        c, R = np.asarray(clip[0], float), float(clip[1])
        lo, hi = c - R, c + R
    else:
        lo, hi = (np.asarray(v, float) for v in domain.bounding_box)
    n = grid_n or (41 if domain.d == 2 else 21)
    fun = patch_grid_functionals(ke, patches, lo, hi, n)
    U = np.empty((len(points), len(patches)))
    SE = np.empty_like(U)
    for i, x in enumerate(points):
        batch = simulate_paths(model, domain, np.repeat(x[None, :], N, axis=0), cfg, stream=stream,
                               functionals=fun, workers=workers, clip=clip)
        U[i] = batch.grid_integrals.mean(axis=0)
        SE[i] = batch.grid_integrals.std(axis=0, ddof=1) / math.sqrt(N)
    return U, SE


def _starvation(U, SE, what):
    if np.any(U < 10 * SE):
        msg = f"{what}: harmonic measure below 10 standard errors at some points"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return [msg]
    return []


# ---------------------------------------------------------------------------
# exit times


def estimate_exit_time(model, domain, x_grid, cfg, N, stream=0, workers=None):
    """Mean exit time from each point of x_grid with its standard error.

    Returns a dict of arrays: x, mean, se, n_horizon.  Paths that reach
    cfg.t_max are counted per point and included at t_max (a lower bound).
    """
    x_grid = np.atleast_2d(np.asarray(x_grid, float))
    if not np.all(np.atleast_1d(domain.contains(x_grid))):
        raise ParameterError("x_grid must lie in the domain")
    mean, se, nh = [], [], []
    for x in x_grid:
        b = simulate_paths(model, domain, np.repeat(x[None, :], N, axis=0), cfg, stream=stream,
                           workers=workers, on_horizon="flag")
        tau = np.where(b.status == 1, cfg.t_max, b.exit_time)
        mean.append(tau.mean())
        se.append(tau.std(ddof=1) / math.sqrt(N))
        nh.append(b.n_horizon)
    return {"x": x_grid, "mean": np.array(mean), "se": np.array(se), "n_horizon": np.array(nh)}


def upper_exit_envelope(family, r, dist):
    """r^(a) (r - |x|)^(a) / (ell(r^-2) ell((r - |x|)^-2))^(1/2), a = alpha/2."""
    a = family.a
    return (r * dist) ** a / np.sqrt(family.ell(r**-2.0) * family.ell(np.asarray(dist, float) ** -2.0))


def lower_exit_envelope(family, r):
    return r**family.alpha / float(family.ell(r**-2.0))


def _flat(r, values, max_slope=0.1, max_ratio=3.0):
    values = np.asarray(values, float)
    if len(values) < 2 or not np.all(np.isfinite(values)) or np.any(values <= 0):
        return False, float("nan"), float("nan")
    slope, _ = loglog_slope(r, values)
    spread = float(values.max() / values.min())
    return (abs(slope) <= max_slope and spread <= max_ratio), slope, spread


def exit_time_envelopes(model, d, cfg, N, r_grid=(0.5, 0.25, 0.125), fractions=(0.0, 0.25, 0.5, 0.75),
                        stream=0, workers=None):
    """Fitted constants of the upper and lower mean-exit-time envelopes on balls.

    For each r: C_up(r) = max_x E_x tau / upper envelope over |x| = f r, and
    C_low(r) = E_0 tau / (r^alpha / ell(r^-2)).  Pass when C_low > 0 and both
    sequences show no trend in r (|log-log slope| <= 0.1, max/min <= 3).
    """
    fam = model.family
    rows = []
    for r in r_grid:
        dom = ball(d, r)
        xs = np.zeros((len(fractions), d))
        xs[:, 0] = np.asarray(fractions) * r
        est = estimate_exit_time(model, dom, xs, scaled_config(cfg, model, r), N, stream, workers)
        up = est["mean"] / upper_exit_envelope(fam, r, r - xs[:, 0])
        low = est["mean"][0] / lower_exit_envelope(fam, r)
        rows.append({"r": r, "mean": est["mean"], "se": est["se"], "C_up": float(up.max()),
                     "C_low": float(low), "n_horizon": est["n_horizon"]})
    r = np.array(r_grid)
    C_up = np.array([row["C_up"] for row in rows])
    C_low = np.array([row["C_low"] for row in rows])
    ok_up, s_up, q_up = _flat(r, C_up)
    ok_low, s_low, q_low = _flat(r, C_low)
    # monotone decrease towards the boundary, within 3 SE
    mono = all(bool(np.all(np.diff(row["mean"]) <= 3 * np.hypot(row["se"][1:], row["se"][:-1]))) for row in rows)
    passed = bool(ok_up and ok_low and C_low.min() > 0 and mono)
    return VerificationReport(
        "exit-time envelopes", passed,
        constants={"C_up": C_up, "C_low": C_low, "slope_up": s_up, "slope_low": s_low,
                   "spread_up": q_up, "spread_low": q_low},
        grids={"r": r, "fractions": list(fractions), "N": N},
        mc_se=float(max(np.max(row["se"]) for row in rows)),
        details={"rows": rows, "monotone_to_boundary": mono, "family": fam.label, "d": d},
    )


def stable_ball_exit_time(alpha, d, r, x):
    """E_x tau_B(0, r) for the isotropic alpha-stable process."""
    x = np.atleast_2d(np.asarray(x, float))
    c = math.gamma(d / 2) / (2**alpha * math.gamma(1 + alpha / 2) * math.gamma((d + alpha) / 2))
    return c * (r * r - np.sum(x * x, axis=1)) ** (alpha / 2)


# ---------------------------------------------------------------------------
# Poisson kernel of a ball


def stable_ball_poisson_kernel(alpha, d, r, x, y):
    """Poisson kernel of B(0, r) for the isotropic alpha-stable process, |y| > r."""
    x = np.asarray(x, float)
    y = np.atleast_2d(np.asarray(y, float))
    c = math.gamma(d / 2) * math.pi ** (-d / 2 - 1) * math.sin(math.pi * alpha / 2)
    ratio = (r * r - x @ x) / (np.sum(y * y, axis=1) - r * r)
    return c * ratio ** (alpha / 2) * np.linalg.norm(y - x, axis=1) ** -d


def estimate_poisson_kernel(model, domain, x, edges, cfg, N, stream=0, workers=None, n_radial=2001,
                            refine_levels=16):
    """Cell averages of the Poisson kernel K_D(x, .) over radial exterior shells.

    ``domain`` must be a ball and ``edges`` increasing radii >= its radius
    (about its centre).  Two estimators of the same numbers are returned:
    the histogram of jump exits per shell divided by the shell volume, and
    the Levy-system form E_x int_0^tau J_C(X_t) dt / |C|, i.e. the integral of
    the MC occupation density against J.  Both come from the same paths, so
    their paired difference has its own standard error.

    Jump exits are classified by comparing |X_tau - X_tau-| with the bridge
    resolution sqrt(2 dS / 2^L), so the bisection depth is raised to
    ``refine_levels`` here; at the default depth a few percent of far
    landings after a large clock increment are labelled continuous.
    """
    cfg = replace(cfg, refine_levels=max(cfg.refine_levels, refine_levels))
    if domain.kind != "ball":
        raise ParameterError("estimate_poisson_kernel expects a ball")
    c = np.asarray(domain.geometry["center"], float)
    R = domain.geometry["radius"]
    edges = np.asarray(edges, float)
    if edges[0] < R or np.any(np.diff(edges) <= 0):
        raise ParameterError("edges must increase and start outside the ball")
    ke = KernelEvaluator(model, domain.d)
    rho = np.linspace(0.0, R, n_radial)
    fields = np.array([shell_flux_radial(ke, a, b, rho) for a, b in zip(edges[:-1], edges[1:])])
    # J_C blows up at the sphere when the first shell touches it; the last node
    # only carries an O(h^(1+alpha/2)) share of occupation
    fields[:, -1] = fields[:, -2]
    fun = Functionals(radial_values=fields, radial_center=c, radial_step=rho[1] - rho[0])
    x = np.asarray(x, float)
    b = simulate_paths(model, domain, np.repeat(x[None, :], N, axis=0), cfg, stream=stream,
                       functionals=fun, workers=workers)
    dist = np.linalg.norm(b.exit_point - c, axis=1)
    cell = np.searchsorted(edges, dist, side="right") - 1
    K = len(edges) - 1
    hits = np.zeros((N, K))
    ok = b.jumped & (cell >= 0) & (cell < K)
    hits[np.nonzero(ok)[0], cell[ok]] = 1.0
    vol = (math.pi ** (domain.d / 2) / math.gamma(domain.d / 2 + 1)) * (edges[1:] ** domain.d - edges[:-1] ** domain.d)
    F = b.radial_integrals
    diff = hits - F
    se = lambda a: a.std(axis=0, ddof=1) / math.sqrt(N)
    frac_jump = float(b.jumped.mean())
    warn = []
    if frac_jump < 0.5:
        warn.append(f"only {frac_jump:.1%} of exits are jumps")
        warnings.warn(warn[-1], RuntimeWarning, stacklevel=2)
    return {
        "edges": edges, "volume": vol,
        "hist": hits.mean(axis=0) / vol, "hist_se": se(hits) / vol,
        "levy": F.mean(axis=0) / vol, "levy_se": se(F) / vol,
        "diff": diff.mean(axis=0) / vol, "diff_se": se(diff) / vol,
        "jumped_fraction": frac_jump, "warnings": warn,
        "mean_exit_time": float(b.exit_time.mean()),
    }


def poisson_kernel_report(model, d=3, r=1.0, edges=None, cfg=None, N=100_000, stream=0, workers=None):
    """Histogram/Levy-system consistency and the envelope fits for K_B(0, .)."""
    cfg = cfg or PathConfig()
    fam = model.family
    edges = np.asarray(edges if edges is not None else r * np.array([1.02, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0]))
    dom = ball(d, r)
    est = estimate_poisson_kernel(model, dom, np.zeros(d), edges, scaled_config(cfg, model, r), N, stream, workers)
    ke = KernelEvaluator(model, d)
    J = ke.jump_table()
    # cell averages of the two envelopes (radial integrals over each shell)
    xs, ws = np.polynomial.legendre.leggauss(24)
    lows, ups = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        y = 0.5 * (a + b) + 0.5 * (b - a) * xs
        w = 0.5 * (b - a) * ws * y ** (d - 1)
        lows.append(w @ J(2 * y) / w.sum())
        ups.append(w @ J(y - r) / w.sum())
    scale_low = lower_exit_envelope(fam, r)
    scale_up = float(upper_exit_envelope(fam, r, r))
    C2 = est["hist"] / (np.array(lows) * scale_low)
    C1 = est["hist"] / (np.array(ups) * scale_up)
    agree = np.abs(est["diff"]) <= 3 * est["diff_se"]
    passed = bool(np.all(agree) and C2.min() > 0)
    return VerificationReport(
        "Poisson kernel of the ball", passed,
        constants={"C1_fit": float(C1.max()), "C2_fit": float(C2.min())},
        grids={"edges": edges, "N": N, "dt": scaled_config(cfg, model, r).dt},
        mc_se=float(np.max(est["diff_se"])),
        details={"hist": est["hist"], "hist_se": est["hist_se"], "levy": est["levy"], "levy_se": est["levy_se"],
                 "diff": est["diff"], "diff_se": est["diff_se"], "agree": agree,
                 "jumped_fraction": est["jumped_fraction"], "family": fam.label, "d": d},
        warnings=est["warnings"],
    )


# ---------------------------------------------------------------------------
# Harnack inequality


def harnack_points(x0, r, d):
    """Sample grid of B(x0, r/2): centre, +-0.49 r e_i and the diagonals."""
    pts = [np.zeros(d)]
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s * 0.49 * r
            pts.append(e)
    for signs in np.array(np.meshgrid(*[[1.0, -1.0]] * d)).T.reshape(-1, d):
        pts.append(signs * 0.49 * r / math.sqrt(d))
    return np.asarray(x0, float) + np.array(pts)


def harnack_patches(x0, r, d):
    """Disjoint exterior cells along +-e_i at radii [2r, 4r]."""
    out = []
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s
            out.append(Patch(tuple(np.asarray(x0, float)), tuple(e), 2 * r, 4 * r, math.pi / 6))
    return out


def verify_harnack(model, r_grid, x0, N, d=3, cfg=None, stream=0, workers=None):
    """Empirical sup/inf over B(x0, r/2) of harmonic measures of exterior cells.

    Pass when the largest ratio is finite and its log-log slope in r lies in
    [-0.1, 0.1].
    """
    cfg = cfg or PathConfig()
    r_grid = np.asarray(r_grid, float)
    if np.any(r_grid <= 0) or np.any(r_grid >= 1):
        raise ParameterError("r_grid must lie in (0, 1)")
    ke = KernelEvaluator(model, d)
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, float)
    ratios, sym, warn, ses = [], [], [], []
    for r in r_grid:
        dom = ball(d, r, x0)
        pts = harnack_points(x0, r, d)
        U, SE = levy_harmonic_measures(model, dom, pts, harnack_patches(x0, r, d), scaled_config(cfg, model, r), N,
                                       stream=stream, workers=workers, ke=ke)
        warn += _starvation(U, SE, f"Harnack r={r:g}")
        ratios.append(float(np.max(U.max(axis=0) / U.min(axis=0))))
        # opposite cells seen from the centre
        z = np.abs(U[0, 0::2] - U[0, 1::2]) / np.hypot(SE[0, 0::2], SE[0, 1::2])
        sym.append(float(z.max()))
        ses.append(float(np.max(SE / U)))
    slope, slope_se = loglog_slope(r_grid, ratios)
    passed = bool(np.all(np.isfinite(ratios)) and abs(slope) <= 0.1)
    return VerificationReport(
        "Harnack inequality", passed,
        constants={"max_ratio": float(max(ratios)), "slope": slope, "slope_se": slope_se},
        grids={"r": r_grid, "x0": x0, "N": N},
        mc_se=float(max(ses)),
        details={"ratio": ratios, "symmetric_cells_z": sym, "symmetric_ok": bool(max(sym) <= 3.0),
                 "family": model.family.label, "d": d},
        warnings=warn,
    )


# ---------------------------------------------------------------------------
# boundary Harnack and Carleson


def slowly_varying_radius(family, kappa, r_max=1.0, factor=2.0):
    """Largest dyadic r5 <= r_max such that the four ell-ratios at scales
    r, kappa r, kappa r/2, 2r and 4r are at most ``factor`` for all 2r <= r5."""
    ell = family.ell
    r5 = r_max
    while r5 > 1e-6:
        r = np.logspace(math.log10(r5 / 2) - 8, math.log10(r5 / 2), 400)
        q = np.max([ell(r**-2.0) / ell((kappa * r) ** -2.0), ell((2 * r) ** -2.0) / ell((4 * r) ** -2.0),
                    ell((kappa * r / 2) ** -2.0) / ell((4 * r) ** -2.0), ell((kappa * r) ** -2.0) / ell((2 * r) ** -2.0)])
        if q <= factor:
            return r5
        r5 /= 2
    return r5


def _inward(domain, Q, r):
    A = domain.witness(Q, r)
    n = A - Q
    return A, n / np.linalg.norm(n)


def bhp_points(domain, Q, r):
    """Points of D ∩ B(Q, r/2) at several depths and lateral offsets."""
    A, n = _inward(domain, Q, r)
    t = _orthonormal_complement(n)
    pts = []
    for s in (0.4, 0.2, 0.1, 0.05):
        base = Q + s * r * n
        pts.append(base)
        for e in t:
            for sgn in (1.0, -1.0):
                pts.append(base + sgn * 0.5 * s * r * e)
    pts = np.array(pts)
    ok = np.atleast_1d(domain.contains(pts)) & (np.linalg.norm(pts - Q, axis=1) < 0.5 * r)
    return pts[ok]


def bhp_patches(domain, Q, r):
    """Two congruent sectors on opposite sides of Q, outside B(Q, 2r)."""
    _, n = _inward(domain, Q, r)
    e = _orthonormal_complement(n)[0]
    M = 4 * domain.diameter
    rho1, rho2 = 3 * r, min(6 * r, M)
    return [Patch(tuple(Q), tuple(e), rho1, rho2), Patch(tuple(Q), tuple(-e), rho1, rho2)]


def _default_r_grid(domain, model, k=4):
    r5 = slowly_varying_radius(model.family, domain.kappa, domain.R_char)
    top = min(domain.R_char, r5) / 2
    return top * 0.5 ** np.arange(k)


def bhp_constant(model, domain, Q, r, cfg, N, same_patch=False, stream=0, workers=None, ke=None):
    """C_emp for one (Q, r) and the raw harmonic measures."""
    Q = np.asarray(Q, float)
    A = domain.witness(Q, r)
    pts = np.vstack([A[None, :], bhp_points(domain, Q, r)])
    patches = bhp_patches(domain, Q, r)
    if same_patch:
        patches = patches[:1]
    U, SE = levy_harmonic_measures(model, domain, pts, patches, scaled_config(cfg, model, 2 * r), N,
                                   clip=(Q, 2 * r), stream=stream, workers=workers, ke=ke)
    u = U[:, 0]
    v = U[:, 0].copy() if same_patch else U[:, 1]
    ratio = u / v
    C = float(np.max(np.maximum(ratio[1:] / ratio[0], ratio[0] / ratio[1:])))
    return C, {"points": pts, "u": u, "v": v, "se": SE}


def verify_bhp(model, domain, Q_list=None, r_grid=None, N=4000, cfg=None, same_patch=False, stream=0, workers=None):
    """Boundary Harnack constant across dyadic r for harmonic measures of two
    patches outside B(Q, 2r), with the process killed on leaving D ∩ B(Q, 2r).

    Pass when C_emp is finite with no upward trend (slope >= -0.1, max/min <= 3)
    for every Q.
    """
    cfg = cfg or PathConfig()
    Q_list = [domain.boundary_point()] if Q_list is None else [np.asarray(Q, float) for Q in Q_list]
    r_grid = _default_r_grid(domain, model) if r_grid is None else np.asarray(r_grid, float)
    if np.any(2 * r_grid > domain.R_char * (1 + 1e-12)):
        raise ParameterError("need 2r <= R_char")
    ke = KernelEvaluator(model, domain.d)
    C_all, slopes, spreads, oks, warn, ses = [], [], [], [], [], []
    for Q in Q_list:
        Cs = []
        for r in r_grid:
            C, raw = bhp_constant(model, domain, Q, r, cfg, N, same_patch, stream, workers, ke)
            if not same_patch:
                warn += _starvation(np.c_[raw["u"], raw["v"]], raw["se"], f"BHP r={r:g}")
            ses.append(float(np.max(raw["se"] / np.c_[raw["u"], raw["v"]][:, : raw["se"].shape[1]])))
            Cs.append(C)
        ok, slope, spread = no_upward_trend(r_grid, Cs)
        if same_patch:
            ok, slope, spread = bool(np.all(np.array(Cs) == 1.0)), 0.0, 1.0
        C_all.append(Cs)
        slopes.append(slope)
        spreads.append(spread)
        oks.append(ok)
    return VerificationReport(
        "boundary Harnack principle", bool(all(oks) and np.all(np.isfinite(C_all))),
        constants={"C_emp": C_all, "slope": slopes, "spread": spreads},
        grids={"r": r_grid, "Q": Q_list, "N": N, "M": 4 * domain.diameter},
        mc_se=float(max(ses)),
        details={"domain": domain.to_dict(), "family": model.family.label, "same_patch": same_patch},
        warnings=sorted(set(warn)),
    )


def carleson_points(domain, Q, r, n=24):
    """Deterministic points of D ∩ B(Q, 3r/2) (Halton sequence, rejected outside)."""
    d = domain.d
    h = qmc.Halton(d, scramble=False).random(8 * n + 1)[1:]
    z = 2 * h - 1
    z = z[np.linalg.norm(z, axis=1) < 1][: 4 * n]
    pts = np.asarray(Q, float) + 1.5 * r * z
    pts = pts[np.atleast_1d(domain.contains(pts))]
    return pts[:n]


def verify_carleson(model, domain, Q_list=None, r_grid=None, N=4000, cfg=None, stream=0, workers=None):
    """max over x in D ∩ B(Q, 3r/2) of u(x)/u(A_r(Q)) for the harmonic measure of
    a patch outside B(Q, 2r); pass when bounded with no upward trend in r."""
    cfg = cfg or PathConfig()
    Q_list = [domain.boundary_point()] if Q_list is None else [np.asarray(Q, float) for Q in Q_list]
    r_grid = _default_r_grid(domain, model) if r_grid is None else np.asarray(r_grid, float)
    ke = KernelEvaluator(model, domain.d)
    out, slopes, oks, warn, ses = [], [], [], [], []
    for Q in Q_list:
        vals = []
        for r in r_grid:
            A = domain.witness(Q, r)
            pts = np.vstack([A[None, :], carleson_points(domain, Q, r)])
            U, SE = levy_harmonic_measures(model, domain, pts, bhp_patches(domain, Q, r)[:1],
                                           scaled_config(cfg, model, 2 * r), N, clip=(Q, 2 * r),
                                           stream=stream, workers=workers, ke=ke)
            warn += _starvation(U[:1], SE[:1], f"Carleson r={r:g}")
            ses.append(float(SE[0, 0] / U[0, 0]))
            vals.append(float(np.max(U[:, 0] / U[0, 0])))
        ok, slope, _ = no_upward_trend(r_grid, vals)
        out.append(vals)
        slopes.append(slope)
        oks.append(ok)
    return VerificationReport(
        "Carleson estimate", bool(all(oks)),
        constants={"C_carleson": out, "slope": slopes},
        grids={"r": r_grid, "Q": Q_list, "N": N},
        mc_se=float(max(ses)),
        details={"domain": domain.to_dict(), "family": model.family.label,
                 "form": "u(x) <= C u(A_r(Q)) on D ∩ B(Q, 3r/2)"},
        warnings=sorted(set(warn)),
    )


__all__ = [
    "Patch", "patch_flux", "stable_ball_exit_time", "stable_ball_poisson_kernel", "shell_flux_radial", "levy_harmonic_measures", "estimate_exit_time",
    "exit_time_envelopes", "estimate_poisson_kernel", "poisson_kernel_report", "verify_harnack",
    "verify_bhp", "verify_carleson", "slowly_varying_radius", "scaled_config"
]
