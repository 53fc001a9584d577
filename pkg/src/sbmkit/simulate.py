"""Subordinator sampling and first-exit simulation of X_t = W_{S_t}.

The Brownian motion is normalised by E exp(i xi W_t) = exp(-t xi^2), so a
subordinator increment dS moves X by sqrt(2 dS) times a standard normal
vector.  Paths are advanced on a fixed real-time grid of step ``dt``; when a
step lands outside the domain the Brownian bridge over the last subordinator
increment is bisected ``refine_levels`` times to localise the exit.

While a path runs, additive functionals int_0^tau f(X_t) dt are accumulated
(left Riemann sums, fractional last step) for three kinds of f: fields on a
regular grid (multilinear interpolation), radial profiles about a centre,
and Epanechnikov kernels at evaluation points.  With ``coupled=True`` the
exit time of the scheme with step 2 dt, driven by the same increments, is
recorded as well.
"""

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numba as nb
import numpy as np
from scipy import integrate

from . import rng as _rng
from .bernstein import Kind
from .domains import inside
from .errors import HorizonExceeded, NumericalError, ParameterError

STABLE, MIXTURE, RELATIVISTIC, COMPOUND = 0, 1, 2, 3
MAX_REJECT = 100_000
STATUS_OK, STATUS_HORIZON, STATUS_REJECT = 0, 1, 2


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-4
    t_max: float = 100.0
    eps_jump: float = 1e-6
    seed: int = 0
    refine_levels: int = 8

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ParameterError(f"t_max must be positive, got {self.t_max}")
        if not self.eps_jump > 0:
            raise ParameterError(f"eps_jump must be positive, got {self.eps_jump}")
        if int(self.refine_levels) != self.refine_levels or self.refine_levels < 0:
            raise ParameterError(f"refine_levels must be a nonnegative integer, got {self.refine_levels}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass
class ExitRecord:
    start: np.ndarray
    exit_time: float
    exit_point: np.ndarray
    pre_jump_point: np.ndarray
    jumped: bool


# ---------------------------------------------------------------------------
# compiled samplers


@nb.njit(cache=True, inline="always")
def _stable_unit(a, st, buf, nst):
    """Positive a-stable variable with E exp(-lambda S) = exp(-lambda^a)."""
    if a == 0.5:
        z = _rng.normal(st, buf, nst)
        return 0.5 / (z * z)
    u = math.pi * _rng.uniform(st, buf)
    e = -math.log(_rng.uniform(st, buf))
    A = (math.sin(a * u) ** (a / (1.0 - a)) * math.sin((1.0 - a) * u)
         / math.sin(u) ** (1.0 / (1.0 - a)))
    return (A / e) ** ((1.0 - a) / a)


@nb.njit(cache=True)
def _poisson(m, st, buf):
    u = _rng.uniform(st, buf)
    p = math.exp(-m)
    F = p
    k = 0
    while u > F and k < 10000:
        k += 1
        p *= m / k
        F += p
    return k


@nb.njit(cache=True, inline="always")
def _increment(code, par, cpx, cpy, dt, st, buf, nst):
    """Subordinator increment over dt; negative return signals rejection overflow."""
    if code == STABLE:
        return dt ** (1.0 / par[0]) * _stable_unit(par[0], st, buf, nst)
    if code == MIXTURE:
        return (dt ** (1.0 / par[0]) * _stable_unit(par[0], st, buf, nst)
                + dt ** (1.0 / par[1]) * _stable_unit(par[1], st, buf, nst))
    if code == RELATIVISTIC:
        # exponential tilting of the a-stable law: accept s with probability e^{-s}
        scale = dt ** (1.0 / par[0])
        for _ in range(MAX_REJECT):
            s = scale * _stable_unit(par[0], st, buf, nst)
            if _rng.uniform(st, buf) < math.exp(-s):
                return s
        return -1.0
    # compound Poisson above eps plus the mean of the small jumps
    total = par[3] * dt
    n = _poisson(par[2] * dt, st, buf)
    for _ in range(n):
        q = -math.log(_rng.uniform(st, buf) * par[2])
        if q <= cpx[-1]:
            y = np.interp(q, cpx, cpy)
        else:
            y = cpy[-1] + (q - cpx[-1]) / par[4]
        total += math.exp(y)
    return total


@nb.njit(cache=True)
def _sample_increments(code, par, cpx, cpy, dt, n, seed, stream, offset):
    out = np.empty(n)
    for i in range(n):
        st = _rng.new_state(seed, offset + i, stream)
        buf = np.zeros(4, np.uint64)
        nst = np.zeros(2)
        out[i] = _increment(code, par, cpx, cpy, dt, st, buf, nst)
    return out


@nb.njit(cache=True)
def _sample_increment_counts(code, par, cpx, cpy, dt, n, seed, stream):
    """Relativistic acceptance bookkeeping: number of stable proposals per increment."""
    tries = np.empty(n, np.int64)
    scale = dt ** (1.0 / par[0])
    for i in range(n):
        st = _rng.new_state(seed, i, stream)
        buf = np.zeros(4, np.uint64)
        nst = np.zeros(2)
        k = 0
        while k < MAX_REJECT:
            k += 1
            s = scale * _stable_unit(par[0], st, buf, nst)
            if _rng.uniform(st, buf) < math.exp(-s):
                break
        tries[i] = k
    return tries


# ---------------------------------------------------------------------------
# compiled path kernel


@nb.njit(cache=True)
def _accumulate(x, w, p, gf, gshape, gorigin, gstep, gstride, out_g,
                rf, rcenter, rstep, out_r, kp, kh, kc, out_k):
    d = x.shape[0]
    K = gf.shape[0]
    if K > 0:
        idx = np.empty(d, np.int64)
        frac = np.empty(d)
        for i in range(d):
            u = (x[i] - gorigin[i]) / gstep[i]
            n = gshape[i]
            if u < 0.0:
                u = 0.0
            if u > n - 1.0:
                u = n - 1.0
            j = int(u)
            if j > n - 2:
                j = n - 2
            idx[i] = j
            frac[i] = u - j
        for c in range(1 << d):
            wt = w
            flat = 0
            for i in range(d):
                if (c >> i) & 1:
                    wt *= frac[i]
                    flat += (idx[i] + 1) * gstride[i]
                else:
                    wt *= 1.0 - frac[i]
                    flat += idx[i] * gstride[i]
            if wt != 0.0:
                for k in range(K):
                    out_g[p, k] += wt * gf[k, flat]
    K2 = rf.shape[0]
    if K2 > 0:
        s = 0.0
        for i in range(d):
            y = x[i] - rcenter[i]
            s += y * y
        u = math.sqrt(s) / rstep
        nr = rf.shape[1]
        if u > nr - 1.0:
            u = nr - 1.0
        j = int(u)
        if j > nr - 2:
            j = nr - 2
        f = u - j
        for k in range(K2):
            out_r[p, k] += w * ((1.0 - f) * rf[k, j] + f * rf[k, j + 1])
    E = kp.shape[0]
    for e in range(E):
        s = 0.0
        for i in range(d):
            y = x[i] - kp[e, i]
            s += y * y
        q = s / (kh[e] * kh[e])
        if q < 1.0:
            out_k[p, e] += w * kc * (1.0 - q) / kh[e] ** d


@nb.njit(cache=True, inline="always")
def _inside(dom_code, dom_par, clip, x):
    """Membership in D, intersected with the ball clip = (centre, radius) when radius > 0."""
    if not inside(dom_code, dom_par, x):
        return False
    R = clip[-1]
    if R <= 0.0:
        return True
    s = 0.0
    for i in range(x.shape[0]):
        y = x[i] - clip[i]
        s += y * y
    return s < R * R


@nb.njit(cache=True)
def _bridge(xa, xb, dS, levels, dom_code, dom_par, clip, st, buf, nst, pre):
    """Bisect the Brownian bridge from xa (inside) to xb (outside) over clock
    length dS; returns the step fraction of the first located outside point
    and writes the last inside point into ``pre``."""
    d = xa.shape[0]
    a = xa.copy()
    b = xb.copy()
    m = np.empty(d)
    lo = 0.0
    hi = 1.0
    length = dS
    for _ in range(levels):
        sd = math.sqrt(0.5 * length)
        for i in range(d):
            m[i] = 0.5 * (a[i] + b[i]) + sd * _rng.normal(st, buf, nst)
        mid = 0.5 * (lo + hi)
        if _inside(dom_code, dom_par, clip, m):
            a[:] = m
            lo = mid
        else:
            b[:] = m
            hi = mid
        length *= 0.5
    pre[:] = a
    return hi


@nb.njit(cache=True, parallel=True)
def _run_paths(sub_code, sub_par, cpx, cpy, dom_code, dom_par, clip, starts, dt, t_max, levels,
               seed, stream, path_offset, coupled,
               gf, gshape, gorigin, gstep, rf, rcenter, rstep, kp, kh, kc,
               out_tau, out_exit, out_pre, out_jump, out_status, out_g, out_r, out_k, out_tauc):
    N, d = starts.shape
    gstride = np.empty(d, np.int64)
    acc = 1
    for i in range(d - 1, -1, -1):
        gstride[i] = acc
        acc *= gshape[i] if gf.shape[0] > 0 else 1
    has_fields = gf.shape[0] + rf.shape[0] + kp.shape[0] > 0
    for p in nb.prange(N):
        pid = path_offset + p
        st = _rng.new_state(seed, pid, 2 * stream)
        buf = np.zeros(4, np.uint64)
        nst = np.zeros(2)
        stc = _rng.new_state(seed, pid, 2 * stream + 1)
        bufc = np.zeros(4, np.uint64)
        nstc = np.zeros(2)
        x = starts[p].copy()
        z = np.empty(d)
        pre = np.empty(d)
        xc = x.copy()
        dSc = 0.0
        t = 0.0
        k = 0
        fine_done = False
        coarse_done = not coupled
        status = STATUS_OK
        out_tau[p] = np.nan
        out_tauc[p] = np.nan
        if not _inside(dom_code, dom_par, clip, x):
            out_tau[p] = 0.0
            out_tauc[p] = 0.0
            out_exit[p] = x
            out_pre[p] = x
            out_jump[p] = False
            out_status[p] = STATUS_OK
            continue
        while True:
            if t >= t_max:
                status = STATUS_HORIZON
                break
            dS = _increment(sub_code, sub_par, cpx, cpy, dt, st, buf, nst)
            if dS < 0.0:
                status = STATUS_REJECT
                break
            sc = math.sqrt(2.0 * dS)
            for i in range(d):
                z[i] = x[i] + sc * _rng.normal(st, buf, nst)
            if not fine_done:
                if _inside(dom_code, dom_par, clip, z):
                    if has_fields:
                        _accumulate(x, dt, p, gf, gshape, gorigin, gstep, gstride, out_g,
                                    rf, rcenter, rstep, out_r, kp, kh, kc, out_k)
                else:
                    frac = _bridge(x, z, dS, levels, dom_code, dom_par, clip, st, buf, nst, pre)
                    _accumulate(x, frac * dt, p, gf, gshape, gorigin, gstep, gstride, out_g,
                                rf, rcenter, rstep, out_r, kp, kh, kc, out_k)
                    out_tau[p] = t + frac * dt
                    out_exit[p] = z
                    out_pre[p] = pre
                    jd = 0.0
                    for i in range(d):
                        jd += (z[i] - pre[i]) ** 2
                    out_jump[p] = math.sqrt(jd) > 3.0 * math.sqrt(2.0 * dS / 2.0**levels)
                    fine_done = True
            if not coarse_done:
                dSc += dS
                if k % 2 == 1:
                    if _inside(dom_code, dom_par, clip, z):
                        xc[:] = z
                        dSc = 0.0
                    else:
                        frac = _bridge(xc, z, dSc, levels, dom_code, dom_par, clip, stc, bufc, nstc, pre)
                        out_tauc[p] = t - dt + frac * 2.0 * dt
                        coarse_done = True
            x[:] = z
            t += dt
            k += 1
            if fine_done and coarse_done:
                break
        out_status[p] = status


# ---------------------------------------------------------------------------
# python side


@dataclass(frozen=True)
class SubordinatorSpec:
    code: int
    par: np.ndarray
    cpx: np.ndarray
    cpy: np.ndarray


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _tail_masses(model, t):
    """T(t_k) = int_{t_k}^inf mu for an increasing log grid t."""
    x = np.log(t)
    mid, half = 0.5 * (x[1:] + x[:-1]), 0.5 * (x[1:] - x[:-1])
    s = np.exp(mid[:, None] + half[:, None] * _GL_X[None, :])
    pieces = (np.asarray(model.mu(s)) * s) @ _GL_W * half
    # beyond the grid mu is a power law t^(-1-g)
    g = -1.0 - (np.log(model.mu(t[-1])) - np.log(model.mu(t[-2]))) / (x[-1] - x[-2])
    end = float(model.mu(t[-1])) * t[-1] / g
    return end + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]), g


def _small_jump_mean(model, eps):
    """int_0^eps t mu(t) dt."""
    f = lambda y: float(model.mu(math.exp(y))) * math.exp(2 * y)
    lo = math.log(eps) - 30.0
    val = integrate.quad(f, lo, math.log(eps), epsabs=0, epsrel=1e-10, limit=400)[0]
    # below exp(lo) t mu(t) ~ c t^(-a): add the power-law remainder
    a = model.family.a
    val += f(lo) / (1.0 - a)
    return val


@lru_cache(maxsize=None)
def subordinator_spec(model, eps_jump=1e-6):
    fam = model.family
    empty = np.zeros(2)
    if fam.kind is Kind.STABLE:
        return SubordinatorSpec(STABLE, np.array([fam.a, 0, 0, 0, 0.0]), empty, empty)
    if fam.kind is Kind.MIXTURE:
        return SubordinatorSpec(MIXTURE, np.array([fam.a, fam.b, 0, 0, 0.0]), empty, empty)
    if fam.kind is Kind.RELATIVISTIC:
        return SubordinatorSpec(RELATIVISTIC, np.array([fam.a, 0, 0, 0, 0.0]), empty, empty)
    t = np.logspace(math.log10(eps_jump), 8.0, int(round((8.0 - math.log10(eps_jump)) * 32)) + 1)
    T, g = _tail_masses(model, t)
    rate = float(T[0])
    drift = _small_jump_mean(model, eps_jump)
    return SubordinatorSpec(COMPOUND, np.array([fam.a, 0.0, rate, drift, g]), -np.log(T), np.log(t))


def sample_subordinator_increment(model, dt, rng_state=(0, 0), eps_jump=1e-6):
    """One increment S_dt; ``rng_state`` is (seed, path index)."""
    seed, idx = rng_state
    return float(sample_increments(model, dt, 1, seed=seed, stream=0, eps_jump=eps_jump, offset=idx)[0])


def sample_increments(model, dt, n, seed=0, stream=0, eps_jump=1e-6, offset=0):
    """n independent increments S_dt; increment i uses the generator of path offset + i."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    spec = subordinator_spec(model, eps_jump)
    out = _sample_increments(spec.code, spec.par, spec.cpx, spec.cpy, float(dt), int(n),
                             np.uint64(seed), np.uint64(stream), np.uint64(offset))
    if np.any(out < 0):
        raise NumericalError("relativistic rejection sampler exceeded its retry budget")
    return out


def relativistic_proposals(model, dt, n, seed=0, stream=0):
    """Number of stable proposals used per relativistic increment."""
    spec = subordinator_spec(model)
    if spec.code != RELATIVISTIC:
        raise ParameterError("proposal counts are defined for the relativistic family only")
    return _sample_increment_counts(spec.code, spec.par, spec.cpx, spec.cpy, float(dt), int(n),
                                    np.uint64(seed), np.uint64(stream))


@dataclass
class Functionals:
    """Integrands for int_0^tau f(X_t) dt accumulated during simulation."""

    grid_values: np.ndarray = None     # (K, n_1, ..., n_d)
    grid_origin: np.ndarray = None
    grid_step: np.ndarray = None
    radial_values: np.ndarray = None   # (K2, n_r) on r = 0, dr, 2 dr, ...
    radial_center: np.ndarray = None
    radial_step: float = 1.0
    kde_points: np.ndarray = None      # (E, d)
    kde_bandwidth: np.ndarray = None   # (E,)

    def packed(self, d):
        if self.grid_values is None:
            gf = np.zeros((0, 1))
            gshape = np.full(d, 2, np.int64)
            gorigin = np.zeros(d)
            gstep = np.ones(d)
        else:
            gv = np.asarray(self.grid_values, float)
            gf = np.ascontiguousarray(gv.reshape(gv.shape[0], -1))
            gshape = np.asarray(gv.shape[1:], np.int64)
            gorigin = np.asarray(self.grid_origin, float)
            gstep = np.asarray(self.grid_step, float)
        if self.radial_values is None:
            rf = np.zeros((0, 2))
            rcenter = np.zeros(d)
        else:
            rf = np.ascontiguousarray(np.asarray(self.radial_values, float))
            rcenter = np.asarray(self.radial_center, float)
        if self.kde_points is None:
            kp = np.zeros((0, d))
            kh = np.zeros(0)
        else:
            kp = np.ascontiguousarray(np.asarray(self.kde_points, float))
            kh = np.asarray(self.kde_bandwidth, float)
        return gf, gshape, gorigin, gstep, rf, rcenter, float(self.radial_step), kp, kh


def epanechnikov_const(d):
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return (d + 2) / (2 * vol)


@dataclass
class PathBatch:
    starts: np.ndarray
    exit_time: np.ndarray
    exit_point: np.ndarray
    pre_jump_point: np.ndarray
    jumped: np.ndarray
    status: np.ndarray
    grid_integrals: np.ndarray
    radial_integrals: np.ndarray
    kde_integrals: np.ndarray
    exit_time_coarse: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.exit_time)

    def record(self, i):
        return ExitRecord(self.starts[i].copy(), float(self.exit_time[i]), self.exit_point[i].copy(),
                          self.pre_jump_point[i].copy(), bool(self.jumped[i]))

    @property
    def n_horizon(self):
        return int(np.sum(self.status == STATUS_HORIZON))


def resolve_workers(workers=None):
    if workers is None:
        workers = int(os.environ.get("SBMKIT_WORKERS", "1"))
    return max(1, min(int(workers), nb.config.NUMBA_NUM_THREADS))


def simulate_paths(model, domain, starts, cfg, stream=0, path_offset=0, functionals=None,
                   coupled=False, workers=None, on_horizon="raise", clip=None):
    """Simulate one path from each row of ``starts`` until it leaves ``domain``.

    With ``clip = (centre, radius)`` the path is stopped on leaving
    domain ∩ B(centre, radius) instead.

    Paths are indexed by ``path_offset + i``; together with ``cfg.seed`` and
    ``stream`` this fixes every random number, independently of ``workers``.
    """
    starts = np.ascontiguousarray(np.atleast_2d(np.asarray(starts, float)))
    N, d = starts.shape
    if d != domain.d:
        raise ParameterError(f"start points have dimension {d}, domain has {domain.d}")
    spec = subordinator_spec(model, cfg.eps_jump)
    clip_arr = np.zeros(d + 1)
    if clip is not None:
        clip_arr[:d] = np.asarray(clip[0], float)
        clip_arr[d] = float(clip[1])
        if not clip_arr[d] > 0:
            raise ParameterError("clip radius must be positive")
    fun = functionals or Functionals()
    gf, gshape, gorigin, gstep, rf, rcenter, rstep, kp, kh = fun.packed(d)
    out = dict(
        out_tau=np.empty(N), out_exit=np.empty((N, d)), out_pre=np.empty((N, d)),
        out_jump=np.zeros(N, np.bool_), out_status=np.zeros(N, np.int8),
        out_g=np.zeros((N, gf.shape[0])), out_r=np.zeros((N, rf.shape[0])),
        out_k=np.zeros((N, kp.shape[0])), out_tauc=np.empty(N),
    )
    nb.set_num_threads(resolve_workers(workers))
    _run_paths(spec.code, spec.par, spec.cpx, spec.cpy, domain.code, domain.params, clip_arr, starts,
               float(cfg.dt), float(cfg.t_max), int(cfg.refine_levels), np.uint64(cfg.seed),
               np.uint64(stream), np.int64(path_offset), bool(coupled),
               gf, gshape, gorigin, gstep, rf, rcenter, rstep, kp, kh, epanechnikov_const(d),
               **out)
    status = out["out_status"]
    if np.any(status == STATUS_REJECT):
        raise NumericalError("relativistic rejection sampler exceeded its retry budget")
    if on_horizon == "raise" and np.any(status == STATUS_HORIZON):
        raise HorizonExceeded(f"{int(np.sum(status == STATUS_HORIZON))} of {N} paths still inside at t_max={cfg.t_max}")
    return PathBatch(starts, out["out_tau"], out["out_exit"], out["out_pre"], out["out_jump"], status,
                     out["out_g"], out["out_r"], out["out_k"], out["out_tauc"] if coupled else None)


def simulate_until_exit(model, domain, start, cfg, rng_state=0):
    """Single path; ``rng_state`` is the path index within the seed's stream."""
    start = np.asarray(start, float)
    if not domain.contains(start):
        raise ParameterError("start point must lie in the domain")
    batch = simulate_paths(model, domain, start[None, :], cfg, path_offset=int(rng_state))
    return batch.record(0)


def harmonic_measure(model, domain, start, boundary_partition, cfg, N, stream=0, workers=None):
    """Frequencies of X_tau over the cells of ``boundary_partition``.

    ``boundary_partition`` maps an (n, d) array of exterior points to integer
    cell labels 0..n_cells-1 and exposes ``n_cells``.  Returns (p, se).
    """
    start = np.asarray(start, float)
    batch = simulate_paths(model, domain, np.repeat(start[None, :], int(N), axis=0), cfg,
                           stream=stream, workers=workers)
    labels = np.asarray(boundary_partition(batch.exit_point), int)
    counts = np.bincount(labels, minlength=boundary_partition.n_cells).astype(float)
    p = counts / N
    return p, np.sqrt(p * (1 - p) / N)


class RadialShells:
    """Exterior partition of a ball's complement into shells {r_k <= |y - c| < r_{k+1}}."""

    def __init__(self, center, edges):
        self.center = np.asarray(center, float)
        self.edges = np.asarray(edges, float)
        self.n_cells = len(self.edges)  # the last cell is |y - c| >= edges[-1]

    def __call__(self, y):
        r = np.linalg.norm(np.atleast_2d(y) - self.center, axis=1)
        return np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, self.n_cells - 1)


class Orthants:
    """Exterior partition by the sign pattern of the first ``k`` coordinates about ``center``."""

    def __init__(self, center, k):
        self.center = np.asarray(center, float)
        self.k = int(k)
        self.n_cells = 2**self.k

    def __call__(self, y):
        s = (np.atleast_2d(y) - self.center)[:, : self.k] >= 0
        return (s * (1 << np.arange(self.k))).sum(axis=1)
